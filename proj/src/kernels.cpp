#include "co4/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace co4::kernels {

namespace {
int g_max_threads = 0;  // 0 = OpenMP default
std::size_t g_grain = 16 * 1024;

// One output row of c = a·b (+=). Shared by the serial and parallel variants
// so both produce the same instruction sequence per element.
inline void nn_row(const double* a, const double* b, double* c, int i, int k,
                   int n, bool accumulate) {
  double* crow = c + static_cast<std::size_t>(i) * n;
  if (!accumulate) std::fill(crow, crow + n, 0.0);
  const double* arow = a + static_cast<std::size_t>(i) * k;
  for (int t = 0; t < k; ++t) {
    const double av = arow[t];
    const double* brow = b + static_cast<std::size_t>(t) * n;
    for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline void softmax_row(const double* x, double* y, int i, int c) {
  const double* xr = x + static_cast<std::size_t>(i) * c;
  double* yr = y + static_cast<std::size_t>(i) * c;
  double mx = xr[0];
  for (int j = 1; j < c; ++j) mx = std::max(mx, xr[j]);
  double sum = 0.0;
  for (int j = 0; j < c; ++j) {
    yr[j] = std::exp(xr[j] - mx);
    sum += yr[j];
  }
  const double inv = 1.0 / sum;
  for (int j = 0; j < c; ++j) yr[j] *= inv;
}

inline void layer_norm_row(const double* x, const double* gain,
                           const double* bias, double eps, double* y,
                           double* xhat, double* inv_std, int i, int c) {
  const double* xr = x + static_cast<std::size_t>(i) * c;
  double* yr = y + static_cast<std::size_t>(i) * c;
  double mean = 0.0;
  for (int j = 0; j < c; ++j) mean += xr[j];
  mean /= c;
  double var = 0.0;
  for (int j = 0; j < c; ++j) {
    const double d = xr[j] - mean;
    var += d * d;
  }
  var /= c;
  const double istd = 1.0 / std::sqrt(var + eps);
  if (inv_std) inv_std[i] = istd;
  double* xh = xhat ? xhat + static_cast<std::size_t>(i) * c : nullptr;
  for (int j = 0; j < c; ++j) {
    const double h = (xr[j] - mean) * istd;
    if (xh) xh[j] = h;
    yr[j] = gain[j] * h + bias[j];
  }
}
}  // namespace

void set_max_threads(int n) { g_max_threads = n < 0 ? 0 : n; }
int max_threads() { return g_max_threads; }
void set_grain(std::size_t scalar_ops) { g_grain = scalar_ops; }
std::size_t grain() { return g_grain; }

namespace detail {
bool should_parallelize(std::size_t scalar_ops) {
  if (scalar_ops < g_grain) return false;
  if (g_max_threads == 1) return false;
  if (omp_in_parallel()) return false;  // no nesting
  return omp_get_max_threads() > 1 || g_max_threads > 1;
}
}  // namespace detail

void matmul_nn_serial(const double* a, const double* b, double* c, int m,
                      int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) nn_row(a, b, c, i, k, n, accumulate);
}

void matmul_nn(const double* a, const double* b, double* c, int m, int k,
               int n, bool accumulate) {
  const std::size_t work = static_cast<std::size_t>(m) * k * n;
  if (!detail::should_parallelize(work)) {
    matmul_nn_serial(a, b, c, m, k, n, accumulate);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) nn_row(a, b, c, i, k, n, accumulate);
}

void transpose(const double* a, double* at, int r, int c) {
  kernels::row_map(r, static_cast<std::size_t>(c), [&](int i) {
    const double* ar = a + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) at[static_cast<std::size_t>(j) * r + i] = ar[j];
  });
}

// a[m×k] · b[n×k]^T, materialized as a·(b^T) so the inner loops stay
// unit-stride; the per-element summation order matches the naive nt loop.
void matmul_nt_serial(const double* a, const double* b, double* c, int m,
                      int k, int n, bool accumulate) {
  std::vector<double> bt(static_cast<std::size_t>(k) * n);
  for (int j = 0; j < n; ++j)
    for (int t = 0; t < k; ++t)
      bt[static_cast<std::size_t>(t) * n + j] =
          b[static_cast<std::size_t>(j) * k + t];
  matmul_nn_serial(a, bt.data(), c, m, k, n, accumulate);
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k,
               int n, bool accumulate) {
  std::vector<double> bt(static_cast<std::size_t>(k) * n);
  transpose(b, bt.data(), n, k);
  matmul_nn(a, bt.data(), c, m, k, n, accumulate);
}

void matmul_tn_serial(const double* a, const double* b, double* c, int m,
                      int k, int n, bool accumulate) {
  std::vector<double> at(static_cast<std::size_t>(m) * k);
  for (int i = 0; i < m; ++i)
    for (int t = 0; t < k; ++t)
      at[static_cast<std::size_t>(i) * k + t] =
          a[static_cast<std::size_t>(t) * m + i];
  matmul_nn_serial(at.data(), b, c, m, k, n, accumulate);
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k,
               int n, bool accumulate) {
  std::vector<double> at(static_cast<std::size_t>(m) * k);
  transpose(a, at.data(), k, m);
  matmul_nn(at.data(), b, c, m, k, n, accumulate);
}

void softmax_rows_serial(const double* x, double* y, int r, int c) {
  for (int i = 0; i < r; ++i) softmax_row(x, y, i, c);
}

void softmax_rows(const double* x, double* y, int r, int c) {
  row_map(r, static_cast<std::size_t>(c) * 4, [&](int i) { softmax_row(x, y, i, c); });
}

void layer_norm_rows_serial(const double* x, const double* gain,
                            const double* bias, double eps, double* y,
                            double* xhat, double* inv_std, int r, int c) {
  for (int i = 0; i < r; ++i)
    layer_norm_row(x, gain, bias, eps, y, xhat, inv_std, i, c);
}

void layer_norm_rows(const double* x, const double* gain, const double* bias,
                     double eps, double* y, double* xhat, double* inv_std,
                     int r, int c) {
  row_map(r, static_cast<std::size_t>(c) * 4, [&](int i) {
    layer_norm_row(x, gain, bias, eps, y, xhat, inv_std, i, c);
  });
}

}  // namespace co4::kernels
