#pragma once

#include <cstddef>

namespace co4::kernels {

// Runtime knobs for the OpenMP paths. Every parallel kernel dispatches row
// blocks to threads; each output element is produced by exactly one thread
// with the same inner-loop order as the serial reference, so results are
// bit-identical for any thread count.
void set_max_threads(int n);
int max_threads();
void set_grain(std::size_t scalar_ops);  // below this much work, stay serial
std::size_t grain();

// Row-major dense products. `accumulate` adds into c instead of overwriting.
// c[m×n] = a[m×k] · b[k×n]
void matmul_nn(const double* a, const double* b, double* c, int m, int k,
               int n, bool accumulate = false);
void matmul_nn_serial(const double* a, const double* b, double* c, int m,
                      int k, int n, bool accumulate = false);

// c[m×n] = a[m×k] · b[n×k]^T
void matmul_nt(const double* a, const double* b, double* c, int m, int k,
               int n, bool accumulate = false);
void matmul_nt_serial(const double* a, const double* b, double* c, int m,
                      int k, int n, bool accumulate = false);

// c[m×n] = a[k×m]^T · b[k×n]
void matmul_tn(const double* a, const double* b, double* c, int m, int k,
               int n, bool accumulate = false);
void matmul_tn_serial(const double* a, const double* b, double* c, int m,
                      int k, int n, bool accumulate = false);

void transpose(const double* a, double* at, int r, int c);

// Per-row exp-normalize with max subtraction.
void softmax_rows(const double* x, double* y, int r, int c);
void softmax_rows_serial(const double* x, double* y, int r, int c);

// Per-row standardization followed by affine gain/bias. `xhat` and `inv_std`
// receive the pre-affine normalized values and 1/sqrt(var+eps) when non-null
// (the backward pass needs them).
void layer_norm_rows(const double* x, const double* gain, const double* bias,
                     double eps, double* y, double* xhat, double* inv_std,
                     int r, int c);
void layer_norm_rows_serial(const double* x, const double* gain,
                            const double* bias, double eps, double* y,
                            double* xhat, double* inv_std, int r, int c);

namespace detail {
bool should_parallelize(std::size_t scalar_ops);
}

// Elementwise map over [0, n): f(i) must touch only slot i of its outputs.
template <class F>
void map_serial(std::size_t n, F&& f) {
  for (std::size_t i = 0; i < n; ++i) f(i);
}

template <class F>
void map(std::size_t n, F&& f) {
  if (!detail::should_parallelize(n)) {
    map_serial(n, f);
    return;
  }
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    f(static_cast<std::size_t>(i));
}

// Row map over [0, r): one call per row.
template <class F>
void row_map_serial(int r, std::size_t ops_per_row, F&& f) {
  (void)ops_per_row;
  for (int i = 0; i < r; ++i) f(i);
}

template <class F>
void row_map(int r, std::size_t ops_per_row, F&& f) {
  if (!detail::should_parallelize(static_cast<std::size_t>(r) * ops_per_row)) {
    row_map_serial(r, ops_per_row, f);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < r; ++i) f(i);
}

}  // namespace co4::kernels
