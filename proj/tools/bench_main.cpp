// Compares the OpenMP kernels against their serial references and reports
// throughput plus speedup. The parallel paths are bit-identical to serial by
// construction; this target checks the time side of that bargain.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "co4/kernels.hpp"
#include "co4/modulation.hpp"
#include "co4/rng.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warmup
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = clock_type::now();
    fn();
    const auto t1 = clock_type::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

std::vector<double> random_vec(std::size_t n, co4::Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void report(const char* name, double flops, double serial_ms, double parallel_ms) {
  std::printf("%-28s serial %8.2f ms (%6.2f GFLOP/s)   omp %8.2f ms (%6.2f GFLOP/s)   speedup %.2fx\n",
              name, serial_ms, flops / serial_ms / 1e6, parallel_ms,
              flops / parallel_ms / 1e6, serial_ms / parallel_ms);
}

}  // namespace

int main() {
  co4::Rng rng(42);
  std::printf("threads available: %d\n\n", omp_get_max_threads());

  for (int n : {128, 256, 512}) {
    auto a = random_vec(static_cast<std::size_t>(n) * n, rng);
    auto b = random_vec(static_cast<std::size_t>(n) * n, rng);
    std::vector<double> c(static_cast<std::size_t>(n) * n);
    const double flops = 2.0 * n * n * n;
    const int reps = n <= 256 ? 20 : 5;
    const double s = time_ms([&] { co4::kernels::matmul_nn_serial(a.data(), b.data(), c.data(), n, n, n); }, reps);
    const double p = time_ms([&] { co4::kernels::matmul_nn(a.data(), b.data(), c.data(), n, n, n); }, reps);
    char name[64];
    std::snprintf(name, sizeof(name), "matmul %dx%dx%d", n, n, n);
    report(name, flops, s, p);
  }

  {
    const int r = 4096, c = 256;
    auto x = random_vec(static_cast<std::size_t>(r) * c, rng);
    std::vector<double> y(x.size());
    const double flops = 4.0 * r * c;
    const double s = time_ms([&] { co4::kernels::softmax_rows_serial(x.data(), y.data(), r, c); }, 20);
    const double p = time_ms([&] { co4::kernels::softmax_rows(x.data(), y.data(), r, c); }, 20);
    report("softmax_rows 4096x256", flops, s, p);
  }

  {
    const int r = 4096, c = 256;
    auto x = random_vec(static_cast<std::size_t>(r) * c, rng);
    std::vector<double> gain(c, 1.0), bias(c, 0.0), y(x.size());
    const double flops = 6.0 * r * c;
    const double s = time_ms([&] {
      co4::kernels::layer_norm_rows_serial(x.data(), gain.data(), bias.data(), 1e-5, y.data(), nullptr, nullptr, r, c);
    }, 20);
    const double p = time_ms([&] {
      co4::kernels::layer_norm_rows(x.data(), gain.data(), bias.data(), 1e-5, y.data(), nullptr, nullptr, r, c);
    }, 20);
    report("layer_norm 4096x256", flops, s, p);
  }

  {
    const std::size_t n = 1 << 22;
    auto r_in = random_vec(n, rng);
    auto c_in = random_vec(n, rng);
    std::vector<double> y(n);
    const double* rd = r_in.data();
    const double* cd = c_in.data();
    double* yd = y.data();
    const double flops = 7.0 * static_cast<double>(n);
    const double s = time_ms([&] {
      co4::kernels::map_serial(n, [=](std::size_t i) {
        yd[i] = co4::mod::value(co4::ModulationKind::Cooperation, rd[i], cd[i]);
      });
    }, 10);
    const double p = time_ms([&] {
      co4::kernels::map(n, [=](std::size_t i) {
        yd[i] = co4::mod::value(co4::ModulationKind::Cooperation, rd[i], cd[i]);
      });
    }, 10);
    report("cooperation map 4M", flops, s, p);
  }
  return 0;
}
