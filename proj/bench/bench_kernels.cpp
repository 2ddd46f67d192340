// Serial vs OpenMP timing of the dense kernels. Prints one line per shape
// with the median wall time of each version and the speedup.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include <omp.h>

#include "cizsl/kernels.hpp"
#include "cizsl/random.hpp"

using namespace cizsl;
using Kernel = std::function<void()>;

namespace {

double median_ms(const Kernel& f, int reps) {
  std::vector<double> t;
  f();  // warm-up
  for (int r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

void report(const char* name, std::size_t m, std::size_t k, std::size_t n, const Kernel& serial,
            const Kernel& parallel, int reps) {
  const double s = median_ms(serial, reps);
  const double p = median_ms(parallel, reps);
  std::printf("%-18s %5zu x %5zu x %5zu  serial %9.3f ms  parallel %9.3f ms  speedup %5.2fx\n", name, m, k, n, s, p,
              s / p);
}

}  // namespace

int main() {
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
  Rng rng(42, 0);
  struct Shape {
    std::size_t m, k, n;
  };
  const std::vector<Shape> shapes{{64, 32, 128}, {64, 512, 128}, {256, 256, 256}, {512, 512, 512}};
  for (const auto& [m, k, n] : shapes) {
    const int reps = m * k * n > (1u << 24) ? 5 : 30;
    const auto a = random_vec(rng, m * k), b = random_vec(rng, k * n);
    std::vector<double> c(m * n);
    report("gemm_nn", m, k, n, [&] { kernels::serial::gemm_nn(a, b, c, m, k, n); },
           [&] { kernels::parallel::gemm_nn(a, b, c, m, k, n); }, reps);
    report("gemm_tn", m, k, n, [&] { kernels::serial::gemm_tn(a, b, c, m, k, n); },
           [&] { kernels::parallel::gemm_tn(a, b, c, m, k, n); }, reps);
    report("gemm_nt", m, k, n, [&] { kernels::serial::gemm_nt(a, b, c, m, k, n); },
           [&] { kernels::parallel::gemm_nt(a, b, c, m, k, n); }, reps);
  }
  const std::vector<Shape> dist{{240, 32, 240}, {1000, 32, 720}, {2000, 128, 2000}};
  for (const auto& [m, d, n] : dist) {
    const auto x = random_vec(rng, m * d), y = random_vec(rng, n * d);
    std::vector<double> out(m * n);
    report("pairwise_sq_dist", m, d, n, [&] { kernels::serial::pairwise_sq_dist(x, y, out, m, n, d); },
           [&] { kernels::parallel::pairwise_sq_dist(x, y, out, m, n, d); }, 10);
  }
  return 0;
}
