#include "cizsl/kernels.hpp"

#include <algorithm>

namespace cizsl::kernels {

namespace {

// Row kernels shared by both variants; the outer row loop is the only
// thing that differs between serial and parallel.

inline void row_nn(const double* a, const double* b, double* c, std::size_t i, std::size_t k,
                   std::size_t n) {
  double* ci = c + i * n;
  std::fill(ci, ci + n, 0.0);
  const double* ai = a + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double aip = ai[p];
    const double* bp = b + p * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
  }
}

inline void row_tn(const double* a, const double* b, double* c, std::size_t i, std::size_t m,
                   std::size_t k, std::size_t n) {
  double* ci = c + i * n;
  std::fill(ci, ci + n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double api = a[p * m + i];
    const double* bp = b + p * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
  }
}

inline void row_nt(const double* a, const double* b, double* c, std::size_t i, std::size_t k,
                   std::size_t n) {
  const double* ai = a + i * k;
  for (std::size_t j = 0; j < n; ++j) {
    const double* bj = b + j * k;
    double s = 0.0;
    for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
    c[i * n + j] = s;
  }
}

inline void row_dist(const double* x, const double* y, double* d, std::size_t i, std::size_t n,
                     std::size_t dim) {
  const double* xi = x + i * dim;
  for (std::size_t j = 0; j < n; ++j) {
    const double* yj = y + j * dim;
    double s = 0.0;
    for (std::size_t p = 0; p < dim; ++p) {
      const double diff = xi[p] - yj[p];
      s += diff * diff;
    }
    d[i * n + j] = s;
  }
}

}  // namespace

namespace serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) row_nn(a.data(), b.data(), c.data(), i, k, n);
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) row_tn(a.data(), b.data(), c.data(), i, m, k, n);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) row_nt(a.data(), b.data(), c.data(), i, k, n);
}

void pairwise_sq_dist(std::span<const double> x, std::span<const double> y, std::span<double> d,
                      std::size_t m, std::size_t n, std::size_t dim) {
  for (std::size_t i = 0; i < m; ++i) row_dist(x.data(), y.data(), d.data(), i, n, dim);
}

}  // namespace serial

namespace parallel {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < rows; ++i)
    row_nn(a.data(), b.data(), c.data(), static_cast<std::size_t>(i), k, n);
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < rows; ++i)
    row_tn(a.data(), b.data(), c.data(), static_cast<std::size_t>(i), m, k, n);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < rows; ++i)
    row_nt(a.data(), b.data(), c.data(), static_cast<std::size_t>(i), k, n);
}

void pairwise_sq_dist(std::span<const double> x, std::span<const double> y, std::span<double> d,
                      std::size_t m, std::size_t n, std::size_t dim) {
  const auto rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < rows; ++i)
    row_dist(x.data(), y.data(), d.data(), static_cast<std::size_t>(i), n, dim);
}

}  // namespace parallel

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  if (m * k * n >= kParallelWorkThreshold) {
    parallel::gemm_nn(a, b, c, m, k, n);
  } else {
    serial::gemm_nn(a, b, c, m, k, n);
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  if (m * k * n >= kParallelWorkThreshold) {
    parallel::gemm_tn(a, b, c, m, k, n);
  } else {
    serial::gemm_tn(a, b, c, m, k, n);
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  if (m * k * n >= kParallelWorkThreshold) {
    parallel::gemm_nt(a, b, c, m, k, n);
  } else {
    serial::gemm_nt(a, b, c, m, k, n);
  }
}

void pairwise_sq_dist(std::span<const double> x, std::span<const double> y, std::span<double> d,
                      std::size_t m, std::size_t n, std::size_t dim) {
  if (m * n * dim >= kParallelWorkThreshold) {
    parallel::pairwise_sq_dist(x, y, d, m, n, dim);
  } else {
    serial::pairwise_sq_dist(x, y, d, m, n, dim);
  }
}

}  // namespace cizsl::kernels
