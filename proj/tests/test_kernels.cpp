#include <vector>

#include "cizsl/kernels.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cizsl;

namespace {

std::vector<double> random_values(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

// Textbook triple loop, independent of the kernel code.
double naive_nn(const std::vector<double>& a, const std::vector<double>& b, std::size_t i, std::size_t j,
                std::size_t k, std::size_t n) {
  double s = 0.0;
  for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
  return s;
}

}  // namespace

TEST_CASE("serial gemm variants match a naive triple loop") {
  Rng rng(1);
  const std::size_t m = 7, k = 5, n = 9;
  auto a = random_values(rng, m * k);
  auto b = random_values(rng, k * n);
  std::vector<double> c(m * n);
  kernels::serial::gemm_nn(a, b, c, m, k, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) CHECK(c[i * n + j] == doctest::Approx(naive_nn(a, b, i, j, k, n)).epsilon(1e-14));

  // A^T B with A stored k x m: transpose a into that layout.
  std::vector<double> at(k * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) at[p * m + i] = a[i * k + p];
  std::vector<double> c_tn(m * n);
  kernels::serial::gemm_tn(at, b, c_tn, m, k, n);
  // A B^T with B stored n x k.
  std::vector<double> bt(n * k);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  std::vector<double> c_nt(m * n);
  kernels::serial::gemm_nt(a, bt, c_nt, m, k, n);
  for (std::size_t i = 0; i < m * n; ++i) {
    CHECK(c_tn[i] == doctest::Approx(c[i]).epsilon(1e-14));
    CHECK(c_nt[i] == doctest::Approx(c[i]).epsilon(1e-14));
  }
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  Rng rng(2);
  const std::size_t m = 130, k = 70, n = 90;
  auto a = random_values(rng, m * k);
  auto b = random_values(rng, k * n);
  auto at = random_values(rng, k * m);
  auto bt = random_values(rng, n * k);
  std::vector<double> s(m * n), p(m * n);

  kernels::serial::gemm_nn(a, b, s, m, k, n);
  kernels::parallel::gemm_nn(a, b, p, m, k, n);
  CHECK(s == p);
  kernels::serial::gemm_tn(at, b, s, m, k, n);
  kernels::parallel::gemm_tn(at, b, p, m, k, n);
  CHECK(s == p);
  kernels::serial::gemm_nt(a, bt, s, m, k, n);
  kernels::parallel::gemm_nt(a, bt, p, m, k, n);
  CHECK(s == p);

  auto x = random_values(rng, m * k);
  auto y = random_values(rng, n * k);
  kernels::serial::pairwise_sq_dist(x, y, s, m, n, k);
  kernels::parallel::pairwise_sq_dist(x, y, p, m, n, k);
  CHECK(s == p);
  kernels::pairwise_sq_dist(x, y, p, m, n, k);
  CHECK(s == p);
}

TEST_CASE("pairwise squared distances") {
  const std::vector<double> x{0, 0, 1, 1};
  const std::vector<double> y{3, 4, 1, 1, 0, 0};
  std::vector<double> d(6);
  kernels::serial::pairwise_sq_dist(x, y, d, 2, 3, 2);
  CHECK(d == std::vector<double>{25, 2, 0, 13, 0, 2});
}
