#pragma once

// Dense row-major kernels. Each operation has a serial reference in
// cizsl::kernels::serial and an OpenMP version in cizsl::kernels::parallel.
// The parallel versions split work over output rows only, so every output
// element is accumulated in the same order as the serial reference and the
// two agree bit for bit.

#include <cstddef>
#include <span>

namespace cizsl::kernels {

// C (m x n) = A (m x k) * B (k x n)
// C (m x n) = A^T * B with A stored (k x m)
// C (m x n) = A * B^T with B stored (n x k)
// D (m x n) squared Euclidean distances between rows of X (m x d) and Y (n x d)

namespace serial {
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void pairwise_sq_dist(std::span<const double> x, std::span<const double> y, std::span<double> d,
                      std::size_t m, std::size_t n, std::size_t dim);
}  // namespace serial

namespace parallel {
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void pairwise_sq_dist(std::span<const double> x, std::span<const double> y, std::span<double> d,
                      std::size_t m, std::size_t n, std::size_t dim);
}  // namespace parallel

// Dispatch used by the rest of the library: parallel above a work
// threshold, serial below it (thread start-up dominates tiny products).
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void pairwise_sq_dist(std::span<const double> x, std::span<const double> y, std::span<double> d,
                      std::size_t m, std::size_t n, std::size_t dim);

/// Multiply-add count above which dispatch goes parallel.
inline constexpr std::size_t kParallelWorkThreshold = std::size_t{1} << 18;

}  // namespace cizsl::kernels
