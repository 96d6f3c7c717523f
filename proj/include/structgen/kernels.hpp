#pragma once

#include <cstddef>
#include <span>

namespace structgen::kernels {

// Dense products used by every matrix op in the autodiff layer.
//
//   C[m x n] = op(A) * op(B)        (accumulate == false)
//   C[m x n] += op(A) * op(B)       (accumulate == true)
//
// op(A) is m x k, stored m x k (row-major) or k x m when trans_a is set.
// op(B) is k x n, stored k x n or n x k when trans_b is set.
//
// Every output element is the sum over p = 0..k-1 taken in increasing p,
// starting from 0.0, then added to C when accumulating. Both variants
// below honour that order, so they agree bit-for-bit for any thread count.
struct GemmArgs {
  bool trans_a = false;
  bool trans_b = false;
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  bool accumulate = false;
};

// Serial textbook i-j-p loop. Kept as the ground truth for tests and
// benchmarks.
void gemm_reference(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
                    std::span<double> c);

// Row-parallel OpenMP kernel with a cache-friendly i-p-j inner order.
// Falls back to a single thread below kParallelWork multiply-adds.
void gemm_parallel(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
                   std::span<double> c);

// The kernel used by the library: gemm_parallel.
void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c);

inline constexpr std::size_t kParallelWork = std::size_t{1} << 18;

// Applies a STRUCTGEN_THREADS cap (if set and positive) to the OpenMP runtime
// and returns the resulting maximum thread count.
int configure_threads_from_env();

int max_threads();

}  // namespace structgen::kernels
