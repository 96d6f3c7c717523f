#include "structgen/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <string>
#include <vector>

#include "structgen/errors.hpp"

namespace structgen::kernels {
namespace {

void check_extents(const GemmArgs& g, std::span<const double> a, std::span<const double> b,
                   std::span<double> c) {
  if (a.size() != g.m * g.k || b.size() != g.k * g.n || c.size() != g.m * g.n) {
    throw ShapeError("gemm extents m=" + std::to_string(g.m) + " n=" + std::to_string(g.n) +
                     " k=" + std::to_string(g.k) + " do not match buffers of " +
                     std::to_string(a.size()) + ", " + std::to_string(b.size()) + ", " +
                     std::to_string(c.size()));
  }
}

inline double a_at(const GemmArgs& g, const double* a, std::size_t i, std::size_t p) {
  return g.trans_a ? a[p * g.m + i] : a[i * g.k + p];
}

inline double b_at(const GemmArgs& g, const double* b, std::size_t p, std::size_t j) {
  return g.trans_b ? b[j * g.k + p] : b[p * g.n + j];
}

}  // namespace

void gemm_reference(const GemmArgs& g, std::span<const double> a, std::span<const double> b,
                    std::span<double> c) {
  check_extents(g, a, b, c);
  for (std::size_t i = 0; i < g.m; ++i) {
    for (std::size_t j = 0; j < g.n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < g.k; ++p) s += a_at(g, a.data(), i, p) * b_at(g, b.data(), p, j);
      double& out = c[i * g.n + j];
      out = g.accumulate ? out + s : s;
    }
  }
}

void gemm_parallel(const GemmArgs& g, std::span<const double> a, std::span<const double> b,
                   std::span<double> c) {
  check_extents(g, a, b, c);
  const std::size_t work = g.m * g.n * g.k;
  const double* ap = a.data();
  const double* bp = b.data();
  double* cp = c.data();
  const auto m = static_cast<std::ptrdiff_t>(g.m);

  if (g.trans_b) {
    // B rows are contiguous along p: one dot product per output element.
#pragma omp parallel for schedule(static) if (work >= kParallelWork)
    for (std::ptrdiff_t ii = 0; ii < m; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      for (std::size_t j = 0; j < g.n; ++j) {
        const double* brow = bp + j * g.k;
        double s = 0.0;
        if (g.trans_a) {
          for (std::size_t p = 0; p < g.k; ++p) s += ap[p * g.m + i] * brow[p];
        } else {
          const double* arow = ap + i * g.k;
          for (std::size_t p = 0; p < g.k; ++p) s += arow[p] * brow[p];
        }
        double& out = cp[i * g.n + j];
        out = g.accumulate ? out + s : s;
      }
    }
    return;
  }

#pragma omp parallel if (work >= kParallelWork)
  {
    std::vector<double> row(g.n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < m; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      std::fill(row.begin(), row.end(), 0.0);
      for (std::size_t p = 0; p < g.k; ++p) {
        const double aip = g.trans_a ? ap[p * g.m + i] : ap[i * g.k + p];
        const double* brow = bp + p * g.n;
#pragma omp simd
        for (std::size_t j = 0; j < g.n; ++j) row[j] += aip * brow[j];
      }
      double* crow = cp + i * g.n;
      if (g.accumulate) {
        for (std::size_t j = 0; j < g.n; ++j) crow[j] += row[j];
      } else {
        for (std::size_t j = 0; j < g.n; ++j) crow[j] = row[j];
      }
    }
  }
}

void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c) {
  gemm_parallel(args, a, b, c);
}

int configure_threads_from_env() {
  if (const char* env = std::getenv("STRUCTGEN_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && n > 0) omp_set_num_threads(static_cast<int>(n));
  }
  return omp_get_max_threads();
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace structgen::kernels
