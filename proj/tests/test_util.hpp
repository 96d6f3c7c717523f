#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "structgen/random.hpp"
#include "structgen/tensor.hpp"

namespace testutil {

inline structgen::Tensor random_tensor(structgen::Shape shape, structgen::Rng& rng, double lo = -1.0,
                                       double hi = 1.0) {
  structgen::Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline std::vector<double> random_vector(std::size_t n, structgen::Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Plain-double helpers for hand-written oracles.
inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline std::vector<double> matvec(const structgen::Tensor& W, const std::vector<double>& x) {
  std::vector<double> y(W.rows(), 0.0);
  for (std::size_t i = 0; i < W.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < W.cols(); ++j) s += W.at(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

inline std::vector<double> cat(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace testutil
