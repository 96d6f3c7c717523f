#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "structgen/autograd.hpp"
#include "structgen/tensor.hpp"

namespace structgen {

struct NamedTensor {
  std::string name;
  Tensor* tensor = nullptr;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor for the relative error, so entries whose true
  // gradient is ~0 are judged by absolute error instead of by noise.
  double floor = 1e-6;
  // 0 checks every entry; otherwise an evenly strided subset per tensor.
  std::size_t max_entries_per_tensor = 0;
};

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool flagged = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed() const;
};

// Builds the scalar loss on the given tape from the current parameter values.
// Must be deterministic.
using LossBuilder = std::function<ad::Var(ad::Tape&)>;

// Compares reverse-mode gradients against central finite differences for
// every tensor in `params`. Parameter values are restored on return; their
// gradient slots are left holding the analytic gradient.
GradCheckReport grad_check(const LossBuilder& build, const std::vector<NamedTensor>& params,
                           const GradCheckOptions& options = {});

double relative_error(double analytic, double numeric, double floor);

}  // namespace structgen
