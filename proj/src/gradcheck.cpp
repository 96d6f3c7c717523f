#include "structgen/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace structgen {

bool GradCheckReport::passed() const {
  return std::none_of(entries.begin(), entries.end(), [](const auto& e) { return e.flagged; });
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double evaluate(const LossBuilder& build) {
  ad::Tape tape(ad::Tape::Mode::kNoGrad);
  return build(tape).item();
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& build, const std::vector<NamedTensor>& params,
                           const GradCheckOptions& options) {
  for (const auto& p : params) {
    p.tensor->ensure_grad();
    p.tensor->zero_grad();
  }
  {
    ad::Tape tape;
    tape.backward(build(tape));
  }

  GradCheckReport report;
  for (const auto& p : params) {
    Tensor& t = *p.tensor;
    GradCheckEntry entry{.name = p.name};
    const std::size_t n = t.size();
    const std::size_t stride =
        (options.max_entries_per_tensor == 0 || n <= options.max_entries_per_tensor)
            ? 1
            : (n + options.max_entries_per_tensor - 1) / options.max_entries_per_tensor;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = t[i];
      t[i] = saved + options.step;
      const double up = evaluate(build);
      t[i] = saved - options.step;
      const double down = evaluate(build);
      t[i] = saved;

      const double numeric = (up - down) / (2.0 * options.step);
      const double analytic = t.grad()[i];
      const double err = relative_error(analytic, numeric, options.floor);
      ++entry.checked;
      if (err > entry.max_rel_error || entry.checked == 1) {
        entry.max_rel_error = err;
        entry.worst_index = i;
        entry.worst_analytic = analytic;
        entry.worst_numeric = numeric;
      }
    }
    entry.flagged = !(entry.max_rel_error <= options.tolerance);
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace structgen
