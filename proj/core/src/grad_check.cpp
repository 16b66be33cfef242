#include "bendr/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "bendr/errors.hpp"

namespace bendr {

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

double GradCheckReport::max_abs_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_abs_error);
  return m;
}

namespace {

double evaluate(const GradClosure& f, const std::vector<Tensor>& inputs) {
  const double v = f(inputs, nullptr);
  if (!std::isfinite(v)) throw NumericsError("grad_check: closure returned a non-finite value");
  return v;
}

}  // namespace

GradCheckReport grad_check(const GradClosure& f, std::vector<Tensor> inputs, double step,
                           double tolerance) {
  GradCheckReport report;
  report.tolerance = tolerance;
  if (inputs.empty()) return report;

  std::vector<Tensor> analytic;
  const double base = f(inputs, &analytic);
  if (!std::isfinite(base)) throw NumericsError("grad_check: closure returned a non-finite value");
  if (analytic.size() != inputs.size()) {
    throw ShapeError("grad_check: closure returned " + std::to_string(analytic.size()) +
                     " gradients for " + std::to_string(inputs.size()) + " inputs");
  }

  for (std::size_t n = 0; n < inputs.size(); ++n) {
    require_shape(analytic[n], inputs[n].shape(), "grad_check analytic gradient");
    double max_abs = 0.0, norm_a = 0.0, norm_n = 0.0;
    for (std::size_t i = 0; i < inputs[n].size(); ++i) {
      const double saved = inputs[n][i];
      inputs[n][i] = saved + step;
      const double plus = evaluate(f, inputs);
      inputs[n][i] = saved - step;
      const double minus = evaluate(f, inputs);
      inputs[n][i] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[n][i];
      if (!std::isfinite(a)) throw NumericsError("grad_check: non-finite analytic gradient");
      max_abs = std::max(max_abs, std::abs(a - numeric));
      norm_a = std::max(norm_a, std::abs(a));
      norm_n = std::max(norm_n, std::abs(numeric));
    }
    const double denom = std::max(norm_a, norm_n);
    report.entries.push_back({n, max_abs, denom > 0.0 ? max_abs / denom : 0.0});
  }
  return report;
}

}  // namespace bendr
