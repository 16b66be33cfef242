#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bendr/tensor.hpp"

namespace bendr {

// A scalar-valued function of several tensors. When `grads` is non-null the
// closure must fill it with one analytic gradient per input.
using GradClosure =
    std::function<double(const std::vector<Tensor>& inputs, std::vector<Tensor>* grads)>;

struct GradCheckEntry {
  std::size_t input = 0;
  double max_abs_error = 0.0;
  // ‖analytic − numeric‖∞ / max(‖analytic‖∞, ‖numeric‖∞); zero when both vanish.
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  double max_rel_error() const;
  double max_abs_error() const;
  bool passed() const { return max_rel_error() <= tolerance; }
};

// Central finite differences against the closure's analytic gradients.
// Throws NumericsError if the closure produces a non-finite value.
GradCheckReport grad_check(const GradClosure& f, std::vector<Tensor> inputs, double step,
                           double tolerance);

}  // namespace bendr
