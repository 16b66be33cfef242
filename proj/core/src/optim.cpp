#include "bendr/optim.hpp"

#include <cmath>

#include "bendr/errors.hpp"

namespace bendr {

void OptimSpec::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

void to_json(nlohmann::json& j, const OptimSpec& s) {
  j = nlohmann::json{{"lr", s.lr}, {"weight_decay", s.weight_decay}, {"beta1", s.beta1},
                     {"beta2", s.beta2}, {"eps", s.eps}};
}

void from_json(const nlohmann::json& j, OptimSpec& s) {
  OptimSpec d;
  s.lr = j.value("lr", d.lr);
  s.weight_decay = j.value("weight_decay", d.weight_decay);
  s.beta1 = j.value("beta1", d.beta1);
  s.beta2 = j.value("beta2", d.beta2);
  s.eps = j.value("eps", d.eps);
}

AdamState AdamState::fresh(const ParamStore& params, const OptimSpec& spec) {
  AdamState st;
  st.lr = spec.lr;
  for (const auto& p : params.items()) {
    st.moments.push_back({Tensor::zeros_like(p.value), Tensor::zeros_like(p.value), 0});
  }
  return st;
}

void adam_step(ParamStore& params, AdamState& state, const OptimSpec& spec) {
  auto& items = params.items();
  if (state.moments.size() != items.size()) throw ShapeError("Adam state does not match parameters");
  for (const auto& p : items) {
    if (p.trainable && !all_finite(p.grad.span())) {
      throw NumericsError("non-finite gradient for " + p.name);
    }
  }
  const double lr = state.lr;
  for (std::size_t n = 0; n < items.size(); ++n) {
    Param& p = items[n];
    if (!p.trainable) continue;
    AdamMoments& mo = state.moments[n];
    ++mo.steps;
    const double bc1 = 1.0 - std::pow(spec.beta1, static_cast<double>(mo.steps));
    const double bc2 = 1.0 - std::pow(spec.beta2, static_cast<double>(mo.steps));
    const double decay = 1.0 - lr * spec.weight_decay;
    double* w = p.value.data();
    const double* g = p.grad.data();
    double* m = mo.m.data();
    double* v = mo.v.data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      w[i] *= decay;
      m[i] = spec.beta1 * m[i] + (1.0 - spec.beta1) * g[i];
      v[i] = spec.beta2 * v[i] + (1.0 - spec.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + spec.eps);
    }
  }
}

}  // namespace bendr
