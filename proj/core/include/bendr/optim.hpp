#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "bendr/params.hpp"

namespace bendr {

struct OptimSpec {
  double lr = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

void to_json(nlohmann::json& j, const OptimSpec& s);
void from_json(const nlohmann::json& j, OptimSpec& s);

struct AdamMoments {
  Tensor m;
  Tensor v;
  std::size_t steps = 0;
};

struct AdamState {
  std::vector<AdamMoments> moments;  // aligned with ParamStore::items()
  double lr = 0.0;

  static AdamState fresh(const ParamStore& params, const OptimSpec& spec);
};

// Decoupled weight decay (p ← p − lr·wd·p) followed by a bias-corrected Adam
// update at `state.lr`. Frozen parameters and their moments are untouched.
// Throws NumericsError, leaving everything unchanged, if any trainable
// gradient is non-finite.
void adam_step(ParamStore& params, AdamState& state, const OptimSpec& spec);

}  // namespace bendr
