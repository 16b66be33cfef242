#include "bendr/params.hpp"

#include <bit>
#include <cstdint>

#include "bendr/errors.hpp"
#include "bendr/rng.hpp"

namespace bendr {

Param& ParamStore::add(std::string name, Tensor value) {
  if (contains(name)) throw CheckpointError("duplicate parameter name: " + name);
  Tensor grad = Tensor::zeros_like(value);
  params_.push_back(Param{std::move(name), std::move(value), std::move(grad), true});
  return params_.back();
}

std::size_t ParamStore::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return params_.size();
}

bool ParamStore::contains(const std::string& name) const { return index_of(name) < params_.size(); }

Param& ParamStore::at(const std::string& name) {
  const std::size_t i = index_of(name);
  if (i == params_.size()) throw CheckpointError("unknown parameter: " + name);
  return params_[i];
}

const Param& ParamStore::at(const std::string& name) const {
  const std::size_t i = index_of(name);
  if (i == params_.size()) throw CheckpointError("unknown parameter: " + name);
  return params_[i];
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

void ParamStore::scale_grad(double s) {
  for (auto& p : params_) p.grad *= s;
}

std::uint64_t ParamStore::fingerprint() const {
  std::uint64_t h = 0x84222325cbf29ce4ULL;
  auto feed = [&h](std::uint64_t v) { h = Rng::mix(h ^ v) + 0x9e3779b97f4a7c15ULL; };
  for (const auto& p : params_) {
    feed(fnv1a64(p.name));
    for (std::size_t d : p.value.shape()) feed(d);
    for (double v : p.value.values()) feed(std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

}  // namespace bendr
