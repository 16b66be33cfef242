#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bendr/tensor.hpp"

namespace bendr {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

// Ordered, name-addressable parameter collection. Order is insertion order and
// is what checkpoints and optimizers iterate over.
class ParamStore {
 public:
  Param& add(std::string name, Tensor value);

  bool contains(const std::string& name) const;
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  Tensor& value(const std::string& name) { return at(name).value; }
  const Tensor& value(const std::string& name) const { return at(name).value; }
  Tensor& grad(const std::string& name) { return at(name).grad; }

  std::vector<Param>& items() { return params_; }
  const std::vector<Param>& items() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  void scale_grad(double s);

  // Hash over names, shapes and exact bit patterns of every value.
  std::uint64_t fingerprint() const;

 private:
  std::size_t index_of(const std::string& name) const;
  std::vector<Param> params_;
};

}  // namespace bendr
