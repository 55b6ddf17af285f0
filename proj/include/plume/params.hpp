#pragma once

#include <map>
#include <string>

#include "plume/errors.hpp"
#include "plume/tensor.hpp"

namespace plume {

// Named trainable tensors. std::map keys give a deterministic iteration
// order, which the optimizer, checkpointing and checksums all rely on.
template <typename T>
class ParameterSet {
 public:
  using Map = std::map<std::string, Tensor<T>>;

  void add(const std::string& name, Tensor<T> tensor) {
    if (items_.count(name)) throw ContractError("duplicate parameter: " + name);
    tensor.set_requires_grad(true);
    items_.emplace(name, std::move(tensor));
  }

  bool contains(const std::string& name) const { return items_.count(name) != 0; }

  const Tensor<T>& at(const std::string& name) const {
    auto it = items_.find(name);
    if (it == items_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
  }

  Tensor<T>& at(const std::string& name) {
    auto it = items_.find(name);
    if (it == items_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
  }

  std::size_t size() const { return items_.size(); }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items_) n += t.numel();
    return n;
  }

  void zero_grad() {
    for (auto& [name, t] : items_) t.zero_grad();
  }

  // Copy with fresh leaves (no shared nodes); used by finite-difference
  // oracles and by checkpoint round-trips.
  ParameterSet clone(bool requires_grad = true) const {
    ParameterSet out;
    for (const auto& [name, t] : items_) {
      Tensor<T> c = t.detached_clone(false);
      if (requires_grad) c.set_requires_grad(true);
      out.items_.emplace(name, std::move(c));
    }
    return out;
  }

  typename Map::const_iterator begin() const { return items_.begin(); }
  typename Map::const_iterator end() const { return items_.end(); }
  typename Map::iterator begin() { return items_.begin(); }
  typename Map::iterator end() { return items_.end(); }

 private:
  Map items_;
};

}  // namespace plume
