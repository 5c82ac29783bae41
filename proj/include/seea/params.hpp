#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "seea/tensor.hpp"

namespace seea {

template <typename T>
struct ParamEntry {
  std::string name;
  Tensor<T> tensor;
  bool trainable = true;
};

struct ParamCounts {
  long long total = 0;
  long long trainable = 0;
  long long non_trainable = 0;
};

/// Named, ordered collection of weight tensors. Registration order is the
/// forward-pass order and is the layout order of checkpoints.
template <typename T>
class ParameterStore {
public:
  size_t add(std::string name, Tensor<T> tensor, bool trainable) {
    if (index_.count(name)) {
      throw ConfigError({"duplicate parameter name: " + name});
    }
    index_.emplace(name, entries_.size());
    entries_.push_back({std::move(name), std::move(tensor), trainable});
    return entries_.size() - 1;
  }

  size_t size() const { return entries_.size(); }
  ParamEntry<T>& operator[](size_t i) { return entries_[i]; }
  const ParamEntry<T>& operator[](size_t i) const { return entries_[i]; }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw ValueError("unknown parameter: " + name);
    }
    return it->second;
  }

  Tensor<T>& tensor(const std::string& name) { return entries_[index_of(name)].tensor; }
  const Tensor<T>& tensor(const std::string& name) const {
    return entries_[index_of(name)].tensor;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

private:
  std::vector<ParamEntry<T>> entries_;
  std::unordered_map<std::string, size_t> index_;
};

template <typename T>
ParamCounts count_parameters(const ParameterStore<T>& store) {
  ParamCounts c;
  for (const auto& e : store) {
    const long long n = static_cast<long long>(e.tensor.size());
    c.total += n;
    (e.trainable ? c.trainable : c.non_trainable) += n;
  }
  return c;
}

}  // namespace seea
