#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sftgan/autodiff.hpp"

namespace sftgan {

using ParamId = std::size_t;

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  bool trainable = true;
};

/// Ordered, named parameter storage. Copies are deep.
template <typename T>
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet& other);
  ParameterSet& operator=(const ParameterSet& other);
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;

  ParamId add(std::string name, Tensor<T> value, bool trainable = true);

  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](ParamId id) { return params_.at(id); }
  const Parameter<T>& operator[](ParamId id) const { return params_.at(id); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::optional<ParamId> find(const std::string& name) const;

  /// Total scalar count over all (or only trainable) parameters.
  std::size_t scalar_count(bool trainable_only = false) const;

  /// FNV-1a over names, shapes and raw bytes of every value.
  std::uint64_t checksum() const;

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<U>(), p.trainable);
    return out;
  }

 private:
  std::vector<Parameter<T>> params_;
};

/// Binds a ParameterSet into one Graph. Leaves are created on first use, so
/// parameters a forward pass never touches stay out of the graph.
template <typename T>
class Binding {
 public:
  /// With track_grads false every parameter is a constant (frozen in place).
  Binding(ad::Graph<T>& graph, const ParameterSet<T>& params, bool track_grads = true);

  /// Uses caller-provided nodes, one per parameter (e.g. the leaves of a
  /// finite-difference check).
  Binding(ad::Graph<T>& graph, const ParameterSet<T>& params, std::span<const ad::Var<T>> vars);

  ad::Var<T> operator()(ParamId id);
  ad::Graph<T>& graph() { return graph_; }
  const ParameterSet<T>& params() const { return params_; }

  /// One gradient per parameter (zeros for untouched or frozen ones).
  std::vector<Tensor<T>> gradients() const;

 private:
  ad::Graph<T>& graph_;
  const ParameterSet<T>& params_;
  bool track_grads_;
  std::vector<std::optional<ad::Var<T>>> bound_;
};

}  // namespace sftgan
