#include "sftgan/parameters.hpp"

#include <cstring>

namespace sftgan {

template <typename T>
ParameterSet<T>::ParameterSet(const ParameterSet& other) {
  params_.reserve(other.params_.size());
  for (const auto& p : other.params_) params_.push_back({p.name, p.value.clone(), p.trainable});
}

template <typename T>
ParameterSet<T>& ParameterSet<T>::operator=(const ParameterSet& other) {
  if (this != &other) {
    ParameterSet copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <typename T>
ParamId ParameterSet<T>::add(std::string name, Tensor<T> value, bool trainable) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  params_.push_back({std::move(name), std::move(value), trainable});
  return params_.size() - 1;
}

template <typename T>
std::optional<ParamId> ParameterSet<T>::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return std::nullopt;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (!trainable_only || p.trainable) n += p.value.numel();
  }
  return n;
}

template <typename T>
std::uint64_t ParameterSet<T>::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : params_) {
    feed(p.name.data(), p.name.size());
    for (auto d : p.value.shape().dims()) feed(&d, sizeof d);
    feed(p.value.data().data(), p.value.numel() * sizeof(T));
  }
  return h;
}

template <typename T>
Binding<T>::Binding(ad::Graph<T>& graph, const ParameterSet<T>& params, bool track_grads)
    : graph_(graph), params_(params), track_grads_(track_grads), bound_(params.size()) {}

template <typename T>
Binding<T>::Binding(ad::Graph<T>& graph, const ParameterSet<T>& params,
                    std::span<const ad::Var<T>> vars)
    : graph_(graph), params_(params), track_grads_(true), bound_(params.size()) {
  if (vars.size() != params.size()) {
    throw std::invalid_argument("Binding: " + std::to_string(vars.size()) + " nodes for " +
                                std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i].shape() != params[i].value.shape()) {
      throw ShapeError("Binding: node for " + params[i].name + " has shape " +
                       vars[i].shape().str() + ", expected " + params[i].value.shape().str());
    }
    bound_[i] = vars[i];
  }
}

template <typename T>
ad::Var<T> Binding<T>::operator()(ParamId id) {
  auto& slot = bound_.at(id);
  if (!slot) {
    const auto& p = params_[id];
    slot = graph_.leaf(p.value, track_grads_ && p.trainable);
  }
  return *slot;
}

template <typename T>
std::vector<Tensor<T>> Binding<T>::gradients() const {
  std::vector<Tensor<T>> out;
  out.reserve(bound_.size());
  for (std::size_t i = 0; i < bound_.size(); ++i) {
    if (bound_[i]) {
      out.push_back(graph_.grad(*bound_[i]));
    } else {
      out.push_back(Tensor<T>(params_[i].value.shape()));
    }
  }
  return out;
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class Binding<float>;
template class Binding<double>;

}  // namespace sftgan
