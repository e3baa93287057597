#pragma once

// Reverse-mode differentiation over a per-step recorded graph.
//
// A Graph is an append-only list of nodes; insertion order is a topological
// order, so backward() simply walks the nodes from last to first. Gradients
// accumulate additively, which makes fan-out (a value used twice) correct
// without bookkeeping. Graphs are meant to live for one training step.

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "sftgan/tensor.hpp"

namespace sftgan::ad {

template <typename T>
class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* graph, std::size_t id) : graph_(graph), id_(id) {}

  bool valid() const { return graph_ != nullptr; }
  Graph<T>& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

template <typename T>
class Graph {
 public:
  /// Receives dL/d(node output) and accumulates into the parents' buffers.
  using BackwardFn = std::function<void(std::span<const T> grad_out)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Tensor<T> value);
  Var<T> leaf(Tensor<T> value, bool requires_grad = true);

  /// Appends an op node. The value must already be computed; it is checked for
  /// NaN/Inf here so that no op can silently propagate them. The backward
  /// closure is dropped when no parent requires a gradient.
  Var<T> record(std::string_view op, Tensor<T> value, std::initializer_list<Var<T>> parents,
                BackwardFn backward);
  Var<T> record(std::string_view op, Tensor<T> value, std::span<const Var<T>> parents,
                BackwardFn backward);

  /// Gradient accumulator of a node, zero-initialized on first access.
  std::span<T> grad_buffer(std::size_t id);

  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::string_view op_name(std::size_t id) const { return nodes_.at(id).op; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds dL/dL = 1 and propagates to every reachable node.
  /// Throws ShapeError for a non-scalar loss.
  void backward(const Var<T>& loss);

  /// Accumulated gradient of a node, zeros if nothing reached it.
  Tensor<T> grad(const Var<T>& v) const;

  /// Node ids in the order backward() visited them (for inspection).
  const std::vector<std::size_t>& backward_order() const { return backward_order_; }

 private:
  struct Node {
    Tensor<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    std::string_view op;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
  std::vector<std::size_t> backward_order_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return graph_->value(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return graph_->requires_grad(id_);
}

// ---------------------------------------------------------------------------
// Ops. Each validates shapes, computes the forward value, and records a
// backward closure.

enum class BinaryKind { add, sub, mul };

/// Elementwise a (op) b. b may broadcast onto a along any axis where b has
/// extent 1 (per-channel bias/FiLM scalars, per-pixel blend weights);
/// a never broadcasts onto b.
template <typename T>
Var<T> ew_binary(const Var<T>& a, const Var<T>& b, BinaryKind kind);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return ew_binary(a, b, BinaryKind::add);
}
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return ew_binary(a, b, BinaryKind::sub);
}
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return ew_binary(a, b, BinaryKind::mul);
}

/// scale * x + shift
template <typename T>
Var<T> affine(const Var<T>& x, T scale, T shift);

/// Cross-correlation. input NCHW, weight OC x IC x KH x KW, bias OC (or an
/// invalid Var for no bias).
template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& weight, const Var<T>& bias, std::size_t stride,
              std::size_t pad);

/// x if x >= 0 else slope * x; derivative at 0 is taken as 1.
template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope = T(0.2));

template <typename T>
Var<T> nearest_upsample(const Var<T>& x, std::size_t factor);

enum class ReduceKind { mean, sum, global_avg_pool };

/// mean/sum give a scalar; global_avg_pool maps NCHW to NC11.
template <typename T>
Var<T> reduce(const Var<T>& x, ReduceKind kind);

template <typename T>
Var<T> sum(const Var<T>& x) {
  return reduce(x, ReduceKind::sum);
}
template <typename T>
Var<T> mean(const Var<T>& x) {
  return reduce(x, ReduceKind::mean);
}
template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  return reduce(x, ReduceKind::global_avg_pool);
}

enum class ActivationKind { sigmoid, log_softmax };

/// sigmoid is evaluated in the symmetric form; log_softmax runs along axis 1
/// with max subtraction.
template <typename T>
Var<T> sigmoid_softmax(const Var<T>& x, ActivationKind kind);

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return sigmoid_softmax(x, ActivationKind::sigmoid);
}
template <typename T>
Var<T> log_softmax(const Var<T>& x) {
  return sigmoid_softmax(x, ActivationKind::log_softmax);
}

/// log(clamp(x, lo, hi)); zero gradient where the clamp is active.
template <typename T>
Var<T> log_clamped(const Var<T>& x, T lo, T hi);

/// clamp(x, lo, hi); zero gradient where the clamp is active.
template <typename T>
Var<T> clamp(const Var<T>& x, T lo, T hi);

/// out[n] = x[n, labels[n]] for x of shape N x C (trailing unit axes allowed).
template <typename T>
Var<T> pick(const Var<T>& x, std::span<const std::size_t> labels);

template <typename T>
Var<T> concat_channels(std::span<const Var<T>> parts);

template <typename T>
Var<T> slice_channels(const Var<T>& x, std::size_t begin, std::size_t count);

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape);

enum class ConvBackend { parallel, reference };

/// Selects the conv kernels used by conv2d (process-wide).
void set_conv_backend(ConvBackend backend);
ConvBackend conv_backend();

}  // namespace sftgan::ad
