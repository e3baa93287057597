#include "sftgan/autodiff.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <string>

#include "sftgan/kernels.hpp"

namespace sftgan::ad {

namespace {

std::atomic<ConvBackend> g_conv_backend{ConvBackend::parallel};

constexpr std::size_t kParallelThreshold = 1 << 15;

}  // namespace

void set_conv_backend(ConvBackend backend) { g_conv_backend.store(backend); }
ConvBackend conv_backend() { return g_conv_backend.load(); }

// ---------------------------------------------------------------------------
// Graph

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  return leaf(std::move(value), false);
}

template <typename T>
Var<T> Graph<T>::leaf(Tensor<T> value, bool requires_grad) {
  if (!all_finite(value.data())) {
    throw NumericError("leaf tensor " + value.shape().str() + " contains non-finite values");
  }
  nodes_.push_back(Node{std::move(value), {}, requires_grad, "leaf", {}});
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::record(std::string_view op, Tensor<T> value,
                        std::initializer_list<Var<T>> parents, BackwardFn backward) {
  return record(op, std::move(value), std::span<const Var<T>>(parents.begin(), parents.size()),
                std::move(backward));
}

template <typename T>
Var<T> Graph<T>::record(std::string_view op, Tensor<T> value, std::span<const Var<T>> parents,
                        BackwardFn backward) {
  if (!all_finite(value.data())) {
    throw NumericError(std::string(op) + " produced non-finite values (output " +
                       value.shape().str() + ")");
  }
  bool needs = false;
  for (const auto& p : parents) {
    if (&p.graph() != this) throw std::logic_error(std::string(op) + ": parent from another graph");
    needs = needs || nodes_.at(p.id()).requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, op, needs ? std::move(backward) : BackwardFn{}});
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
std::span<T> Graph<T>::grad_buffer(std::size_t id) {
  Node& node = nodes_.at(id);
  if (node.grad.empty()) node.grad.assign(node.value.numel(), T(0));
  return node.grad;
}

template <typename T>
void Graph<T>::backward(const Var<T>& loss) {
  if (&loss.graph() != this) throw std::logic_error("backward: loss belongs to another graph");
  if (loss.value().numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + loss.shape().str());
  }
  backward_order_.clear();
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss.id())[0] += T(1);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.grad.empty() || !node.requires_grad) continue;
    backward_order_.push_back(id);
    if (node.backward) node.backward(node.grad);
  }
}

template <typename T>
Tensor<T> Graph<T>::grad(const Var<T>& v) const {
  const Node& node = nodes_.at(v.id());
  if (node.grad.empty()) return Tensor<T>(node.value.shape());
  return Tensor<T>(node.value.shape(), node.grad);
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

// Maps flat indices of `a` onto a broadcast `b` (rank <= 4, b extents 1 or equal).
struct Broadcast {
  std::array<std::size_t, 4> dims{1, 1, 1, 1};
  std::array<std::size_t, 4> b_strides{0, 0, 0, 0};
  bool same = true;

  template <typename F>
  void for_each(F&& f) const {
    std::size_t ai = 0;
    for (std::size_t i0 = 0; i0 < dims[0]; ++i0)
      for (std::size_t i1 = 0; i1 < dims[1]; ++i1)
        for (std::size_t i2 = 0; i2 < dims[2]; ++i2) {
          std::size_t bi = i0 * b_strides[0] + i1 * b_strides[1] + i2 * b_strides[2];
          for (std::size_t i3 = 0; i3 < dims[3]; ++i3, ++ai, bi += b_strides[3]) f(ai, bi);
        }
  }
};

Broadcast make_broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast bc;
  if (a == b) return bc;
  bc.same = false;
  auto fail = [&]() {
    return ShapeError(std::string(op) + ": incompatible shapes " + a.str() + " and " + b.str());
  };
  if (a.rank() != b.rank() || a.rank() > 4 || a.rank() == 0) throw fail();
  const std::size_t off = 4 - a.rank();
  std::array<std::size_t, 4> bd{1, 1, 1, 1};
  for (std::size_t i = 0; i < a.rank(); ++i) {
    if (b[i] != a[i] && b[i] != 1) throw fail();
    bc.dims[off + i] = a[i];
    bd[off + i] = b[i];
  }
  std::size_t stride = 1;
  for (std::size_t i = 4; i-- > 0;) {
    bc.b_strides[i] = bd[i] == 1 ? 0 : stride;
    stride *= bd[i];
  }
  return bc;
}

const char* binary_name(BinaryKind kind) {
  switch (kind) {
    case BinaryKind::add: return "add";
    case BinaryKind::sub: return "sub";
    case BinaryKind::mul: return "mul";
  }
  return "binary";
}

}  // namespace

template <typename T>
Var<T> ew_binary(const Var<T>& a, const Var<T>& b, BinaryKind kind) {
  const char* name = binary_name(kind);
  const Broadcast bc = make_broadcast(a.shape(), b.shape(), name);
  const Tensor<T> av = a.value(), bv = b.value();
  Tensor<T> out(a.shape());
  auto o = out.mutable_data();
  auto x = av.data();
  auto y = bv.data();
  const std::size_t n = o.size();
  if (bc.same) {
    switch (kind) {
      case BinaryKind::add:
#pragma omp parallel for if (n > kParallelThreshold)
        for (std::size_t i = 0; i < n; ++i) o[i] = x[i] + y[i];
        break;
      case BinaryKind::sub:
#pragma omp parallel for if (n > kParallelThreshold)
        for (std::size_t i = 0; i < n; ++i) o[i] = x[i] - y[i];
        break;
      case BinaryKind::mul:
#pragma omp parallel for if (n > kParallelThreshold)
        for (std::size_t i = 0; i < n; ++i) o[i] = x[i] * y[i];
        break;
    }
  } else {
    switch (kind) {
      case BinaryKind::add: bc.for_each([&](std::size_t i, std::size_t j) { o[i] = x[i] + y[j]; }); break;
      case BinaryKind::sub: bc.for_each([&](std::size_t i, std::size_t j) { o[i] = x[i] - y[j]; }); break;
      case BinaryKind::mul: bc.for_each([&](std::size_t i, std::size_t j) { o[i] = x[i] * y[j]; }); break;
    }
  }
  Graph<T>* g = &a.graph();
  const std::size_t ia = a.id(), ib = b.id();
  return g->record(name, std::move(out), {a, b}, [g, ia, ib, av, bv, bc, kind](std::span<const T> go) {
    if (g->requires_grad(ia)) {
      auto ga = g->grad_buffer(ia);
      const std::size_t n = ga.size();
      if (kind == BinaryKind::mul) {
        auto y = bv.data();
        if (bc.same) {
          for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * y[i];
        } else {
          bc.for_each([&](std::size_t i, std::size_t j) { ga[i] += go[i] * y[j]; });
        }
      } else {
        for (std::size_t i = 0; i < n; ++i) ga[i] += go[i];
      }
    }
    if (g->requires_grad(ib)) {
      auto gb = g->grad_buffer(ib);
      const T sign = kind == BinaryKind::sub ? T(-1) : T(1);
      auto x = av.data();
      if (bc.same) {
        const std::size_t n = gb.size();
        if (kind == BinaryKind::mul) {
          for (std::size_t i = 0; i < n; ++i) gb[i] += go[i] * x[i];
        } else {
          for (std::size_t i = 0; i < n; ++i) gb[i] += sign * go[i];
        }
      } else if (kind == BinaryKind::mul) {
        bc.for_each([&](std::size_t i, std::size_t j) { gb[j] += go[i] * x[i]; });
      } else {
        bc.for_each([&](std::size_t i, std::size_t j) { gb[j] += sign * go[i]; });
      }
    }
  });
}

template <typename T>
Var<T> affine(const Var<T>& x, T scale, T shift) {
  Tensor<T> out(x.shape());
  auto o = out.mutable_data();
  auto in = x.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = scale * in[i] + shift;
  Graph<T>* g = &x.graph();
  const std::size_t ix = x.id();
  return g->record("affine", std::move(out), {x}, [g, ix, scale](std::span<const T> go) {
    auto gx = g->grad_buffer(ix);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += scale * go[i];
  });
}

// ---------------------------------------------------------------------------
// Convolution

template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& weight, const Var<T>& bias, std::size_t stride,
              std::size_t pad) {
  const Nchw in = as_nchw(input.shape(), "conv2d input");
  const Nchw w = as_nchw(weight.shape(), "conv2d weight");
  if (in.c != w.c) {
    throw ShapeError("conv2d: input has " + std::to_string(in.c) + " channels but weight " +
                     weight.shape().str() + " expects " + std::to_string(w.c));
  }
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (bias.valid() && bias.shape() != Shape{w.n}) {
    throw ShapeError("conv2d: bias " + bias.shape().str() + " does not match " +
                     std::to_string(w.n) + " output channels");
  }
  kernels::ConvGeometry geo;
  geo.batch = in.n;
  geo.in_channels = in.c;
  geo.in_h = in.h;
  geo.in_w = in.w;
  geo.out_channels = w.n;
  geo.kernel_h = w.h;
  geo.kernel_w = w.w;
  geo.stride = stride;
  geo.pad = pad;
  if (geo.out_h() == 0 || geo.out_w() == 0) {
    throw ShapeError("conv2d: non-positive output extent for input " + input.shape().str() +
                     ", kernel " + weight.shape().str() + ", stride " + std::to_string(stride) +
                     ", pad " + std::to_string(pad));
  }
  const Tensor<T> xv = input.value(), wv = weight.value();
  const Tensor<T> bv = bias.valid() ? bias.value() : Tensor<T>();
  Tensor<T> out(Shape{in.n, w.n, geo.out_h(), geo.out_w()});
  const bool reference = conv_backend() == ConvBackend::reference;
  if (reference) {
    kernels::reference::conv2d_forward<T>(geo, xv.data(), wv.data(), bv.data(), out.mutable_data());
  } else {
    kernels::parallel::conv2d_forward<T>(geo, xv.data(), wv.data(), bv.data(), out.mutable_data());
  }
  Graph<T>* g = &input.graph();
  const std::size_t ix = input.id(), iw = weight.id();
  const bool has_bias = bias.valid();
  const std::size_t ib = has_bias ? bias.id() : 0;
  auto fn = [g, ix, iw, ib, has_bias, geo, xv, wv, reference](std::span<const T> go) {
    if (g->requires_grad(ix)) {
      if (reference) {
        kernels::reference::conv2d_backward_input<T>(geo, wv.data(), go, g->grad_buffer(ix));
      } else {
        kernels::parallel::conv2d_backward_input<T>(geo, wv.data(), go, g->grad_buffer(ix));
      }
    }
    const bool need_b = has_bias && g->requires_grad(ib);
    if (g->requires_grad(iw) || need_b) {
      std::vector<T> scratch_w, scratch_b;
      std::span<T> gw, gb;
      if (g->requires_grad(iw)) {
        gw = g->grad_buffer(iw);
      } else {
        scratch_w.assign(geo.weight_size(), T(0));
        gw = scratch_w;
      }
      if (need_b) gb = g->grad_buffer(ib);
      if (reference) {
        kernels::reference::conv2d_backward_params<T>(geo, xv.data(), go, gw, gb);
      } else {
        kernels::parallel::conv2d_backward_params<T>(geo, xv.data(), go, gw, gb);
      }
    }
  };
  if (has_bias) return g->record("conv2d", std::move(out), {input, weight, bias}, fn);
  return g->record("conv2d", std::move(out), {input, weight}, fn);
}

// ---------------------------------------------------------------------------
// Activations and resampling

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  if (!(slope >= T(0) && slope < T(1))) throw std::invalid_argument("leaky_relu: slope must be in [0,1)");
  const Tensor<T> xv = x.value();
  Tensor<T> out(x.shape());
  auto o = out.mutable_data();
  auto in = xv.data();
  const std::size_t n = o.size();
#pragma omp parallel for if (n > kParallelThreshold)
  for (std::size_t i = 0; i < n; ++i) o[i] = in[i] >= T(0) ? in[i] : slope * in[i];
  Graph<T>* g = &x.graph();
  const std::size_t ix = x.id();
  return g->record("leaky_relu", std::move(out), {x}, [g, ix, xv, slope](std::span<const T> go) {
    auto gx = g->grad_buffer(ix);
    auto in = xv.data();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += in[i] >= T(0) ? go[i] : slope * go[i];
  });
}

template <typename T>
Var<T> nearest_upsample(const Var<T>& x, std::size_t factor) {
  if (factor < 1) throw std::invalid_argument("nearest_upsample: factor must be >= 1");
  const Nchw s = as_nchw(x.shape(), "nearest_upsample");
  const std::size_t oh = s.h * factor, ow = s.w * factor;
  Tensor<T> out(Shape{s.n, s.c, oh, ow});
  auto o = out.mutable_data();
  auto in = x.value().data();
  const std::size_t planes = s.n * s.c;
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < oh; ++y) {
      const T* src = in.data() + (p * s.h + y / factor) * s.w;
      T* dst = o.data() + (p * oh + y) * ow;
      for (std::size_t xx = 0; xx < ow; ++xx) dst[xx] = src[xx / factor];
    }
  }
  Graph<T>* g = &x.graph();
  const std::size_t ix = x.id();
  return g->record("nearest_upsample", std::move(out), {x}, [g, ix, s, factor](std::span<const T> go) {
    auto gx = g->grad_buffer(ix);
    const std::size_t oh = s.h * factor, ow = s.w * factor;
    for (std::size_t p = 0; p < s.n * s.c; ++p) {
      for (std::size_t y = 0; y < oh; ++y) {
        const T* src = go.data() + (p * oh + y) * ow;
        T* dst = gx.data() + (p * s.h + y / factor) * s.w;
        for (std::size_t xx = 0; xx < ow; ++xx) dst[xx / factor] += src[xx];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Var<T> reduce(const Var<T>& x, ReduceKind kind) {
  const std::size_t n = x.value().numel();
  if (n == 0) throw ShapeError("reduce: empty tensor");
  auto in = x.value().data();
  Graph<T>* g = &x.graph();
  const std::size_t ix = x.id();
  if (kind == ReduceKind::global_avg_pool) {
    const Nchw s = as_nchw(x.shape(), "global_avg_pool");
    Tensor<T> out(Shape{s.n, s.c, 1, 1});
    auto o = out.mutable_data();
    const std::size_t plane = s.plane();
    for (std::size_t p = 0; p < s.n * s.c; ++p) {
      T acc = 0;
      for (std::size_t i = 0; i < plane; ++i) acc += in[p * plane + i];
      o[p] = acc / static_cast<T>(plane);
    }
    return g->record("global_avg_pool", std::move(out), {x}, [g, ix, s](std::span<const T> go) {
      auto gx = g->grad_buffer(ix);
      const std::size_t plane = s.plane();
      const T inv = T(1) / static_cast<T>(plane);
      for (std::size_t p = 0; p < s.n * s.c; ++p) {
        for (std::size_t i = 0; i < plane; ++i) gx[p * plane + i] += go[p] * inv;
      }
    });
  }
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += in[i];
  const T scale = kind == ReduceKind::mean ? T(1) / static_cast<T>(n) : T(1);
  Tensor<T> out(Shape{}, std::vector<T>{acc * scale});
  return g->record(kind == ReduceKind::mean ? "mean" : "sum", std::move(out), {x},
                   [g, ix, scale](std::span<const T> go) {
                     auto gx = g->grad_buffer(ix);
                     const T v = go[0] * scale;
                     for (auto& e : gx) e += v;
                   });
}

// ---------------------------------------------------------------------------
// Probabilistic outputs

template <typename T>
Var<T> sigmoid_softmax(const Var<T>& x, ActivationKind kind) {
  const Tensor<T> xv = x.value();
  auto in = xv.data();
  Tensor<T> out(x.shape());
  auto o = out.mutable_data();
  Graph<T>* g = &x.graph();
  const std::size_t ix = x.id();
  if (kind == ActivationKind::sigmoid) {
    for (std::size_t i = 0; i < o.size(); ++i) {
      const T v = in[i];
      if (v >= T(0)) {
        o[i] = T(1) / (T(1) + std::exp(-v));
      } else {
        const T e = std::exp(v);
        o[i] = e / (T(1) + e);
      }
    }
    const Tensor<T> yv = out;
    return g->record("sigmoid", std::move(out), {x}, [g, ix, yv](std::span<const T> go) {
      auto gx = g->grad_buffer(ix);
      auto y = yv.data();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * y[i] * (T(1) - y[i]);
    });
  }
  const Shape& s = x.shape();
  if (s.rank() < 2) throw ShapeError("log_softmax: expected at least rank 2, got " + s.str());
  const std::size_t outer = s[0], classes = s[1];
  const std::size_t inner = s.numel() / (outer * classes);
  for (std::size_t n = 0; n < outer; ++n) {
    for (std::size_t q = 0; q < inner; ++q) {
      const std::size_t base = n * classes * inner + q;
      T m = in[base];
      for (std::size_t c = 1; c < classes; ++c) m = std::max(m, in[base + c * inner]);
      T acc = 0;
      for (std::size_t c = 0; c < classes; ++c) acc += std::exp(in[base + c * inner] - m);
      const T lse = m + std::log(acc);
      for (std::size_t c = 0; c < classes; ++c) o[base + c * inner] = in[base + c * inner] - lse;
    }
  }
  const Tensor<T> yv = out;
  return g->record("log_softmax", std::move(out), {x},
                   [g, ix, yv, outer, classes, inner](std::span<const T> go) {
                     auto gx = g->grad_buffer(ix);
                     auto y = yv.data();
                     for (std::size_t n = 0; n < outer; ++n) {
                       for (std::size_t q = 0; q < inner; ++q) {
                         const std::size_t base = n * classes * inner + q;
                         T total = 0;
                         for (std::size_t c = 0; c < classes; ++c) total += go[base + c * inner];
                         for (std::size_t c = 0; c < classes; ++c) {
                           const std::size_t i = base + c * inner;
                           gx[i] += go[i] - std::exp(y[i]) * total;
                         }
                       }
                     }
                   });
}

template <typename T>
Var<T> log_clamped(const Var<T>& x, T lo, T hi) {
  const Tensor<T> xv = x.value();
  Tensor<T> out(x.shape());
  auto o = out.mutable_data();
  auto in = xv.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::log(std::clamp(in[i], lo, hi));
  Graph<T>* g = &x.graph();
  const std::size_t ix = x.id();
  return g->record("log_clamped", std::move(out), {x}, [g, ix, xv, lo, hi](std::span<const T> go) {
    auto gx = g->grad_buffer(ix);
    auto in = xv.data();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (in[i] >= lo && in[i] <= hi) gx[i] += go[i] / in[i];
    }
  });
}

template <typename T>
Var<T> clamp(const Var<T>& x, T lo, T hi) {
  const Tensor<T> xv = x.value();
  Tensor<T> out(x.shape());
  auto o = out.mutable_data();
  auto in = xv.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp(in[i], lo, hi);
  Graph<T>* g = &x.graph();
  const std::size_t ix = x.id();
  return g->record("clamp", std::move(out), {x}, [g, ix, xv, lo, hi](std::span<const T> go) {
    auto gx = g->grad_buffer(ix);
    auto in = xv.data();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (in[i] >= lo && in[i] <= hi) gx[i] += go[i];
    }
  });
}

template <typename T>
Var<T> pick(const Var<T>& x, std::span<const std::size_t> labels) {
  const Shape& s = x.shape();
  if (s.rank() < 2 || s.numel() != s[0] * s[1]) {
    throw ShapeError("pick: expected N x C input, got " + s.str());
  }
  const std::size_t n = s[0], classes = s[1];
  if (labels.size() != n) {
    throw ShapeError("pick: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(n));
  }
  std::vector<std::size_t> idx(labels.begin(), labels.end());
  Tensor<T> out(Shape{n});
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < n; ++i) {
    if (idx[i] >= classes) {
      throw std::out_of_range("pick: label " + std::to_string(idx[i]) + " outside [0, " +
                              std::to_string(classes - 1) + "]");
    }
    o[i] = x.value()[i * classes + idx[i]];
  }
  Graph<T>* g = &x.graph();
  const std::size_t ix = x.id();
  return g->record("pick", std::move(out), {x}, [g, ix, idx, classes](std::span<const T> go) {
    auto gx = g->grad_buffer(ix);
    for (std::size_t i = 0; i < idx.size(); ++i) gx[i * classes + idx[i]] += go[i];
  });
}

template <typename T>
Var<T> concat_channels(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Nchw first = as_nchw(parts[0].shape(), "concat_channels");
  std::size_t channels = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    const Nchw s = as_nchw(p.shape(), "concat_channels");
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: incompatible shapes " + parts[0].shape().str() + " and " +
                       p.shape().str());
    }
    offsets.push_back(channels);
    channels += s.c;
  }
  const std::size_t plane = first.plane();
  Tensor<T> out(Shape{first.n, channels, first.h, first.w});
  auto o = out.mutable_data();
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t c = parts[k].shape()[1];
    auto in = parts[k].value().data();
    for (std::size_t n = 0; n < first.n; ++n) {
      std::copy_n(in.data() + n * c * plane, c * plane,
                  o.data() + (n * channels + offsets[k]) * plane);
    }
  }
  Graph<T>* g = &parts[0].graph();
  std::vector<std::size_t> ids, counts;
  for (const auto& p : parts) {
    ids.push_back(p.id());
    counts.push_back(p.shape()[1]);
  }
  const std::size_t batch = first.n;
  return g->record("concat_channels", std::move(out), parts,
                   [g, ids, counts, offsets, batch, channels, plane](std::span<const T> go) {
                     for (std::size_t k = 0; k < ids.size(); ++k) {
                       if (!g->requires_grad(ids[k])) continue;
                       auto gx = g->grad_buffer(ids[k]);
                       for (std::size_t n = 0; n < batch; ++n) {
                         const T* src = go.data() + (n * channels + offsets[k]) * plane;
                         T* dst = gx.data() + n * counts[k] * plane;
                         for (std::size_t i = 0; i < counts[k] * plane; ++i) dst[i] += src[i];
                       }
                     }
                   });
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, std::size_t begin, std::size_t count) {
  const Nchw s = as_nchw(x.shape(), "slice_channels");
  if (count == 0 || begin + count > s.c) {
    throw ShapeError("slice_channels: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " + x.shape().str());
  }
  const std::size_t plane = s.plane();
  Tensor<T> out(Shape{s.n, count, s.h, s.w});
  auto o = out.mutable_data();
  auto in = x.value().data();
  for (std::size_t n = 0; n < s.n; ++n) {
    std::copy_n(in.data() + (n * s.c + begin) * plane, count * plane, o.data() + n * count * plane);
  }
  Graph<T>* g = &x.graph();
  const std::size_t ix = x.id();
  return g->record("slice_channels", std::move(out), {x},
                   [g, ix, s, begin, count](std::span<const T> go) {
                     auto gx = g->grad_buffer(ix);
                     const std::size_t plane = s.plane();
                     for (std::size_t n = 0; n < s.n; ++n) {
                       const T* src = go.data() + n * count * plane;
                       T* dst = gx.data() + (n * s.c + begin) * plane;
                       for (std::size_t i = 0; i < count * plane; ++i) dst[i] += src[i];
                     }
                   });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  Graph<T>* g = &x.graph();
  const std::size_t ix = x.id();
  return g->record("reshape", std::move(out), {x}, [g, ix](std::span<const T> go) {
    auto gx = g->grad_buffer(ix);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];
  });
}

#define SFTGAN_INSTANTIATE(T)                                                                  \
  template class Graph<T>;                                                                     \
  template Var<T> ew_binary<T>(const Var<T>&, const Var<T>&, BinaryKind);                      \
  template Var<T> affine<T>(const Var<T>&, T, T);                                              \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t,          \
                            std::size_t);                                                      \
  template Var<T> leaky_relu<T>(const Var<T>&, T);                                             \
  template Var<T> nearest_upsample<T>(const Var<T>&, std::size_t);                             \
  template Var<T> reduce<T>(const Var<T>&, ReduceKind);                                        \
  template Var<T> sigmoid_softmax<T>(const Var<T>&, ActivationKind);                           \
  template Var<T> log_clamped<T>(const Var<T>&, T, T);                                         \
  template Var<T> clamp<T>(const Var<T>&, T, T);                                               \
  template Var<T> pick<T>(const Var<T>&, std::span<const std::size_t>);                        \
  template Var<T> concat_channels<T>(std::span<const Var<T>>);                                 \
  template Var<T> slice_channels<T>(const Var<T>&, std::size_t, std::size_t);                  \
  template Var<T> reshape<T>(const Var<T>&, Shape);

SFTGAN_INSTANTIATE(float)
SFTGAN_INSTANTIATE(double)
#undef SFTGAN_INSTANTIATE

}  // namespace sftgan::ad
