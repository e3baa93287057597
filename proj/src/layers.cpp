#include "sftgan/layers.hpp"

#include <cmath>

namespace sftgan {

template <typename T>
ad::Var<T> Conv2d::operator()(Binding<T>& bind, const ad::Var<T>& x) const {
  return ad::conv2d(x, bind(weight), bind(bias), stride, pad);
}

Conv2d make_conv(ParameterSet<float>& params, const std::string& name, std::size_t in,
                 std::size_t out, std::size_t kernel, std::size_t stride, RngStream& rng,
                 double weight_scale, float bias_init, bool trainable) {
  const double fan_in = static_cast<double>(in * kernel * kernel);
  const double slope = kLeakySlope;
  const double bound = weight_scale * std::sqrt(6.0 / ((1.0 + slope * slope) * fan_in));
  Tensor<float> w(Shape{out, in, kernel, kernel});
  for (auto& v : w.mutable_data()) v = static_cast<float>(rng.uniform(-bound, bound));
  Conv2d conv;
  conv.weight = params.add(name + ".weight", std::move(w), trainable);
  conv.bias = params.add(name + ".bias", Tensor<float>(Shape{out}, bias_init), trainable);
  conv.in_channels = in;
  conv.out_channels = out;
  conv.kernel = kernel;
  conv.stride = stride;
  conv.pad = kernel / 2;
  return conv;
}

template <typename T>
ad::Var<T> sft_apply(const ad::Var<T>& features, const ModulationPair<T>& mod) {
  if (mod.gamma.shape() != features.shape() || mod.beta.shape() != features.shape()) {
    throw ShapeError("sft_apply: features " + features.shape().str() + ", gamma " +
                     mod.gamma.shape().str() + ", beta " + mod.beta.shape().str() +
                     " must have identical shapes");
  }
  return ad::add(ad::mul(mod.gamma, features), mod.beta);
}

template <typename T>
ModulationPair<T> SFTLayer::modulation(Binding<T>& bind, const ad::Var<T>& shared) const {
  const T slope = static_cast<T>(kLeakySlope);
  auto gamma = gamma_out(bind, ad::leaky_relu(gamma_hidden(bind, shared), slope));
  auto beta = beta_out(bind, ad::leaky_relu(beta_hidden(bind, shared), slope));
  return {gamma, beta};
}

template <typename T>
ModulationPair<T> SFTLayer::film_modulation(Binding<T>& bind, const ad::Var<T>& shared) const {
  return modulation(bind, ad::global_avg_pool(shared));
}

template <typename T>
static void record_trace(ModulationTrace* trace, const ModulationPair<T>& mod) {
  if (!trace) return;
  trace->gamma.push_back(mod.gamma.value().template cast<float>());
  trace->beta.push_back(mod.beta.value().template cast<float>());
}

template <typename T>
ad::Var<T> SFTLayer::forward(Binding<T>& bind, const ad::Var<T>& features,
                             const ad::Var<T>& shared, ModulationTrace* trace) const {
  const Nchw f = as_nchw(features.shape(), "sft_layer features");
  const Nchw s = as_nchw(shared.shape(), "sft_layer condition");
  if (f.h != s.h || f.w != s.w || f.n != s.n) {
    throw ShapeError("sft_layer: features " + features.shape().str() +
                     " and shared condition " + shared.shape().str() + " differ spatially");
  }
  const auto mod = modulation(bind, shared);
  record_trace(trace, mod);
  return sft_apply(features, mod);
}

SFTLayer make_sft_layer(ParameterSet<float>& params, const std::string& name,
                        std::size_t cond_channels, std::size_t feature_channels, RngStream& rng) {
  SFTLayer layer;
  layer.gamma_hidden = make_conv(params, name + ".gamma0", cond_channels, cond_channels, 1, 1, rng);
  layer.gamma_out = make_conv(params, name + ".gamma1", cond_channels, feature_channels, 1, 1, rng,
                              kHeadOutputScale, 1.0f);
  layer.beta_hidden = make_conv(params, name + ".beta0", cond_channels, cond_channels, 1, 1, rng);
  layer.beta_out = make_conv(params, name + ".beta1", cond_channels, feature_channels, 1, 1, rng,
                             kHeadOutputScale, 0.0f);
  return layer;
}

template <typename T>
ad::Var<T> ConditionNetwork::forward(Binding<T>& bind, const ad::Var<T>& psi) const {
  const Nchw s = as_nchw(psi.shape(), "condition network input");
  if (s.c != in_channels) {
    throw ShapeError("condition network expects " + std::to_string(in_channels) +
                     " probability channels, got " + psi.shape().str());
  }
  ad::Var<T> h = psi;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    h = convs[i](bind, h);
    if (i + 1 < convs.size()) h = ad::leaky_relu(h, static_cast<T>(kLeakySlope));
  }
  return h;
}

ConditionNetwork make_condition_network(ParameterSet<float>& params, const std::string& name,
                                        std::size_t in_channels, std::size_t hidden,
                                        std::size_t out_channels, RngStream& rng) {
  ConditionNetwork net;
  net.in_channels = in_channels;
  net.out_channels = out_channels;
  const std::size_t plan[5] = {in_channels, hidden, hidden, hidden, out_channels};
  for (std::size_t i = 0; i < 4; ++i) {
    net.convs.push_back(
        make_conv(params, name + ".conv" + std::to_string(i), plan[i], plan[i + 1], 1, 1, rng));
  }
  return net;
}

template <typename T>
ad::Var<T> ResBlock::forward(Binding<T>& bind, const ad::Var<T>& features,
                             const ad::Var<T>& shared, ModulationTrace* trace) const {
  const Nchw f = as_nchw(features.shape(), "res_block");
  if (f.c != channels) {
    throw ShapeError("res_block expects " + std::to_string(channels) + " channels, got " +
                     features.shape().str());
  }
  auto modulate = [&](const SFTLayer& layer, const ad::Var<T>& x) -> ad::Var<T> {
    switch (conditioning) {
      case BlockConditioning::sft:
        return layer.forward(bind, x, shared, trace);
      case BlockConditioning::film: {
        const auto mod = layer.film_modulation(bind, shared);
        record_trace(trace, mod);
        return ad::add(ad::mul(x, mod.gamma), mod.beta);
      }
      case BlockConditioning::plain:
        break;
    }
    return x;
  };
  auto h = modulate(mod0, features);
  h = ad::leaky_relu(conv0(bind, h), static_cast<T>(kLeakySlope));
  h = modulate(mod1, h);
  h = conv1(bind, h);
  return ad::add(features, h);
}

ResBlock make_res_block(ParameterSet<float>& params, const std::string& name,
                        BlockConditioning conditioning, std::size_t channels,
                        std::size_t cond_channels, RngStream& rng) {
  ResBlock block;
  block.conditioning = conditioning;
  block.channels = channels;
  const std::string mod = conditioning == BlockConditioning::film ? ".film" : ".sft";
  if (conditioning != BlockConditioning::plain) {
    block.mod0 = make_sft_layer(params, name + mod + "0", cond_channels, channels, rng);
  }
  block.conv0 = make_conv(params, name + ".conv0", channels, channels, 3, 1, rng);
  if (conditioning != BlockConditioning::plain) {
    block.mod1 = make_sft_layer(params, name + mod + "1", cond_channels, channels, rng);
  }
  block.conv1 = make_conv(params, name + ".conv1", channels, channels, 3, 1, rng, kResidualOutputScale);
  return block;
}

#define SFTGAN_INSTANTIATE(T)                                                                   \
  template ad::Var<T> Conv2d::operator()<T>(Binding<T>&, const ad::Var<T>&) const;              \
  template ad::Var<T> sft_apply<T>(const ad::Var<T>&, const ModulationPair<T>&);                \
  template ModulationPair<T> SFTLayer::modulation<T>(Binding<T>&, const ad::Var<T>&) const;     \
  template ModulationPair<T> SFTLayer::film_modulation<T>(Binding<T>&, const ad::Var<T>&) const;\
  template ad::Var<T> SFTLayer::forward<T>(Binding<T>&, const ad::Var<T>&, const ad::Var<T>&,   \
                                           ModulationTrace*) const;                             \
  template ad::Var<T> ConditionNetwork::forward<T>(Binding<T>&, const ad::Var<T>&) const;       \
  template ad::Var<T> ResBlock::forward<T>(Binding<T>&, const ad::Var<T>&, const ad::Var<T>&,   \
                                           ModulationTrace*) const;

SFTGAN_INSTANTIATE(float)
SFTGAN_INSTANTIATE(double)
#undef SFTGAN_INSTANTIATE

}  // namespace sftgan
