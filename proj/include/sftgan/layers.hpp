#pragma once

#include <string>
#include <vector>

#include "sftgan/autodiff.hpp"
#include "sftgan/parameters.hpp"
#include "sftgan/rng.hpp"

namespace sftgan {

inline constexpr float kLeakySlope = 0.2f;

/// Scale applied to the final 1x1 weights of the modulation heads. Together
/// with the head biases (gamma 1, beta 0) this makes a fresh SFT layer a
/// near-identity.
inline constexpr double kHeadOutputScale = 0.01;

/// Scale applied to the last convolution of each residual body.
inline constexpr double kResidualOutputScale = 0.01;

struct Conv2d {
  ParamId weight = 0;
  ParamId bias = 0;
  std::size_t in_channels = 0, out_channels = 0, kernel = 1, stride = 1, pad = 0;

  template <typename T>
  ad::Var<T> operator()(Binding<T>& bind, const ad::Var<T>& x) const;
};

/// Registers "<name>.weight" and "<name>.bias" with Kaiming-uniform weights
/// (leaky gain) multiplied by weight_scale. Padding keeps "same" extents for
/// stride 1.
Conv2d make_conv(ParameterSet<float>& params, const std::string& name, std::size_t in,
                 std::size_t out, std::size_t kernel, std::size_t stride, RngStream& rng,
                 double weight_scale = 1.0, float bias_init = 0.0f, bool trainable = true);

template <typename T>
struct ModulationPair {
  ad::Var<T> gamma;
  ad::Var<T> beta;
};

/// gamma (.) F + beta with all three shapes identical.
template <typename T>
ad::Var<T> sft_apply(const ad::Var<T>& features, const ModulationPair<T>& mod);

/// Per-layer (gamma, beta) values captured during a forward pass.
struct ModulationTrace {
  std::vector<Tensor<float>> gamma;
  std::vector<Tensor<float>> beta;
};

/// The two 1x1 heads mapping shared conditions to (gamma, beta):
/// conv1x1(Cc->Cc) -> leaky -> conv1x1(Cc->C), once per parameter.
struct SFTLayer {
  Conv2d gamma_hidden, gamma_out, beta_hidden, beta_out;

  /// Per-pixel modulation from the shared condition map.
  template <typename T>
  ModulationPair<T> modulation(Binding<T>& bind, const ad::Var<T>& shared) const;

  /// One (gamma_c, beta_c) per channel from the spatially averaged condition,
  /// shaped N x C x 1 x 1.
  template <typename T>
  ModulationPair<T> film_modulation(Binding<T>& bind, const ad::Var<T>& shared) const;

  template <typename T>
  ad::Var<T> forward(Binding<T>& bind, const ad::Var<T>& features, const ad::Var<T>& shared,
                     ModulationTrace* trace = nullptr) const;
};

SFTLayer make_sft_layer(ParameterSet<float>& params, const std::string& name,
                        std::size_t cond_channels, std::size_t feature_channels, RngStream& rng);

/// Condition network: four 1x1 convolutions (K+1)->64->64->64->C_cond with
/// leaky activations between them. Receptive field is a single pixel.
struct ConditionNetwork {
  std::vector<Conv2d> convs;
  std::size_t in_channels = 0, out_channels = 0;

  template <typename T>
  ad::Var<T> forward(Binding<T>& bind, const ad::Var<T>& psi) const;
};

ConditionNetwork make_condition_network(ParameterSet<float>& params, const std::string& name,
                                        std::size_t in_channels, std::size_t hidden,
                                        std::size_t out_channels, RngStream& rng);

enum class BlockConditioning { sft, film, plain };

/// Residual block: [mod] -> conv3x3 -> leaky -> [mod] -> conv3x3, plus identity.
/// [mod] is an SFT layer, a FiLM modulation, or nothing.
struct ResBlock {
  BlockConditioning conditioning = BlockConditioning::sft;
  SFTLayer mod0, mod1;
  Conv2d conv0, conv1;
  std::size_t channels = 0;

  template <typename T>
  ad::Var<T> forward(Binding<T>& bind, const ad::Var<T>& features, const ad::Var<T>& shared,
                     ModulationTrace* trace = nullptr) const;
};

ResBlock make_res_block(ParameterSet<float>& params, const std::string& name,
                        BlockConditioning conditioning, std::size_t channels,
                        std::size_t cond_channels, RngStream& rng);

}  // namespace sftgan
