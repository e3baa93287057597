#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sftgan/layers.hpp"

namespace sftgan {

enum class ConditioningMode { sft, input_concat, film, compositional, none };

std::string to_string(ConditioningMode mode);
/// Throws std::invalid_argument for an unknown name.
ConditioningMode parse_mode(const std::string& name);

struct GeneratorConfig {
  ConditioningMode mode = ConditioningMode::sft;
  std::size_t num_classes = 8;  // K categories + background
  std::size_t width = 32;
  std::size_t blocks = 16;
  std::size_t cond_hidden = 64;
  std::size_t cond_channels = 32;
  std::size_t scale = 4;  // power of two; one nearest x2 + conv stage per factor 2
  std::uint64_t seed = 0;
};

/// Checks the probability-map contract: N x classes x H x W, values in [0,1],
/// per-pixel channel sums within 1e-5 of one.
template <typename T>
void validate_probability_maps(const Tensor<T>& psi, std::size_t classes);

/// Generator: condition network + SR network. LR features flow through the
/// residual trunk (modulated according to the mode), a long skip, log2(scale)
/// upsampling stages and two exit convolutions.
///
/// compositional: the trunk is shared and unconditioned; each class owns a
/// branch (remaining blocks + upsampling + exit) and the branch outputs are
/// blended per pixel by the (upsampled) class probabilities.
class Generator {
 public:
  explicit Generator(const GeneratorConfig& config);

  const GeneratorConfig& config() const { return cfg_; }
  ParameterSet<float>& params() { return params_; }
  const ParameterSet<float>& params() const { return params_; }

  /// x: N x 3 x h x w, psi: N x classes x h x w (ignored in mode none).
  template <typename T>
  ad::Var<T> forward(Binding<T>& bind, const ad::Var<T>& x, const ad::Var<T>& psi,
                     ModulationTrace* trace = nullptr) const;

  /// Forward pass without gradient recording.
  Tensor<float> infer(const Tensor<float>& x, const Tensor<float>& psi,
                      ModulationTrace* trace = nullptr) const;

  /// Number of SFT/FiLM modulation layers (two per conditioned block).
  std::size_t modulation_layers() const;

  /// Modulation maps only (the condition pathway); x is not needed.
  ModulationTrace modulation_maps(const Tensor<float>& psi) const;

 private:
  struct Branch {
    std::vector<ResBlock> blocks;
    Conv2d post;
    std::vector<Conv2d> upsample;
    Conv2d exit0, exit1;
  };

  template <typename T>
  ad::Var<T> run_branch(Binding<T>& bind, const Branch& branch, ad::Var<T> h,
                        const ad::Var<T>& entry, const ad::Var<T>& shared) const;

  GeneratorConfig cfg_;
  ParameterSet<float> params_;
  std::optional<ConditionNetwork> condition_;
  Conv2d entry_;
  std::vector<ResBlock> trunk_;
  std::vector<Branch> branches_;
};

/// Bounds of the discriminator's real/fake probability.
inline constexpr double kMinProb = 1e-7;

struct DiscriminatorConfig {
  std::size_t num_classes = 8;
  /// Expected square input extent; 0 accepts any extent >= 16.
  std::size_t hr_size = 0;
  std::vector<std::size_t> channels{32, 32, 64, 64, 128};
  std::vector<std::size_t> strides{1, 2, 2, 2, 2};
  std::uint64_t seed = 1;
};

template <typename T>
struct DiscriminatorOutput {
  ad::Var<T> logit;            // N
  ad::Var<T> prob;             // N, sigmoid(logit)
  ad::Var<T> class_log_probs;  // N x classes
};

/// Strided VGG-style conv stack, global average pool, and two 1x1 heads
/// (real/fake logit and class logits) on the shared trunk.
class Discriminator {
 public:
  explicit Discriminator(const DiscriminatorConfig& config);

  const DiscriminatorConfig& config() const { return cfg_; }
  ParameterSet<float>& params() { return params_; }
  const ParameterSet<float>& params() const { return params_; }

  template <typename T>
  DiscriminatorOutput<T> forward(Binding<T>& bind, const ad::Var<T>& image) const;

 private:
  DiscriminatorConfig cfg_;
  ParameterSet<float> params_;
  std::vector<Conv2d> trunk_;
  Conv2d real_head_, class_head_;
};

/// Fixed feature network standing in for a pretrained perceptual network:
/// conv3x3 + leaky stages 3->16->32->64->64 with strides 1,2,2,2 (output H/8).
/// Weights are drawn once from the seed and never trained. stages == 0 gives
/// the identity map.
class FeatureNet {
 public:
  explicit FeatureNet(std::uint64_t seed = 7, std::size_t stages = 4);
  static FeatureNet identity() { return FeatureNet(0, 0); }

  const ParameterSet<float>& params() const { return params_; }
  std::size_t stages() const { return convs_.size(); }
  /// Spatial reduction factor of the output.
  std::size_t stride() const;

  /// Params are bound frozen; gradients flow to the image only.
  template <typename T>
  ad::Var<T> forward(Binding<T>& bind, const ad::Var<T>& image) const;

 private:
  ParameterSet<float> params_;
  std::vector<Conv2d> convs_;
};

}  // namespace sftgan
