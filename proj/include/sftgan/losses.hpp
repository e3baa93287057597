#pragma once

#include <span>

#include "sftgan/models.hpp"

namespace sftgan {

inline constexpr double kProbClamp = 1e-7;

struct LossWeights {
  double percep = 1.0;
  double adv = 1e-3;
  double cls = 1e-1;

  /// Throws std::invalid_argument unless all weights are >= 0 and one is > 0.
  void validate() const;
};

/// Mean squared difference of feature activations phi(pred) and phi(target).
template <typename T>
ad::Var<T> perceptual_loss(Binding<T>& phi_bind, const FeatureNet& phi, const ad::Var<T>& pred,
                           const ad::Var<T>& target);

/// saturating: mean log(1 - d); otherwise mean -log d. d is clamped to
/// [1e-7, 1 - 1e-7].
template <typename T>
ad::Var<T> adversarial_loss_g(const ad::Var<T>& d_fake, bool saturating = false);

/// -mean[log d_real + log(1 - d_fake)]
template <typename T>
ad::Var<T> discriminator_loss(const ad::Var<T>& d_real, const ad::Var<T>& d_fake);

/// Batch-mean negative log-likelihood of labels under N x C log-probabilities.
template <typename T>
ad::Var<T> aux_class_loss(const ad::Var<T>& class_log_probs, std::span<const std::size_t> labels);

template <typename T>
struct GeneratorLoss {
  ad::Var<T> total;
  ad::Var<T> percep;
  ad::Var<T> adv;
  ad::Var<T> cls;
};

template <typename T>
GeneratorLoss<T> generator_total_loss(Binding<T>& phi_bind, const FeatureNet& phi,
                                      const ad::Var<T>& pred, const ad::Var<T>& target,
                                      const DiscriminatorOutput<T>& d_fake,
                                      std::span<const std::size_t> labels, const LossWeights& w,
                                      bool saturating = false);

}  // namespace sftgan
