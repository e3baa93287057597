#include "sftgan/losses.hpp"

#include <stdexcept>

namespace sftgan {

void LossWeights::validate() const {
  if (percep < 0 || adv < 0 || cls < 0) throw std::invalid_argument("loss weights must be >= 0");
  if (percep == 0 && adv == 0 && cls == 0) {
    throw std::invalid_argument("at least one loss weight must be positive");
  }
}

namespace {

template <typename T>
ad::Var<T> clamped_log(const ad::Var<T>& p) {
  return ad::log_clamped(p, static_cast<T>(kProbClamp), static_cast<T>(1.0 - kProbClamp));
}

template <typename T>
ad::Var<T> one_minus(const ad::Var<T>& p) {
  return ad::affine(p, T(-1), T(1));
}

template <typename T>
ad::Var<T> negate(const ad::Var<T>& x) {
  return ad::affine(x, T(-1), T(0));
}

}  // namespace

template <typename T>
ad::Var<T> perceptual_loss(Binding<T>& phi_bind, const FeatureNet& phi, const ad::Var<T>& pred,
                           const ad::Var<T>& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("perceptual_loss: prediction " + pred.shape().str() + " vs target " +
                     target.shape().str());
  }
  const auto diff = ad::sub(phi.forward(phi_bind, pred), phi.forward(phi_bind, target));
  return ad::mean(ad::mul(diff, diff));
}

template <typename T>
ad::Var<T> adversarial_loss_g(const ad::Var<T>& d_fake, bool saturating) {
  if (saturating) return ad::mean(clamped_log(one_minus(d_fake)));
  return negate(ad::mean(clamped_log(d_fake)));
}

template <typename T>
ad::Var<T> discriminator_loss(const ad::Var<T>& d_real, const ad::Var<T>& d_fake) {
  if (d_real.shape() != d_fake.shape()) {
    throw ShapeError("discriminator_loss: real " + d_real.shape().str() + " vs fake " +
                     d_fake.shape().str());
  }
  return negate(ad::mean(ad::add(clamped_log(d_real), clamped_log(one_minus(d_fake)))));
}

template <typename T>
ad::Var<T> aux_class_loss(const ad::Var<T>& class_log_probs, std::span<const std::size_t> labels) {
  return negate(ad::mean(ad::pick(class_log_probs, labels)));
}

template <typename T>
GeneratorLoss<T> generator_total_loss(Binding<T>& phi_bind, const FeatureNet& phi,
                                      const ad::Var<T>& pred, const ad::Var<T>& target,
                                      const DiscriminatorOutput<T>& d_fake,
                                      std::span<const std::size_t> labels, const LossWeights& w,
                                      bool saturating) {
  w.validate();
  GeneratorLoss<T> out;
  out.percep = perceptual_loss(phi_bind, phi, pred, target);
  out.adv = adversarial_loss_g(d_fake.prob, saturating);
  out.cls = aux_class_loss(d_fake.class_log_probs, labels);
  out.total = ad::add(ad::add(ad::affine(out.percep, static_cast<T>(w.percep), T(0)),
                              ad::affine(out.adv, static_cast<T>(w.adv), T(0))),
                      ad::affine(out.cls, static_cast<T>(w.cls), T(0)));
  return out;
}

#define SFTGAN_INSTANTIATE(T)                                                                    \
  template ad::Var<T> perceptual_loss<T>(Binding<T>&, const FeatureNet&, const ad::Var<T>&,      \
                                         const ad::Var<T>&);                                     \
  template ad::Var<T> adversarial_loss_g<T>(const ad::Var<T>&, bool);                            \
  template ad::Var<T> discriminator_loss<T>(const ad::Var<T>&, const ad::Var<T>&);               \
  template ad::Var<T> aux_class_loss<T>(const ad::Var<T>&, std::span<const std::size_t>);        \
  template GeneratorLoss<T> generator_total_loss<T>(                                             \
      Binding<T>&, const FeatureNet&, const ad::Var<T>&, const ad::Var<T>&,                      \
      const DiscriminatorOutput<T>&, std::span<const std::size_t>, const LossWeights&, bool);

SFTGAN_INSTANTIATE(float)
SFTGAN_INSTANTIATE(double)
#undef SFTGAN_INSTANTIATE

}  // namespace sftgan
