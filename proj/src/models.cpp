#include "sftgan/models.hpp"

#include <cmath>
#include <stdexcept>

namespace sftgan {

std::string to_string(ConditioningMode mode) {
  switch (mode) {
    case ConditioningMode::sft: return "sft";
    case ConditioningMode::input_concat: return "input_concat";
    case ConditioningMode::film: return "film";
    case ConditioningMode::compositional: return "compositional";
    case ConditioningMode::none: return "none";
  }
  return "unknown";
}

ConditioningMode parse_mode(const std::string& name) {
  for (auto m : {ConditioningMode::sft, ConditioningMode::input_concat, ConditioningMode::film,
                 ConditioningMode::compositional, ConditioningMode::none}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown conditioning mode '" + name +
                              "' (expected sft, input_concat, film, compositional or none)");
}

template <typename T>
void validate_probability_maps(const Tensor<T>& psi, std::size_t classes) {
  const Nchw s = as_nchw(psi.shape(), "probability maps");
  if (s.c != classes) {
    throw ShapeError("probability maps have " + std::to_string(s.c) + " channels, expected " +
                     std::to_string(classes));
  }
  auto v = psi.data();
  const std::size_t plane = s.plane();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t p = 0; p < plane; ++p) {
      double total = 0.0;
      for (std::size_t c = 0; c < s.c; ++c) {
        const double x = v[(n * s.c + c) * plane + p];
        if (x < -1e-6 || x > 1.0 + 1e-6) {
          throw std::invalid_argument("probability map value " + std::to_string(x) +
                                      " outside [0, 1]");
        }
        total += x;
      }
      if (std::abs(total - 1.0) > 1e-5) {
        throw std::invalid_argument("probability maps do not sum to 1 at pixel " +
                                    std::to_string(p) + " (sum " + std::to_string(total) + ")");
      }
    }
  }
}

namespace {

std::size_t upsample_stages(std::size_t scale) {
  std::size_t stages = 0;
  while ((std::size_t{1} << stages) < scale) ++stages;
  if ((std::size_t{1} << stages) != scale) {
    throw std::invalid_argument("scale factor must be a power of two, got " + std::to_string(scale));
  }
  return stages;
}

}  // namespace

// ---------------------------------------------------------------------------
// Generator

Generator::Generator(const GeneratorConfig& config) : cfg_(config) {
  if (cfg_.width == 0 || cfg_.num_classes == 0 || cfg_.cond_channels == 0 || cfg_.cond_hidden == 0) {
    throw std::invalid_argument("generator: widths and class count must be positive");
  }
  const std::size_t stages = upsample_stages(cfg_.scale);
  auto rng = RngStream::keyed(cfg_.seed, "generator-init");
  const std::size_t C = cfg_.width;

  BlockConditioning block_kind = BlockConditioning::plain;
  if (cfg_.mode == ConditioningMode::sft) block_kind = BlockConditioning::sft;
  if (cfg_.mode == ConditioningMode::film) block_kind = BlockConditioning::film;

  if (block_kind != BlockConditioning::plain) {
    condition_ = make_condition_network(params_, "cond", cfg_.num_classes, cfg_.cond_hidden,
                                        cfg_.cond_channels, rng);
  }
  const std::size_t in_channels =
      3 + (cfg_.mode == ConditioningMode::input_concat ? cfg_.num_classes : 0);
  entry_ = make_conv(params_, "entry", in_channels, C, 3, 1, rng);

  const bool compositional = cfg_.mode == ConditioningMode::compositional;
  const std::size_t trunk_blocks = compositional ? cfg_.blocks / 2 : cfg_.blocks;
  for (std::size_t i = 0; i < trunk_blocks; ++i) {
    trunk_.push_back(make_res_block(params_, "block" + std::to_string(i), block_kind, C,
                                    cfg_.cond_channels, rng));
  }
  const std::size_t branch_count = compositional ? cfg_.num_classes : 1;
  for (std::size_t k = 0; k < branch_count; ++k) {
    const std::string prefix = compositional ? "branch" + std::to_string(k) + "." : "";
    Branch branch;
    for (std::size_t i = trunk_blocks; i < cfg_.blocks; ++i) {
      branch.blocks.push_back(make_res_block(params_, prefix + "block" + std::to_string(i),
                                             BlockConditioning::plain, C, cfg_.cond_channels, rng));
    }
    branch.post = make_conv(params_, prefix + "post", C, C, 3, 1, rng);
    for (std::size_t s = 0; s < stages; ++s) {
      branch.upsample.push_back(make_conv(params_, prefix + "up" + std::to_string(s), C, C, 3, 1, rng));
    }
    branch.exit0 = make_conv(params_, prefix + "exit0", C, C, 3, 1, rng);
    branch.exit1 = make_conv(params_, prefix + "exit1", C, 3, 3, 1, rng);
    branches_.push_back(std::move(branch));
  }
}

template <typename T>
ad::Var<T> Generator::run_branch(Binding<T>& bind, const Branch& branch, ad::Var<T> h,
                                 const ad::Var<T>& entry, const ad::Var<T>& shared) const {
  const T slope = static_cast<T>(kLeakySlope);
  for (const auto& block : branch.blocks) h = block.forward(bind, h, shared);
  h = ad::add(branch.post(bind, h), entry);
  for (const auto& up : branch.upsample) {
    h = ad::leaky_relu(up(bind, ad::nearest_upsample(h, std::size_t{2})), slope);
  }
  h = ad::leaky_relu(branch.exit0(bind, h), slope);
  return branch.exit1(bind, h);
}

template <typename T>
ad::Var<T> Generator::forward(Binding<T>& bind, const ad::Var<T>& x, const ad::Var<T>& psi,
                              ModulationTrace* trace) const {
  const Nchw xs = as_nchw(x.shape(), "generator input");
  if (xs.c != 3) throw ShapeError("generator input must have 3 channels, got " + x.shape().str());
  const bool uses_psi = cfg_.mode != ConditioningMode::none;
  if (uses_psi) {
    if (!psi.valid()) throw std::invalid_argument("generator: probability maps required in mode " + to_string(cfg_.mode));
    const Nchw ps = as_nchw(psi.shape(), "probability maps");
    if (ps.n != xs.n || ps.h != xs.h || ps.w != xs.w) {
      throw ShapeError("generator: probability maps " + psi.shape().str() +
                       " do not match input " + x.shape().str());
    }
    validate_probability_maps(psi.value(), cfg_.num_classes);
  }

  ad::Var<T> shared;
  if (condition_) shared = condition_->forward(bind, psi);

  ad::Var<T> input = x;
  if (cfg_.mode == ConditioningMode::input_concat) {
    const ad::Var<T> parts[2] = {x, psi};
    input = ad::concat_channels<T>(parts);
  }
  const ad::Var<T> entry = entry_(bind, input);
  ad::Var<T> h = entry;
  for (const auto& block : trunk_) h = block.forward(bind, h, shared, trace);

  if (cfg_.mode != ConditioningMode::compositional) {
    return run_branch(bind, branches_.front(), h, entry, shared);
  }
  const ad::Var<T> psi_hr = ad::nearest_upsample(psi, cfg_.scale);
  ad::Var<T> out;
  for (std::size_t k = 0; k < branches_.size(); ++k) {
    const auto y = run_branch(bind, branches_[k], h, entry, shared);
    const auto term = ad::mul(y, ad::slice_channels(psi_hr, k, 1));
    out = out.valid() ? ad::add(out, term) : term;
  }
  return out;
}

Tensor<float> Generator::infer(const Tensor<float>& x, const Tensor<float>& psi,
                               ModulationTrace* trace) const {
  ad::Graph<float> g;
  Binding<float> bind(g, params_, false);
  const auto xv = g.constant(x);
  const auto pv = cfg_.mode == ConditioningMode::none && psi.numel() == 0 ? ad::Var<float>()
                                                                          : g.constant(psi);
  return forward(bind, xv, pv, trace).value();
}

std::size_t Generator::modulation_layers() const {
  std::size_t n = 0;
  for (const auto& b : trunk_) n += b.conditioning == BlockConditioning::plain ? 0 : 2;
  return n;
}

ModulationTrace Generator::modulation_maps(const Tensor<float>& psi) const {
  ModulationTrace trace;
  if (!condition_) return trace;
  validate_probability_maps(psi, cfg_.num_classes);
  ad::Graph<float> g;
  Binding<float> bind(g, params_, false);
  const auto shared = condition_->forward(bind, g.constant(psi));
  for (const auto& block : trunk_) {
    for (const SFTLayer* layer : {&block.mod0, &block.mod1}) {
      const auto mod = block.conditioning == BlockConditioning::film
                           ? layer->film_modulation(bind, shared)
                           : layer->modulation(bind, shared);
      trace.gamma.push_back(mod.gamma.value());
      trace.beta.push_back(mod.beta.value());
    }
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(const DiscriminatorConfig& config) : cfg_(config) {
  if (cfg_.channels.size() != cfg_.strides.size() || cfg_.channels.empty()) {
    throw std::invalid_argument("discriminator: channel and stride plans must match");
  }
  auto rng = RngStream::keyed(cfg_.seed, "discriminator-init");
  std::size_t in = 3;
  for (std::size_t i = 0; i < cfg_.channels.size(); ++i) {
    trunk_.push_back(make_conv(params_, "conv" + std::to_string(i), in, cfg_.channels[i], 3,
                               cfg_.strides[i], rng));
    in = cfg_.channels[i];
  }
  real_head_ = make_conv(params_, "real_head", in, 1, 1, 1, rng);
  class_head_ = make_conv(params_, "class_head", in, cfg_.num_classes, 1, 1, rng);
}

template <typename T>
DiscriminatorOutput<T> Discriminator::forward(Binding<T>& bind, const ad::Var<T>& image) const {
  const Nchw s = as_nchw(image.shape(), "discriminator input");
  if (s.c != 3) throw ShapeError("discriminator input must have 3 channels, got " + image.shape().str());
  if (cfg_.hr_size != 0 && (s.h != cfg_.hr_size || s.w != cfg_.hr_size)) {
    throw ShapeError("discriminator configured for " + std::to_string(cfg_.hr_size) + "x" +
                     std::to_string(cfg_.hr_size) + " inputs, got " + image.shape().str());
  }
  const T slope = static_cast<T>(kLeakySlope);
  ad::Var<T> h = image;
  for (const auto& conv : trunk_) h = ad::leaky_relu(conv(bind, h), slope);
  const auto pooled = ad::global_avg_pool(h);
  DiscriminatorOutput<T> out;
  out.logit = ad::reshape(real_head_(bind, pooled), Shape{s.n});
  // Clamped so the probability stays strictly inside (0, 1) in T even for
  // saturated logits.
  out.prob = ad::clamp(ad::sigmoid(out.logit), static_cast<T>(kMinProb), static_cast<T>(1.0 - kMinProb));
  out.class_log_probs =
      ad::log_softmax(ad::reshape(class_head_(bind, pooled), Shape{s.n, cfg_.num_classes}));
  return out;
}

// ---------------------------------------------------------------------------
// FeatureNet

FeatureNet::FeatureNet(std::uint64_t seed, std::size_t stages) {
  if (stages > 4) throw std::invalid_argument("feature net has at most 4 stages");
  auto rng = RngStream::keyed(seed, "featurenet-init");
  const std::size_t plan[5] = {3, 16, 32, 64, 64};
  const std::size_t strides[4] = {1, 2, 2, 2};
  for (std::size_t i = 0; i < stages; ++i) {
    convs_.push_back(make_conv(params_, "phi" + std::to_string(i), plan[i], plan[i + 1], 3,
                               strides[i], rng, 1.0, 0.0f, /*trainable=*/false));
  }
}

std::size_t FeatureNet::stride() const {
  std::size_t s = 1;
  for (const auto& c : convs_) s *= c.stride;
  return s;
}

template <typename T>
ad::Var<T> FeatureNet::forward(Binding<T>& bind, const ad::Var<T>& image) const {
  const Nchw s = as_nchw(image.shape(), "feature net input");
  const std::size_t f = stride();
  if (s.h % f != 0 || s.w % f != 0) {
    throw ShapeError("feature net input " + image.shape().str() + " must have extents divisible by " +
                     std::to_string(f));
  }
  ad::Var<T> h = image;
  for (const auto& conv : convs_) h = ad::leaky_relu(conv(bind, h), static_cast<T>(kLeakySlope));
  return h;
}

#define SFTGAN_INSTANTIATE(T)                                                                   \
  template void validate_probability_maps<T>(const Tensor<T>&, std::size_t);                   \
  template ad::Var<T> Generator::forward<T>(Binding<T>&, const ad::Var<T>&, const ad::Var<T>&,  \
                                            ModulationTrace*) const;                            \
  template DiscriminatorOutput<T> Discriminator::forward<T>(Binding<T>&, const ad::Var<T>&)     \
      const;                                                                                    \
  template ad::Var<T> FeatureNet::forward<T>(Binding<T>&, const ad::Var<T>&) const;

SFTGAN_INSTANTIATE(float)
SFTGAN_INSTANTIATE(double)
#undef SFTGAN_INSTANTIATE

}  // namespace sftgan
