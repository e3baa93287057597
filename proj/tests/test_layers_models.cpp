#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "sftgan/datagen.hpp"
#include "sftgan/models.hpp"

using namespace sftgan;

namespace {

constexpr float kGoldenLogit = -0.45440766f;
constexpr float kGoldenClass0 = -0.72510397f;

Tensor<float> seeded(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  auto rng = RngStream::keyed(seed, "layers-test");
  Tensor<float> t(std::move(s));
  for (auto& v : t.mutable_data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

/// Random probability maps (softmax of noise), N x C x H x W.
Tensor<float> random_psi(std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed) {
  auto t = seeded(Shape{n, c, h, w}, seed, -2, 2);
  auto d = t.mutable_data();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t p = 0; p < h * w; ++p) {
      double total = 0;
      for (std::size_t k = 0; k < c; ++k) total += std::exp(d[(b * c + k) * h * w + p]);
      for (std::size_t k = 0; k < c; ++k) {
        float& v = d[(b * c + k) * h * w + p];
        v = static_cast<float>(std::exp(v) / total);
      }
    }
  return t;
}

Tensor<float> maps(std::size_t c, std::size_t cls, std::size_t h, std::size_t w) {
  return uniform_maps(c, cls, h, w).reshaped(Shape{1, c, h, w});
}

/// Left half class a, right half class b.
Tensor<float> two_region_psi(std::size_t c, std::size_t h, std::size_t w, std::size_t a, std::size_t b) {
  Tensor<float> t(Shape{1, c, h, w});
  auto d = t.mutable_data();
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) d[((x < w / 2 ? a : b) * h + y) * w + x] = 1.0f;
  return t;
}

GeneratorConfig small_config(ConditioningMode mode, std::size_t classes = 3) {
  GeneratorConfig cfg;
  cfg.mode = mode;
  cfg.num_classes = classes;
  cfg.width = 8;
  cfg.blocks = 2;
  cfg.cond_hidden = 8;
  cfg.cond_channels = 6;
  cfg.seed = 17;
  return cfg;
}

/// Replace every parameter with a fresh uniform draw so no initialization
/// shortcut hides structural bugs.
template <typename T>
void randomize(ParameterSet<T>& params, std::uint64_t seed, double range = 0.3) {
  auto rng = RngStream::keyed(seed, "randomize");
  for (auto& p : params)
    for (auto& v : p.value.mutable_data()) v = static_cast<T>(rng.uniform(-range, range));
}

}  // namespace

TEST(SftApply, IdentityIsBitExact) {
  ad::Graph<float> g;
  const auto f = seeded(Shape{2, 4, 5, 5}, 1, -1e3, 1e3);
  const auto out = sft_apply(g.constant(f), {g.constant(Tensor<float>(f.shape(), 1.0f)),
                                            g.constant(Tensor<float>(f.shape(), 0.0f))});
  EXPECT_EQ(0, std::memcmp(out.value().data().data(), f.data().data(), f.numel() * sizeof(float)));
}

TEST(SftApply, ScalarAffineAndShapeError) {
  ad::Graph<float> g;
  const Shape s{1, 2, 3, 3};
  const auto out = sft_apply(g.constant(Tensor<float>(s, 2.0f)),
                             {g.constant(Tensor<float>(s, 3.0f)), g.constant(Tensor<float>(s, 1.0f))});
  for (float v : out.value().data()) EXPECT_EQ(v, 7.0f);
  EXPECT_THROW(sft_apply(g.constant(Tensor<float>(s)), {g.constant(Tensor<float>(Shape{1, 2, 3, 2})),
                                                        g.constant(Tensor<float>(s))}),
               ShapeError);
}

// Elementwise loop oracle over many seeded shapes.
TEST(SftApply, MatchesLoopOracle) {
  auto rng = RngStream::keyed(2, "sft-shapes");
  for (int trial = 0; trial < 100; ++trial) {
    const Shape s{1 + rng.below(2), 1 + rng.below(6), 1 + rng.below(7), 1 + rng.below(7)};
    const auto f = seeded(s, 3 * trial), ga = seeded(s, 3 * trial + 1), be = seeded(s, 3 * trial + 2);
    ad::Graph<float> g;
    const auto out = sft_apply(g.constant(f), {g.constant(ga), g.constant(be)});
    for (std::size_t i = 0; i < f.numel(); ++i) ASSERT_EQ(out.value()[i], ga[i] * f[i] + be[i]);
  }
}

TEST(SftLayer, ComposesHeadsAndApply) {
  ParameterSet<float> params;
  auto rng = RngStream::keyed(4, "sft-layer");
  const auto layer = make_sft_layer(params, "s", 6, 4, rng);
  randomize(params, 5);
  const auto f = seeded(Shape{1, 4, 5, 5}, 6), shared = seeded(Shape{1, 6, 5, 5}, 7);
  ad::Graph<float> g;
  Binding<float> bind(g, params, false);
  const auto direct = layer.forward(bind, g.constant(f), g.constant(shared));
  const auto mod = layer.modulation(bind, g.constant(shared));
  const auto manual = sft_apply(g.constant(f), mod);
  EXPECT_EQ(direct.value().data()[7], manual.value().data()[7]);
  for (std::size_t i = 0; i < f.numel(); ++i) ASSERT_EQ(direct.value()[i], manual.value()[i]);
  EXPECT_THROW(layer.forward(bind, g.constant(f), g.constant(Tensor<float>(Shape{1, 6, 4, 5}))), ShapeError);
}

TEST(SftLayer, DefaultHeadsGiveIdentity) {
  ParameterSet<float> params;
  auto rng = RngStream::keyed(4, "sft-layer");
  const auto layer = make_sft_layer(params, "s", 6, 4, rng);
  for (const char* name : {"s.gamma1.weight", "s.beta1.weight"})
    for (auto& v : params[*params.find(name)].value.mutable_data()) v = 0.0f;
  const auto f = seeded(Shape{1, 4, 5, 5}, 6);
  ad::Graph<float> g;
  Binding<float> bind(g, params, false);
  const auto out = layer.forward(bind, g.constant(f), g.constant(seeded(Shape{1, 6, 5, 5}, 7)));
  for (std::size_t i = 0; i < f.numel(); ++i) ASSERT_EQ(out.value()[i], f[i]);
}

TEST(SftLayer, FreshLayerIsNearIdentity) {
  ParameterSet<float> params;
  auto rng = RngStream::keyed(9, "sft-layer");
  const auto layer = make_sft_layer(params, "s", 32, 32, rng);
  const auto f = seeded(Shape{1, 32, 6, 6}, 10);
  ad::Graph<float> g;
  Binding<float> bind(g, params, false);
  const auto mod = layer.modulation(bind, g.constant(seeded(Shape{1, 32, 6, 6}, 11, 0, 1)));
  for (float v : mod.gamma.value().data()) EXPECT_NEAR(v, 1.0f, 0.05f);
  for (float v : mod.beta.value().data()) EXPECT_NEAR(v, 0.0f, 0.05f);
}

// A single-pixel change in the condition input reaches (gamma, beta) at that
// pixel only; all other positions stay bit-identical.
TEST(ConditionNetwork, LocalityThroughHeads) {
  ParameterSet<float> params;
  auto rng = RngStream::keyed(12, "cond");
  const auto net = make_condition_network(params, "cond", 4, 16, 6, rng);
  const auto layer = make_sft_layer(params, "s", 6, 5, rng);
  randomize(params, 13);
  const std::size_t H = 6, W = 7;
  auto psi = random_psi(1, 4, H, W, 14);
  auto psi2 = psi.clone();
  const std::size_t py = 2, px = 5;
  auto d = psi2.mutable_data();
  d[(0 * H + py) * W + px] = 1.0f;
  for (std::size_t k = 1; k < 4; ++k) d[(k * H + py) * W + px] = 0.0f;

  auto run = [&](const Tensor<float>& p) {
    ad::Graph<float> g;
    Binding<float> bind(g, params, false);
    const auto mod = layer.modulation(bind, net.forward(bind, g.constant(p)));
    return std::pair{mod.gamma.value().clone(), mod.beta.value().clone()};
  };
  const auto [g1, b1] = run(psi);
  const auto [g2, b2] = run(psi2);
  bool changed = false;
  for (std::size_t c = 0; c < 5; ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const std::size_t i = (c * H + y) * W + x;
        if (y == py && x == px) {
          changed |= g1[i] != g2[i] || b1[i] != b2[i];
        } else {
          ASSERT_EQ(g1[i], g2[i]);
          ASSERT_EQ(b1[i], b2[i]);
        }
      }
  EXPECT_TRUE(changed);
}

TEST(ConditionNetwork, ConstantInputConstantOutputAndShape) {
  ParameterSet<float> params;
  auto rng = RngStream::keyed(15, "cond");
  const auto net = make_condition_network(params, "cond", 8, 64, 32, rng);
  for (const auto& c : net.convs) EXPECT_EQ(c.kernel, 1u);
  ad::Graph<float> g;
  Binding<float> bind(g, params, false);
  const auto out = net.forward(bind, g.constant(maps(8, 3, 6, 6)));
  ASSERT_EQ(out.shape(), (Shape{1, 32, 6, 6}));
  for (std::size_t c = 0; c < 32; ++c)
    for (std::size_t p = 1; p < 36; ++p) ASSERT_EQ(out.value()[c * 36 + p], out.value()[c * 36]);
  EXPECT_THROW(net.forward(bind, g.constant(maps(7, 3, 6, 6))), ShapeError);
}

TEST(ResBlock, ZeroBodyIsIdentityWithSkipGradient) {
  ParameterSet<float> params;
  auto rng = RngStream::keyed(16, "block");
  const auto block = make_res_block(params, "b", BlockConditioning::sft, 32, 6, rng);
  for (auto& p : params)
    if (p.name.find(".conv") != std::string::npos)
      for (auto& v : p.value.mutable_data()) v = 0.0f;
  ad::Graph<float> g;
  Binding<float> bind(g, params, false);
  const auto f = seeded(Shape{1, 32, 6, 6}, 17);
  auto x = g.leaf(f.clone());
  const auto y = block.forward(bind, x, g.constant(seeded(Shape{1, 6, 6, 6}, 18)));
  ASSERT_EQ(y.shape(), f.shape());
  for (std::size_t i = 0; i < f.numel(); ++i) ASSERT_EQ(y.value()[i], f[i]);
  const auto upstream = seeded(f.shape(), 19);
  g.backward(ad::sum(ad::mul(y, g.constant(upstream))));
  const auto gx = g.grad(x);
  for (std::size_t i = 0; i < f.numel(); ++i) ASSERT_EQ(gx[i], upstream[i]);
  EXPECT_THROW(block.forward(bind, g.constant(Tensor<float>(Shape{1, 16, 6, 6})),
                             g.constant(seeded(Shape{1, 6, 6, 6}, 18))),
               ShapeError);
}

TEST(ResBlock, FreshBlockIsNearIdentity) {
  ParameterSet<float> params;
  auto rng = RngStream::keyed(20, "block");
  const auto block = make_res_block(params, "b", BlockConditioning::sft, 32, 32, rng);
  ad::Graph<float> g;
  Binding<float> bind(g, params, false);
  const auto f = seeded(Shape{1, 32, 6, 6}, 21, 0, 1);
  const auto y = block.forward(bind, g.constant(f), g.constant(seeded(Shape{1, 32, 6, 6}, 22, 0, 1)));
  double worst = 0;
  for (std::size_t i = 0; i < f.numel(); ++i) worst = std::max(worst, std::abs(double(y.value()[i]) - f[i]));
  EXPECT_LE(worst, 0.05);
}

TEST(Generator, ShapeContract) {
  const Generator gen(small_config(ConditioningMode::sft));
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{24, 24}, {17, 31}, {8, 8}}) {
    const auto out = gen.infer(seeded(Shape{1, 3, h, w}, 1, 0, 1), maps(3, 0, h, w));
    EXPECT_EQ(out.shape(), (Shape{1, 3, 4 * h, 4 * w}));
  }
}

TEST(Generator, DeterministicAndFiniteOnBackground) {
  const Generator gen(small_config(ConditioningMode::sft));
  const auto x = seeded(Shape{1, 3, 8, 8}, 2, 0, 1);
  const auto psi = maps(3, 2, 8, 8);
  const auto a = gen.infer(x, psi), b = gen.infer(x, psi);
  EXPECT_EQ(0, std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(float)));
  for (float v : a.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Generator, RejectsBadProbabilityMaps) {
  const Generator gen(small_config(ConditioningMode::sft));
  const auto x = seeded(Shape{1, 3, 8, 8}, 2, 0, 1);
  EXPECT_THROW(gen.infer(x, maps(4, 0, 8, 8)), ShapeError);
  EXPECT_THROW(gen.infer(x, maps(3, 0, 8, 9)), ShapeError);
  auto bad = maps(3, 0, 8, 8);
  bad.mutable_data()[0] = 0.5f;
  EXPECT_THROW(gen.infer(x, bad), std::invalid_argument);
  EXPECT_THROW(parse_mode("spade"), std::invalid_argument);
}

TEST(Generator, FilmModulationIsSpatiallyConstant) {
  Generator gen(small_config(ConditioningMode::film));
  randomize(gen.params(), 3);
  const auto trace = gen.modulation_maps(two_region_psi(3, 8, 8, 0, 1));
  ASSERT_EQ(trace.gamma.size(), gen.modulation_layers());
  for (const auto& gm : trace.gamma) {
    const std::size_t C = gm.shape()[1], P = gm.shape()[2] * gm.shape()[3];
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t p = 0; p < P; ++p) ASSERT_EQ(gm[c * P + p], gm[c * P]);
  }
}

TEST(Generator, SftGammaDiffersAcrossRegionsAndIsPiecewiseConstant) {
  Generator gen(small_config(ConditioningMode::sft));
  randomize(gen.params(), 4);
  const std::size_t H = 8, W = 8;
  const auto trace = gen.modulation_maps(two_region_psi(3, H, W, 0, 1));
  bool differs = false;
  for (const auto& gm : trace.gamma)
    for (std::size_t c = 0; c < gm.shape()[1]; ++c) {
      const float* m = gm.data().data() + c * H * W;
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) ASSERT_EQ(m[y * W + x], m[x < W / 2 ? 0 : W - 1]);
      differs |= m[0] != m[W - 1];
    }
  EXPECT_TRUE(differs);
}

// With a constant shared condition the spatial average is the condition
// itself, so FiLM and SFT heads with the same weights agree.
TEST(FilmModulation, MatchesSftOnConstantCondition) {
  ParameterSet<float> params;
  auto rng = RngStream::keyed(23, "film");
  const auto layer = make_sft_layer(params, "s", 5, 4, rng);
  randomize(params, 24);
  Tensor<float> shared(Shape{1, 5, 4, 4});
  for (std::size_t c = 0; c < 5; ++c)
    for (std::size_t p = 0; p < 16; ++p) shared.mutable_data()[c * 16 + p] = 0.1f * static_cast<float>(c) - 0.2f;
  ad::Graph<float> g;
  Binding<float> bind(g, params, false);
  const auto sft = layer.modulation(bind, g.constant(shared));
  const auto film = layer.film_modulation(bind, g.constant(shared));
  ASSERT_EQ(film.gamma.shape(), (Shape{1, 4, 1, 1}));
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t p = 0; p < 16; ++p) EXPECT_NEAR(sft.gamma.value()[c * 16 + p], film.gamma.value()[c], 1e-6);
}

// Average then affine, computed by hand in double.
TEST(FilmModulation, MatchesAverageThenHeadsOracle) {
  ParameterSet<float> params;
  auto rng = RngStream::keyed(25, "film");
  const auto layer = make_sft_layer(params, "s", 3, 2, rng);
  randomize(params, 26);
  const auto shared = seeded(Shape{1, 3, 3, 4}, 27);
  ad::Graph<float> g;
  Binding<float> bind(g, params, false);
  const auto film = layer.film_modulation(bind, g.constant(shared));
  const auto& w0 = params[layer.gamma_hidden.weight].value;
  const auto& b0 = params[layer.gamma_hidden.bias].value;
  const auto& w1 = params[layer.gamma_out.weight].value;
  const auto& b1 = params[layer.gamma_out.bias].value;
  double avg[3] = {};
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t p = 0; p < 12; ++p) avg[c] += shared[c * 12 + p];
    avg[c] /= 12;
  }
  double hidden[3];
  for (std::size_t o = 0; o < 3; ++o) {
    double a = b0[o];
    for (std::size_t c = 0; c < 3; ++c) a += w0[o * 3 + c] * avg[c];
    hidden[o] = a > 0 ? a : 0.2 * a;
  }
  for (std::size_t o = 0; o < 2; ++o) {
    double a = b1[o];
    for (std::size_t c = 0; c < 3; ++c) a += w1[o * 3 + c] * hidden[c];
    EXPECT_NEAR(film.gamma.value()[o], a, 1e-5);
  }
}

// With one-hot Psi for class k, the blended output does not depend on any
// other branch: scrambling them leaves the result unchanged.
TEST(Generator, CompositionalOneHotSelectsBranch) {
  Generator gen(small_config(ConditioningMode::compositional));
  const auto x = seeded(Shape{1, 3, 8, 8}, 5, 0, 1);
  const auto psi = maps(3, 1, 8, 8);
  const auto before = gen.infer(x, psi);
  auto rng = RngStream::keyed(6, "scramble");
  for (auto& p : gen.params())
    if (p.name.rfind("branch0.", 0) == 0 || p.name.rfind("branch2.", 0) == 0)
      for (auto& v : p.value.mutable_data()) v = static_cast<float>(rng.uniform(-1, 1));
  const auto after = gen.infer(x, psi);
  for (std::size_t i = 0; i < before.numel(); ++i) ASSERT_EQ(before[i], after[i]);
  for (auto& p : gen.params())
    if (p.name.rfind("branch1.", 0) == 0)
      for (auto& v : p.value.mutable_data()) v = static_cast<float>(rng.uniform(-1, 1));
  EXPECT_NE(gen.infer(x, psi)[0], before[0]);
}

TEST(Generator, ParameterCountOrdering) {
  GeneratorConfig cfg;
  cfg.blocks = 8;
  auto count = [&](ConditioningMode m) {
    cfg.mode = m;
    return Generator(cfg).params().scalar_count();
  };
  const auto comp = count(ConditioningMode::compositional), sft = count(ConditioningMode::sft),
             concat = count(ConditioningMode::input_concat);
  EXPECT_GT(comp, sft);
  EXPECT_GT(sft, concat);
}

TEST(Generator, ModeNamesAndNoneIgnoresPsi) {
  for (auto m : {ConditioningMode::sft, ConditioningMode::input_concat, ConditioningMode::film,
                 ConditioningMode::compositional, ConditioningMode::none})
    EXPECT_EQ(parse_mode(to_string(m)), m);
  const Generator gen(small_config(ConditioningMode::none));
  const auto x = seeded(Shape{1, 3, 8, 8}, 7, 0, 1);
  const auto a = gen.infer(x, maps(3, 0, 8, 8)), b = gen.infer(x, maps(3, 2, 8, 8));
  for (std::size_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a[i], b[i]);
  EXPECT_EQ(gen.modulation_layers(), 0u);
}

TEST(Generator, SftAndFilmParameterNamesDiffer) {
  const Generator sft(small_config(ConditioningMode::sft)), film(small_config(ConditioningMode::film));
  EXPECT_TRUE(sft.params().find("block0.sft0.gamma1.weight").has_value());
  EXPECT_TRUE(film.params().find("block0.film0.gamma1.weight").has_value());
}

TEST(Generator, GradientReachesPsi) {
  Generator gen(small_config(ConditioningMode::sft));
  randomize(gen.params(), 8);
  ad::Graph<float> g;
  Binding<float> bind(g, gen.params());
  auto psi = g.leaf(random_psi(1, 3, 8, 8, 9));
  const auto y = gen.forward(bind, g.constant(seeded(Shape{1, 3, 8, 8}, 10, 0, 1)), psi);
  g.backward(ad::mean(y));
  const auto gp = g.grad(psi);
  EXPECT_TRUE(std::any_of(gp.data().begin(), gp.data().end(), [](float v) { return v != 0.0f; }));
  const auto grads = bind.gradients();
  const auto id = *gen.params().find("cond.conv0.weight");
  EXPECT_TRUE(std::any_of(grads[id].data().begin(), grads[id].data().end(), [](float v) { return v != 0.0f; }));
}

DiscriminatorConfig small_disc() {
  DiscriminatorConfig cfg;
  cfg.num_classes = 3;
  cfg.hr_size = 16;
  cfg.channels = {4, 4, 6};
  cfg.strides = {1, 2, 2};
  cfg.seed = 3;
  return cfg;
}

TEST(Discriminator, ProbabilityAndClassNormalization) {
  const Discriminator d(small_disc());
  ad::Graph<float> g;
  Binding<float> bind(g, d.params(), false);
  for (double range : {1.0, 1e3}) {
    const auto out = d.forward(bind, g.constant(seeded(Shape{2, 3, 16, 16}, 11, -range, range)));
    ASSERT_EQ(out.prob.shape(), (Shape{2}));
    ASSERT_EQ(out.class_log_probs.shape(), (Shape{2, 3}));
    for (float p : out.prob.value().data()) {
      EXPECT_GT(p, 0.0f);
      EXPECT_LT(p, 1.0f);
    }
    for (std::size_t n = 0; n < 2; ++n) {
      double s = 0;
      for (std::size_t k = 0; k < 3; ++k) s += std::exp(double(out.class_log_probs.value()[n * 3 + k]));
      EXPECT_NEAR(s, 1.0, 1e-5);
    }
  }
  EXPECT_THROW(d.forward(bind, g.constant(Tensor<float>(Shape{1, 3, 24, 24}))), ShapeError);
}

// Regression fixture: seeded default-plan discriminator on a seeded input.
TEST(Discriminator, GoldenFixture) {
  DiscriminatorConfig cfg;
  cfg.num_classes = 3;
  cfg.hr_size = 32;
  cfg.seed = 42;
  const Discriminator d(cfg);
  ad::Graph<float> g;
  Binding<float> bind(g, d.params(), false);
  const auto out = d.forward(bind, g.constant(seeded(Shape{1, 3, 32, 32}, 43, 0, 1)));
  EXPECT_NEAR(out.logit.value()[0], kGoldenLogit, 1e-5);
  EXPECT_NEAR(out.class_log_probs.value()[0], kGoldenClass0, 1e-5);
}

TEST(FeatureNet, FrozenDeterministicAndInjective) {
  const FeatureNet phi(7);
  EXPECT_EQ(phi.stride(), 8u);
  EXPECT_EQ(phi.params().scalar_count(true), 0u);
  const auto img = seeded(Shape{1, 3, 16, 24}, 12, 0, 1);
  auto run = [&phi](const Tensor<float>& x) {
    ad::Graph<float> g;
    Binding<float> bind(g, phi.params());
    return phi.forward(bind, g.constant(x)).value().clone();
  };
  const auto a = run(img), b = run(img);
  ASSERT_EQ(a.shape(), (Shape{1, 64, 2, 3}));
  for (std::size_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a[i], b[i]);
  auto img2 = img.clone();
  img2.mutable_data()[5 * 24 + 7] += 0.25f;
  const auto c = run(img2);
  bool differ = false;
  for (std::size_t i = 0; i < a.numel(); ++i) differ |= a[i] != c[i];
  EXPECT_TRUE(differ);
  ad::Graph<float> g;
  Binding<float> bind(g, phi.params());
  EXPECT_THROW(phi.forward(bind, g.constant(Tensor<float>(Shape{1, 3, 12, 16}))), ShapeError);
}

TEST(FeatureNet, GradientFlowsToImageOnly) {
  const FeatureNet phi(7);
  ad::Graph<float> g;
  Binding<float> bind(g, phi.params());
  auto img = g.leaf(seeded(Shape{1, 3, 8, 8}, 13, 0, 1));
  g.backward(ad::mean(phi.forward(bind, img)));
  const auto gi = g.grad(img);
  EXPECT_TRUE(std::any_of(gi.data().begin(), gi.data().end(), [](float v) { return v != 0.0f; }));
  for (const auto& gp : bind.gradients())
    for (float v : gp.data()) ASSERT_EQ(v, 0.0f);
}
