#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "sftgan/datagen.hpp"
#include "sftgan/metrics.hpp"
#include "sftgan/ppm.hpp"
#include "sftgan/tensor_file.hpp"

using namespace sftgan;

namespace {

constexpr double kSkyGrassSignatureThreshold = 2.3;

Tensor<float> noisy(const Tensor<float>& base, double amplitude, std::uint64_t seed) {
  auto rng = RngStream::keyed(seed, "metrics-noise");
  auto out = base.clone();
  for (auto& v : out.mutable_data()) v += static_cast<float>(rng.uniform(-amplitude, amplitude));
  return out;
}

Tensor<float> two_region_psi(std::size_t c, std::size_t h, std::size_t w, std::size_t a, std::size_t b) {
  Tensor<float> t(Shape{1, c, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) t.mutable_data()[((x < w / 2 ? a : b) * h + y) * w + x] = 1.0f;
  return t;
}

GeneratorConfig small_config() {
  GeneratorConfig cfg;
  cfg.num_classes = 3;
  cfg.width = 8;
  cfg.blocks = 2;
  cfg.cond_hidden = 8;
  cfg.cond_channels = 6;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST(Psnr, CapUniformErrorAndSymmetry) {
  const auto a = synth_texture(TextureKind::water, 16, 16, 1);
  EXPECT_EQ(psnr(a, a), 99.0);
  Tensor<float> z(Shape{3, 8, 8}, 0.0f), e(Shape{3, 8, 8}, 0.1f);
  EXPECT_NEAR(psnr(z, e), 20.0, 1e-5);
  const auto b = noisy(a, 0.05, 2);
  EXPECT_EQ(psnr(a, b), psnr(b, a));
  EXPECT_THROW(psnr(a, Tensor<float>(Shape{3, 16, 8})), ShapeError);
}

TEST(Psnr, DecreasesAlongNoiseLadder) {
  const auto a = synth_texture(TextureKind::plant, 32, 32, 3);
  double prev = psnr(a, a);
  for (double amp : {0.001, 0.01, 0.03, 0.1, 0.3}) {
    const double p = psnr(a, noisy(a, amp, 4));
    EXPECT_LT(p, prev) << amp;
    prev = p;
  }
}

TEST(TextureSignature, ConstantImageAndNormalization) {
  const auto s = texture_signature(Tensor<float>(Shape{3, 12, 12}, 0.4f));
  ASSERT_EQ(s.magnitude.size(), kMagnitudeBins);
  ASSERT_EQ(s.orientation.size(), kOrientationBins);
  EXPECT_EQ(s.magnitude[0], 1.0);
  EXPECT_EQ(s.orientation[0], 1.0);
  const auto t = texture_signature(synth_texture(TextureKind::animal, 24, 24, 5));
  double m = 0, o = 0;
  for (double v : t.magnitude) m += v;
  for (double v : t.orientation) o += v;
  EXPECT_NEAR(m, 1.0, 1e-12);
  EXPECT_NEAR(o, 1.0, 1e-12);
}

TEST(TextureSignature, MaskSelectsPixelsAndEmptyMaskThrows) {
  Tensor<float> img(Shape{3, 8, 16}, 0.5f);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 8; x < 16; ++x) img.mutable_data()[(c * 8 + y) * 16 + x] = (x + y) % 2 ? 0.9f : 0.1f;
  std::vector<std::uint8_t> left(8 * 16, 0);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 6; ++x) left[y * 16 + x] = 1;
  EXPECT_EQ(texture_signature(img, left).magnitude[0], 1.0);
  std::vector<std::uint8_t> none(8 * 16, 0);
  EXPECT_THROW(texture_signature(img, none), std::invalid_argument);
}

TEST(SignatureDistance, Examples) {
  TextureSignature a{std::vector<double>(32, 0.0), std::vector<double>(16, 0.0)};
  auto b = a;
  a.magnitude[0] = 1;
  a.orientation[0] = 1;
  b.magnitude[5] = 1;
  b.orientation[3] = 1;
  EXPECT_EQ(signature_distance(a, a), 0.0);
  EXPECT_NEAR(signature_distance(a, b), 4.0, 1e-9);
  EXPECT_EQ(signature_distance(a, b), signature_distance(b, a));
  auto wrong = b;
  wrong.magnitude.resize(8);
  EXPECT_THROW(signature_distance(a, wrong), std::invalid_argument);
}

// flat, lightly perturbed, heavily perturbed: distances from flat increase.
TEST(SignatureDistance, OrderedOnThreeFixtures) {
  const Tensor<float> flat(Shape{3, 32, 32}, 0.5f);
  const auto light = noisy(flat, 0.01, 6), heavy = noisy(flat, 0.2, 7);
  const auto s0 = texture_signature(flat), s1 = texture_signature(light), s2 = texture_signature(heavy);
  EXPECT_LT(signature_distance(s0, s1), signature_distance(s0, s2));
  EXPECT_LT(signature_distance(s1, s2), signature_distance(s0, s2));
}

TEST(SignatureDistance, SkyGrassAboveFixtureThreshold) {
  const auto sky = texture_signature(synth_texture(TextureKind::sky, 32, 32, 8));
  const auto grass = texture_signature(synth_texture(TextureKind::grass, 32, 32, 8));
  EXPECT_GT(signature_distance(sky, grass), kSkyGrassSignatureThreshold);
}

// Independent draws: a different category is always farther than another
// draw of the same category.
TEST(SignatureDistance, CategoriesSeparateOnHundredDraws) {
  int violations = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto sky = texture_signature(synth_texture(TextureKind::sky, 32, 32, 2 * i));
    const auto sky2 = texture_signature(synth_texture(TextureKind::sky, 32, 32, 2 * i + 1));
    const auto grass = texture_signature(synth_texture(TextureKind::grass, 32, 32, 5000 + i));
    violations += signature_distance(sky, grass) <= signature_distance(sky, sky2);
  }
  EXPECT_EQ(violations, 0);
}

TEST(ModulationMaps, CountPiecewiseConstantAndIndependentOfInput) {
  Generator gen(small_config());
  auto rng = RngStream::keyed(9, "randomize");
  for (auto& p : gen.params())
    for (auto& v : p.value.mutable_data()) v = static_cast<float>(rng.uniform(-0.3, 0.3));
  const auto psi = two_region_psi(3, 8, 8, 0, 1);
  const Tensor<float> x1(Shape{1, 3, 8, 8}, 0.2f);
  const auto x2 = noisy(x1, 0.1, 10);
  const auto maps = export_modulation_maps(gen, x1, psi, {0, 2}, 3);
  ASSERT_EQ(maps.size(), 2u * 2u * 3u);
  for (const auto& m : maps) {
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x) ASSERT_EQ(m.gray[y * 8 + x], m.gray[x < 4 ? 0 : 7]);
  }
  const auto again = export_modulation_maps(gen, x2, psi, {0, 2}, 3);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    EXPECT_EQ(maps[i].channel, again[i].channel);
    EXPECT_EQ(maps[i].gray, again[i].gray);
  }
  const auto t1 = gen.modulation_maps(psi);
  ModulationTrace t2;
  gen.infer(x2, psi, &t2);
  for (std::size_t l = 0; l < t1.gamma.size(); ++l) {
    ASSERT_EQ(0, std::memcmp(t1.gamma[l].data().data(), t2.gamma[l].data().data(), t1.gamma[l].numel() * 4));
    ASSERT_EQ(0, std::memcmp(t1.beta[l].data().data(), t2.beta[l].data().data(), t1.beta[l].numel() * 4));
  }
  EXPECT_THROW(export_modulation_maps(gen, x1, psi, {4}, 1), std::out_of_range);
}

TEST(ModulationMaps, IdentityHeadsRenderMidGray) {
  Generator gen(small_config());
  for (auto& p : gen.params())
    if (p.name.find("gamma1.weight") != std::string::npos || p.name.find("beta1.weight") != std::string::npos)
      for (auto& v : p.value.mutable_data()) v = 0.0f;
  const auto maps = export_modulation_maps(gen, Tensor<float>(Shape{1, 3, 8, 8}, 0.5f), two_region_psi(3, 8, 8, 0, 2),
                                           {1}, 2);
  ASSERT_EQ(maps.size(), 4u);
  for (const auto& m : maps) {
    EXPECT_EQ(m.variance, 0.0);
    for (auto g : m.gray) ASSERT_EQ(g, 128);
  }
  const float vals[3] = {1.0f, 2.0f, 3.0f};
  EXPECT_EQ(normalize_to_gray(vals), (std::vector<std::uint8_t>{0, 128, 255}));
}

TEST(MetricsReport, LabelsProxyAndHasHeader) {
  std::ostringstream os;
  write_metrics_report(os, {{"img0", "sky", "sft", 99.0, 0.0}});
  const auto text = os.str();
  EXPECT_NE(text.find("proxy"), std::string::npos);
  EXPECT_NE(text.find("image_id,category,model,psnr,signature_distance"), std::string::npos);
  EXPECT_NE(text.find("img0,sky,sft,99"), std::string::npos);
}

TEST(Ppm, RoundTripAndTensorConversion) {
  PpmImage img{5, 3, {}};
  for (std::size_t i = 0; i < 45; ++i) img.rgb.push_back(static_cast<std::uint8_t>(i * 37 % 256));
  std::stringstream ss;
  write_ppm(ss, img);
  EXPECT_EQ(ss.str().substr(0, 2), "P6");
  EXPECT_EQ(read_ppm(ss), img);
  EXPECT_EQ(tensor_to_ppm(ppm_to_tensor(img)), img);
  std::istringstream commented("P6\n# note\n1 1\n255\nabc");
  const auto one = read_ppm(commented);
  EXPECT_EQ(one.rgb, (std::vector<std::uint8_t>{'a', 'b', 'c'}));
}

TEST(Ppm, MalformedInputsAreRejected) {
  for (const std::string bad : {"P3\n1 1\n255\n1 2 3", "P6\n1 1\n65535\nabcdef", "P6\n2 2\n255\nabc", "P6\n-1 1\n255\n",
                                 "", "P6\n1"}) {
    std::istringstream in(bad);
    EXPECT_THROW(read_ppm(in), FormatError) << bad;
  }
}

TEST(TensorFileIo, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "sftgan_metrics_io.sftb";
  const auto t = synth_texture(TextureKind::mountain, 8, 12, 1);
  save_tensor(path, t);
  const auto back = load_tensor(path);
  ASSERT_EQ(back.shape(), t.shape());
  EXPECT_EQ(0, std::memcmp(back.data().data(), t.data().data(), t.numel() * 4));
}
