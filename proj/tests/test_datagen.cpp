#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <array>
#include <cstring>
#include <numbers>

#include "sftgan/datagen.hpp"

using namespace sftgan;

namespace {

constexpr double kSkyGrassThreshold = 0.02;

/// Mean absolute forward difference of the channel-mean image.
double mean_abs_gradient(const Tensor<float>& img) {
  const std::size_t H = img.shape()[1], W = img.shape()[2];
  auto luma = [&](std::size_t y, std::size_t x) {
    return (img[y * W + x] + img[H * W + y * W + x] + img[2 * H * W + y * W + x]) / 3.0;
  };
  double total = 0;
  for (std::size_t y = 0; y + 1 < H; ++y)
    for (std::size_t x = 0; x + 1 < W; ++x)
      total += std::abs(luma(y, x + 1) - luma(y, x)) + std::abs(luma(y + 1, x) - luma(y, x));
  return total / static_cast<double>((H - 1) * (W - 1));
}

/// Entropy of the magnitude-weighted gradient orientation histogram (16 bins).
double orientation_entropy(const Tensor<float>& img) {
  const std::size_t H = img.shape()[1], W = img.shape()[2];
  auto luma = [&](std::size_t y, std::size_t x) {
    return (img[y * W + x] + img[H * W + y * W + x] + img[2 * H * W + y * W + x]) / 3.0;
  };
  double hist[16] = {};
  double mass = 0;
  for (std::size_t y = 0; y + 1 < H; ++y)
    for (std::size_t x = 0; x + 1 < W; ++x) {
      const double gx = luma(y, x + 1) - luma(y, x), gy = luma(y + 1, x) - luma(y, x);
      const double m = std::hypot(gx, gy);
      double a = std::atan2(gy, gx);
      if (a < 0) a += std::numbers::pi;
      hist[std::min<std::size_t>(15, static_cast<std::size_t>(a / std::numbers::pi * 16))] += m;
      mass += m;
    }
  double e = 0;
  for (double h : hist)
    if (h > 0) e -= h / mass * std::log(h / mass);
  return e;
}

/// Separable cubic-convolution matrix built directly from the kernel formula
/// with half-sample mirroring, rows normalized to one.
std::vector<std::vector<double>> dense_downsample_matrix(std::size_t n, std::size_t s) {
  std::vector<std::vector<double>> m(n / s, std::vector<double>(n, 0.0));
  auto kernel = [](double x) {
    x = std::abs(x);
    const double a = -0.5;
    if (x <= 1) return (a + 2) * x * x * x - (a + 3) * x * x + 1;
    if (x < 2) return a * x * x * x - 5 * a * x * x + 8 * a * x - 4 * a;
    return 0.0;
  };
  for (std::size_t i = 0; i < n / s; ++i) {
    const double u = (static_cast<double>(i) + 0.5) * static_cast<double>(s) - 0.5;
    double total = 0;
    for (long j = static_cast<long>(std::floor(u - 2.0 * s)); j <= static_cast<long>(std::ceil(u + 2.0 * s)); ++j) {
      if (std::abs(u - j) >= 2.0 * s) continue;
      const double w = kernel((u - j) / s) / s;
      long k = j;
      while (k < 0 || k >= static_cast<long>(n)) k = k < 0 ? -k - 1 : 2 * static_cast<long>(n) - k - 1;
      m[i][static_cast<std::size_t>(k)] += w;
      total += w;
    }
    for (auto& v : m[i]) v /= total;
  }
  return m;
}

SceneSpec spec_for(std::uint64_t seed, std::size_t size = 32) {
  SceneSpec s;
  s.height = s.width = size;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(SynthTexture, DeterministicAndInRange) {
  for (auto kind : kAllCategories) {
    const auto a = synth_texture(kind, 16, 24, 5), b = synth_texture(kind, 16, 24, 5);
    ASSERT_EQ(a.shape(), (Shape{3, 16, 24}));
    EXPECT_EQ(0, std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(float)));
    for (float v : a.data()) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
    const auto c = synth_texture(kind, 16, 24, 6);
    EXPECT_NE(0, std::memcmp(a.data().data(), c.data().data(), a.numel() * sizeof(float)));
  }
  EXPECT_THROW(synth_texture(TextureKind::sky, 4, 16, 0), std::invalid_argument);
  EXPECT_THROW(parse_texture_kind("cloud"), std::invalid_argument);
  for (auto kind : kAllCategories) EXPECT_EQ(parse_texture_kind(to_string(kind)), kind);
}

// Fixture threshold between the two families, measured on seeds 0..9.
TEST(SynthTexture, SkyIsSmootherThanGrass) {
  constexpr double kThreshold = kSkyGrassThreshold;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double sky = mean_abs_gradient(synth_texture(TextureKind::sky, 32, 32, seed));
    const double grass = mean_abs_gradient(synth_texture(TextureKind::grass, 32, 32, seed));
    EXPECT_LT(sky, kThreshold) << seed;
    EXPECT_GT(grass, kThreshold) << seed;
  }
}

// Fisher discriminant on (mean |gradient|, orientation entropy) fitted on
// 50 sky and 50 grass patches must classify all 100 correctly.
TEST(SynthTexture, SkyGrassLinearlySeparable) {
  std::vector<std::array<double, 2>> feats[2];
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (int c = 0; c < 2; ++c) {
      const auto img = synth_texture(c == 0 ? TextureKind::sky : TextureKind::grass, 32, 32, 1000 + seed);
      feats[c].push_back({mean_abs_gradient(img), orientation_entropy(img)});
    }
  }
  double mu[2][2] = {}, sw[2][2] = {};
  for (int c = 0; c < 2; ++c) {
    for (const auto& f : feats[c])
      for (int d = 0; d < 2; ++d) mu[c][d] += f[d] / 50.0;
    for (const auto& f : feats[c])
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) sw[a][b] += (f[a] - mu[c][a]) * (f[b] - mu[c][b]);
  }
  sw[0][0] += 1e-12;
  sw[1][1] += 1e-12;
  const double det = sw[0][0] * sw[1][1] - sw[0][1] * sw[1][0];
  const double dm[2] = {mu[1][0] - mu[0][0], mu[1][1] - mu[0][1]};
  const double w[2] = {(sw[1][1] * dm[0] - sw[0][1] * dm[1]) / det, (-sw[1][0] * dm[0] + sw[0][0] * dm[1]) / det};
  std::vector<double> proj[2];
  for (int c = 0; c < 2; ++c)
    for (const auto& f : feats[c]) proj[c].push_back(w[0] * f[0] + w[1] * f[1]);
  const double max_sky = *std::max_element(proj[0].begin(), proj[0].end());
  const double min_grass = *std::min_element(proj[1].begin(), proj[1].end());
  EXPECT_LT(max_sky, min_grass);
}

TEST(BicubicKernel, Values) {
  EXPECT_EQ(bicubic_kernel(0.0), 1.0);
  EXPECT_EQ(bicubic_kernel(1.0), 0.0);
  EXPECT_EQ(bicubic_kernel(2.0), 0.0);
  EXPECT_EQ(bicubic_kernel(-1.0), 0.0);
  EXPECT_NEAR(bicubic_kernel(0.5), 0.5625, 1e-12);
  EXPECT_EQ(bicubic_kernel(2.5), 0.0);
}

TEST(BicubicDownsample, ConstantAndIdentity) {
  const Tensor<float> c(Shape{3, 16, 12}, 0.37f);
  const auto lr = bicubic_downsample(c, 4);
  ASSERT_EQ(lr.shape(), (Shape{3, 4, 3}));
  for (float v : lr.data()) EXPECT_NEAR(v, 0.37f, 1e-6);
  const auto img = synth_texture(TextureKind::mountain, 8, 8, 3);
  const auto same = bicubic_downsample(img, 1);
  for (std::size_t i = 0; i < img.numel(); ++i) EXPECT_NEAR(same[i], img[i], 1e-6);
  EXPECT_THROW(bicubic_downsample(Tensor<float>(Shape{3, 10, 8}), 4), std::invalid_argument);
}

TEST(BicubicDownsample, MatchesDenseMatrixOracle) {
  const auto img = synth_texture(TextureKind::building, 16, 16, 4);
  const auto lr = bicubic_downsample(img, 4);
  const auto m = dense_downsample_matrix(16, 4);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        double v = 0;
        for (std::size_t y = 0; y < 16; ++y)
          for (std::size_t x = 0; x < 16; ++x) v += m[i][y] * m[j][x] * img[(c * 16 + y) * 16 + x];
        EXPECT_NEAR(lr[(c * 4 + i) * 4 + j], v, 1e-5);
      }
}

TEST(BicubicDownsample, TapWeightsSumToOne) {
  for (std::size_t s : {1, 2, 3, 4}) {
    for (const auto& t : downsample_taps(12 * s, s)) {
      double total = 0;
      for (double w : t.weight) total += w;
      EXPECT_NEAR(total, 1.0, 1e-6);
      for (std::size_t k : t.index) EXPECT_LT(k, 12 * s);
    }
  }
}

// Blocks replicated by nearest upsampling come back exactly where the
// surrounding LR neighbourhood is constant (the kernel support spans two LR
// pixels either side).
TEST(BicubicDownsample, UndoesNearestUpsampleOnFlatNeighbourhoods) {
  const std::size_t s = 4, n = 12;
  Tensor<float> lr(Shape{1, n, n});
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) lr.mutable_data()[y * n + x] = (y / 6 + x / 6) % 2 ? 0.8f : 0.2f;
  Tensor<float> hr(Shape{1, n * s, n * s});
  for (std::size_t y = 0; y < n * s; ++y)
    for (std::size_t x = 0; x < n * s; ++x) hr.mutable_data()[y * n * s + x] = lr[(y / s) * n + x / s];
  const auto back = bicubic_downsample(hr, s);
  std::size_t checked = 0;
  for (long y = 0; y < static_cast<long>(n); ++y)
    for (long x = 0; x < static_cast<long>(n); ++x) {
      bool flat = true;
      for (long dy = -2; dy <= 2; ++dy)
        for (long dx = -2; dx <= 2; ++dx) {
          const long yy = std::clamp(y + dy, 0L, long(n) - 1), xx = std::clamp(x + dx, 0L, long(n) - 1);
          flat &= lr[yy * n + xx] == lr[y * n + x];
        }
      if (!flat) continue;
      ++checked;
      EXPECT_NEAR(back[y * n + x], lr[y * n + x], 1e-3);
    }
  EXPECT_GT(checked, 20u);
}

TEST(Soften, SigmaZeroIsIdentityAndSumsToOne) {
  const auto scene = compose_scene(spec_for(3));
  const auto same = soften_segmentation(scene.onehot, 0.0);
  EXPECT_EQ(0, std::memcmp(same.data().data(), scene.onehot.data().data(), same.numel() * sizeof(float)));
  const std::size_t C = scene.onehot.shape()[0], P = 32 * 32;
  for (double sigma : {0.5, 1.0, 2.0, 3.7}) {
    const auto soft = soften_segmentation(scene.onehot, sigma);
    for (std::size_t p = 0; p < P; ++p) {
      double total = 0;
      for (std::size_t c = 0; c < C; ++c) total += soft[c * P + p];
      ASSERT_NEAR(total, 1.0, 1e-5);
    }
  }
  EXPECT_THROW(soften_segmentation(scene.onehot, -1.0), std::invalid_argument);
}

// Half-plane fixture against a brute-force 2D Gaussian sum.
TEST(Soften, MatchesBruteForceAndKeepsInteriorConfident) {
  const std::size_t H = 24, W = 40;
  Tensor<float> onehot(Shape{2, H, W});
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) onehot.mutable_data()[(x < 17 ? 0 : 1) * H * W + y * W + x] = 1.0f;
  const double sigma = 2.0;
  const auto soft = soften_segmentation(onehot, sigma);
  const long r = static_cast<long>(std::ceil(3 * sigma));
  for (long y = 0; y < long(H); ++y)
    for (long x = 0; x < long(W); ++x) {
      double b[2] = {};
      for (long dy = -r; dy <= r; ++dy)
        for (long dx = -r; dx <= r; ++dx) {
          const long yy = y + dy, xx = x + dx;
          if (yy < 0 || xx < 0 || yy >= long(H) || xx >= long(W)) continue;
          const double w = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
          for (int c = 0; c < 2; ++c) b[c] += w * onehot[(c * H + yy) * W + xx];
        }
      const double p0 = b[0] / (b[0] + b[1]);
      EXPECT_NEAR(soft[y * W + x], p0, 1e-5);
      const double dist = x < 17 ? 17 - x - 0.5 : x - 17 + 0.5;
      if (dist >= 4 * sigma) EXPECT_GE(soft[((x < 17 ? 0 : 1) * H + y) * W + x], 0.99f);
    }
}

TEST(ComposeScene, InvariantsOnThousandSeeds) {
  const double sigma = 2.0;
  const long r = static_cast<long>(std::ceil(3 * sigma));
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto spec = spec_for(seed);
    spec.layout = seed % 3 == 0 ? LayoutKind::half_plane : seed % 3 == 1 ? LayoutKind::voronoi : LayoutKind::single;
    const auto sc = compose_scene(spec);
    const std::size_t C = spec.num_classes(), H = 32, W = 32, P = H * W;
    ASSERT_EQ(sc.onehot.shape(), (Shape{C, H, W}));
    ASSERT_EQ(sc.lr.shape(), (Shape{3, 8, 8}));
    ASSERT_EQ(sc.lr_psi.shape(), (Shape{C, 8, 8}));
    for (float v : sc.hr.data()) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
    for (std::size_t p = 0; p < P; ++p) {
      double one = 0, soft = 0;
      std::size_t argmax = 0;
      for (std::size_t c = 0; c < C; ++c) {
        const float o = sc.onehot[c * P + p];
        ASSERT_TRUE(o == 0.0f || o == 1.0f);
        one += o;
        soft += sc.soft[c * P + p];
        if (sc.soft[c * P + p] > sc.soft[argmax * P + p]) argmax = c;
      }
      ASSERT_EQ(one, 1.0);
      ASSERT_NEAR(soft, 1.0, 1e-5);
      ASSERT_EQ(sc.onehot[sc.labels[p] * P + p], 1.0f);
      const long y = long(p / W), x = long(p % W);
      bool interior = true;
      for (long dy = -r; dy <= r && interior; ++dy)
        for (long dx = -r; dx <= r; ++dx) {
          const long yy = y + dy, xx = x + dx;
          if (yy < 0 || xx < 0 || yy >= long(H) || xx >= long(W)) continue;
          if (sc.labels[yy * W + xx] != sc.labels[p]) {
            interior = false;
            break;
          }
        }
      if (interior) ASSERT_EQ(argmax, sc.labels[p]) << "seed " << seed;
    }
    for (std::size_t p = 0; p < 64; ++p) {
      double total = 0;
      for (std::size_t c = 0; c < C; ++c) total += sc.lr_psi[c * 64 + p];
      ASSERT_NEAR(total, 1.0, 1e-5);
    }
  }
}

TEST(ComposeScene, SingleRegionAndDeterminism) {
  auto spec = spec_for(7);
  spec.layout = LayoutKind::single;
  spec.single_class = 3;
  const auto sc = compose_scene(spec);
  for (std::size_t p = 0; p < 32 * 32; ++p) {
    ASSERT_EQ(sc.labels[p], 3u);
    ASSERT_EQ(sc.soft[3 * 32 * 32 + p], 1.0f);
  }
  EXPECT_EQ(scene_hash(compose_scene(spec_for(9))), scene_hash(compose_scene(spec_for(9))));
  EXPECT_NE(scene_hash(compose_scene(spec_for(9))), scene_hash(compose_scene(spec_for(10))));
  auto bad = spec_for(1);
  bad.height = 30;
  EXPECT_THROW(compose_scene(bad), std::invalid_argument);
  bad = spec_for(1);
  bad.categories.clear();
  EXPECT_THROW(compose_scene(bad), std::invalid_argument);
}

TEST(TrainingPair, AlignedCropsAndReproducibleCoordinates) {
  const auto sc = compose_scene(spec_for(11, 64));
  for (int trial = 0; trial < 20; ++trial) {
    auto rng = RngStream::keyed(trial, "crop");
    const auto tp = sample_training_pair(sc, 32, rng);
    ASSERT_EQ(tp.hr_y % 4, 0u);
    ASSERT_EQ(tp.hr_x % 4, 0u);
    const auto hr = crop(sc.hr, tp.hr_y, tp.hr_x, 32, 32);
    const auto lr = crop(sc.lr, tp.hr_y / 4, tp.hr_x / 4, 8, 8);
    const auto psi = crop(sc.lr_psi, tp.hr_y / 4, tp.hr_x / 4, 8, 8);
    EXPECT_EQ(0, std::memcmp(hr.data().data(), tp.hr.data().data(), hr.numel() * sizeof(float)));
    EXPECT_EQ(0, std::memcmp(lr.data().data(), tp.lr.data().data(), lr.numel() * sizeof(float)));
    EXPECT_EQ(0, std::memcmp(psi.data().data(), tp.psi.data().data(), psi.numel() * sizeof(float)));
    auto rng2 = RngStream::keyed(trial, "crop");
    const auto again = sample_training_pair(sc, 32, rng2);
    EXPECT_EQ(again.hr_y, tp.hr_y);
    EXPECT_EQ(again.hr_x, tp.hr_x);
  }
  auto rng = RngStream::keyed(0, "crop");
  EXPECT_THROW(sample_training_pair(sc, 128, rng), std::invalid_argument);
}

TEST(TrainingPair, SingleCategoryCropsArePure) {
  auto spec = spec_for(12, 64);
  spec.layout = LayoutKind::half_plane;
  const auto sc = compose_scene(spec);
  for (int trial = 0; trial < 20; ++trial) {
    auto rng = RngStream::keyed(trial, "pure");
    const auto tp = sample_training_pair(sc, 16, rng, true);
    EXPECT_EQ(tp.purity, 1.0);
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) ASSERT_EQ(sc.labels[(tp.hr_y + y) * 64 + tp.hr_x + x], tp.label);
  }
}

TEST(NearestDownsample, PreservesChannelSums) {
  const auto sc = compose_scene(spec_for(13));
  const auto lr = nearest_downsample(sc.soft, 4);
  ASSERT_EQ(lr.shape(), (Shape{8, 8, 8}));
  for (std::size_t c = 0; c < 8; ++c)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x)
        ASSERT_EQ(lr[(c * 8 + y) * 8 + x], sc.soft[(c * 32 + y * 4 + 2) * 32 + x * 4 + 2]);
}
