#include "sftgan/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sftgan {

namespace {

constexpr const char* kTextureNames[] = {"sky",    "mountain", "plant",    "grass",
                                         "water",  "animal",   "building", "background"};

double lattice(std::uint64_t key, long long ix, long long iy) {
  const auto h = hash_combine(hash_combine(key, static_cast<std::uint64_t>(ix)),
                              static_cast<std::uint64_t>(iy));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

/// Reflects an index into [0, n) half-sample symmetrically.
std::size_t mirror(long long j, std::size_t n) {
  const long long m = static_cast<long long>(n);
  while (j < 0 || j >= m) {
    if (j < 0) j = -j - 1;
    if (j >= m) j = 2 * m - 1 - j;
  }
  return static_cast<std::size_t>(j);
}

struct Extents {
  std::size_t c, h, w;
};

Extents chw(const Tensor<float>& t, const char* what) {
  if (t.shape().rank() != 3) {
    throw ShapeError(std::string(what) + " must be C x H x W, got " + t.shape().str());
  }
  return {t.shape()[0], t.shape()[1], t.shape()[2]};
}

}  // namespace

std::string to_string(TextureKind kind) { return kTextureNames[static_cast<int>(kind)]; }

TextureKind parse_texture_kind(const std::string& name) {
  for (int i = 0; i < 8; ++i) {
    if (name == kTextureNames[i]) return static_cast<TextureKind>(i);
  }
  throw std::invalid_argument("unknown category '" + name + "'");
}

std::string to_string(LayoutKind kind) {
  switch (kind) {
    case LayoutKind::single: return "single";
    case LayoutKind::half_plane: return "half_plane";
    case LayoutKind::voronoi: return "voronoi";
  }
  return "unknown";
}

LayoutKind parse_layout(const std::string& name) {
  if (name == "single") return LayoutKind::single;
  if (name == "half_plane") return LayoutKind::half_plane;
  if (name == "voronoi") return LayoutKind::voronoi;
  throw std::invalid_argument("unknown layout '" + name + "' (expected single, half_plane or voronoi)");
}

double value_noise(std::uint64_t key, double x, double y, double period) {
  const double gx = x / period, gy = y / period;
  const double fx0 = std::floor(gx), fy0 = std::floor(gy);
  const auto ix = static_cast<long long>(fx0), iy = static_cast<long long>(fy0);
  const double tx = smooth(gx - fx0), ty = smooth(gy - fy0);
  const double a = lattice(key, ix, iy), b = lattice(key, ix + 1, iy);
  const double c = lattice(key, ix, iy + 1), d = lattice(key, ix + 1, iy + 1);
  const double top = a + (b - a) * tx, bottom = c + (d - c) * tx;
  return top + (bottom - top) * ty;
}

Tensor<float> synth_texture(TextureKind kind, std::size_t h, std::size_t w, std::uint64_t seed) {
  const int k = static_cast<int>(kind);
  if (k < 0 || k > 7) throw std::invalid_argument("unknown category index " + std::to_string(k));
  if (h < 8 || w < 8) throw std::invalid_argument("texture extents must be >= 8");

  auto rng = RngStream::keyed(seed, "texture", static_cast<std::uint64_t>(k));
  double base[3];
  if (kind == TextureKind::background) {
    base[0] = base[1] = base[2] = rng.uniform(0.35, 0.65);
  } else {
    for (double& b : base) b = rng.uniform(0.25, 0.75);
  }
  const std::uint64_t n0 = rng.next_u64(), n1 = rng.next_u64(), n2 = rng.next_u64();
  const double theta = rng.uniform(0.0, std::numbers::pi);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double two_pi = 2.0 * std::numbers::pi;

  Tensor<float> out(Shape{3, h, w});
  auto px = out.mutable_data();
  const std::size_t plane = h * w;
  for (std::size_t y = 0; y < h; ++y) {
    const double fy = static_cast<double>(y) + 0.5;
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x) + 0.5;
      double lum = 0.5, amp = 0.5;
      double shift[3] = {0.0, 0.0, 0.0};
      switch (kind) {
        case TextureKind::sky: {
          const double t = fy / static_cast<double>(h) - 0.5;
          lum = 0.5 + 0.3 * t + 0.3 * (value_noise(n0, fx, fy, 48.0) - 0.5);
          amp = 0.25;
          shift[0] = 0.04 * t;
          shift[2] = -0.04 * t;
          break;
        }
        case TextureKind::grass:
          lum = 0.7 * value_noise(n0, fx, fy, 1.5) + 0.3 * value_noise(n1, fx, fy, 3.0);
          amp = 0.6;
          break;
        case TextureKind::water:
          lum = 0.85 * (0.5 + 0.5 * std::sin(two_pi * fy / 6.0 + phase +
                                             3.0 * value_noise(n0, fx, fy, 16.0))) +
                0.15 * value_noise(n1, fx, fy, 2.0);
          amp = 0.3;
          break;
        case TextureKind::mountain: {
          const double periods[4] = {24.0, 12.0, 6.0, 3.0};
          const double weights[4] = {0.5, 0.25, 0.15, 0.1};
          lum = 0.0;
          for (int o = 0; o < 4; ++o) {
            const double n = value_noise(hash_combine(n0, o), fx, fy, periods[o]);
            lum += weights[o] * (1.0 - std::abs(2.0 * n - 1.0));
          }
          amp = 0.5;
          break;
        }
        case TextureKind::plant: {
          const double blob = smooth(clamp01((value_noise(n0, fx, fy, 10.0) - 0.35) * 3.0));
          lum = 0.5 + (value_noise(n1, fx, fy, 3.0) - 0.5) * (0.3 + 0.7 * blob) + 0.2 * (blob - 0.5);
          amp = 0.6;
          break;
        }
        case TextureKind::animal: {
          const double u = fx * std::cos(theta) + fy * std::sin(theta);
          lum = 0.8 * (0.5 + 0.5 * std::sin(two_pi * u / 5.0 + 2.0 * value_noise(n0, fx, fy, 12.0))) +
                0.2 * value_noise(n1, fx, fy, 1.5);
          amp = 0.4;
          break;
        }
        case TextureKind::building: {
          const std::size_t row = y / 6;
          const std::size_t offset = (row % 2) * 6;
          const std::size_t bx = (x + offset) / 12;
          if (y % 6 == 0 || (x + offset) % 12 == 0) {
            lum = 0.1;
          } else {
            lum = 0.7 + 0.2 * (lattice(n2, static_cast<long long>(bx), static_cast<long long>(row)) - 0.5);
          }
          amp = 0.7;
          break;
        }
        case TextureKind::background:
          lum = value_noise(n0, fx, fy, 6.0);
          amp = 0.4;
          break;
      }
      for (std::size_t c = 0; c < 3; ++c) {
        px[c * plane + y * w + x] = static_cast<float>(clamp01(base[c] + amp * (lum - 0.5) + shift[c]));
      }
    }
  }
  return out;
}

void SceneSpec::validate() const {
  if (categories.empty()) throw std::invalid_argument("scene needs at least one category");
  if (scale == 0 || height % scale != 0 || width % scale != 0) {
    throw std::invalid_argument("scene extents " + std::to_string(height) + "x" +
                                std::to_string(width) + " not divisible by scale " +
                                std::to_string(scale));
  }
  if (height < 8 || width < 8) throw std::invalid_argument("scene extents must be >= 8");
  if (sigma < 0) throw std::invalid_argument("softening sigma must be >= 0");
  if (layout == LayoutKind::voronoi && voronoi_cells == 0) {
    throw std::invalid_argument("voronoi layout needs at least one cell");
  }
  if (single_class && *single_class >= num_classes()) {
    throw std::invalid_argument("single_class out of range");
  }
}

Scene compose_scene(const SceneSpec& spec) {
  spec.validate();
  const std::size_t H = spec.height, W = spec.width, C = spec.num_classes();
  auto rng = RngStream::keyed(spec.seed, "layout");

  // Region id per pixel and class per region.
  std::vector<std::size_t> region(H * W, 0);
  std::vector<std::size_t> region_class;
  switch (spec.layout) {
    case LayoutKind::single:
      region_class.push_back(spec.single_class ? *spec.single_class : rng.below(C));
      break;
    case LayoutKind::half_plane: {
      const std::size_t a = rng.below(C);
      const std::size_t b = C == 1 ? a : (a + 1 + rng.below(C - 1)) % C;
      region_class = {a, b};
      const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double cy = rng.uniform(0.25, 0.75) * static_cast<double>(H);
      const double cx = rng.uniform(0.25, 0.75) * static_cast<double>(W);
      const double nx = std::cos(theta), ny = std::sin(theta);
      for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
          const double d = (static_cast<double>(x) + 0.5 - cx) * nx + (static_cast<double>(y) + 0.5 - cy) * ny;
          region[y * W + x] = d >= 0.0 ? 1 : 0;
        }
      }
      break;
    }
    case LayoutKind::voronoi: {
      std::vector<double> cy(spec.voronoi_cells), cx(spec.voronoi_cells);
      for (std::size_t i = 0; i < spec.voronoi_cells; ++i) {
        cy[i] = rng.uniform(0.0, static_cast<double>(H));
        cx[i] = rng.uniform(0.0, static_cast<double>(W));
        region_class.push_back(rng.below(C));
      }
      for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
          double best = 1e300;
          for (std::size_t i = 0; i < spec.voronoi_cells; ++i) {
            const double dy = static_cast<double>(y) + 0.5 - cy[i];
            const double dx = static_cast<double>(x) + 0.5 - cx[i];
            const double d = dy * dy + dx * dx;
            if (d < best) {
              best = d;
              region[y * W + x] = i;
            }
          }
        }
      }
      break;
    }
  }

  Scene scene;
  scene.scale = spec.scale;
  scene.labels.resize(H * W);
  scene.hr = Tensor<float>(Shape{3, H, W});
  scene.onehot = Tensor<float>(Shape{C, H, W});
  auto hr = scene.hr.mutable_data();
  auto onehot = scene.onehot.mutable_data();
  const std::size_t plane = H * W;
  for (std::size_t r = 0; r < region_class.size(); ++r) {
    const std::size_t cls = region_class[r];
    const TextureKind kind = cls < spec.categories.size() ? spec.categories[cls] : TextureKind::background;
    const auto tex = synth_texture(kind, H, W, hash_combine(spec.seed, 0x5eed0000ULL + r));
    auto t = tex.data();
    for (std::size_t p = 0; p < plane; ++p) {
      if (region[p] != r) continue;
      scene.labels[p] = cls;
      onehot[cls * plane + p] = 1.0f;
      for (std::size_t c = 0; c < 3; ++c) hr[c * plane + p] = t[c * plane + p];
    }
  }
  scene.soft = soften_segmentation(scene.onehot, spec.sigma);
  scene.lr = bicubic_downsample(scene.hr, spec.scale);
  scene.lr_psi = nearest_downsample(scene.soft, spec.scale);
  return scene;
}

std::uint64_t scene_hash(const Scene& scene) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto* t : {&scene.hr, &scene.onehot, &scene.soft, &scene.lr, &scene.lr_psi}) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(t->data().data());
    for (std::size_t i = 0; i < t->numel() * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

Tensor<float> soften_segmentation(const Tensor<float>& onehot, double sigma) {
  if (sigma < 0) throw std::invalid_argument("soften_segmentation: sigma must be >= 0");
  const auto [C, H, W] = chw(onehot, "soften_segmentation input");
  if (sigma == 0.0) return onehot.clone();
  const long long radius = static_cast<long long>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (long long d = -radius; d <= radius; ++d) {
    kernel[static_cast<std::size_t>(d + radius)] = std::exp(-0.5 * static_cast<double>(d * d) / (sigma * sigma));
  }
  const std::size_t plane = H * W;
  auto in = onehot.data();
  std::vector<double> tmp(C * plane, 0.0), blurred(C * plane, 0.0);
  const auto h_ll = static_cast<long long>(H), w_ll = static_cast<long long>(W);
  for (std::size_t c = 0; c < C; ++c) {
    for (long long y = 0; y < h_ll; ++y) {
      for (long long x = 0; x < w_ll; ++x) {
        double acc = 0.0;
        for (long long d = -radius; d <= radius; ++d) {
          const long long xx = x + d;
          if (xx < 0 || xx >= w_ll) continue;
          acc += kernel[static_cast<std::size_t>(d + radius)] * in[c * plane + static_cast<std::size_t>(y * w_ll + xx)];
        }
        tmp[c * plane + static_cast<std::size_t>(y * w_ll + x)] = acc;
      }
    }
    for (long long y = 0; y < h_ll; ++y) {
      for (long long x = 0; x < w_ll; ++x) {
        double acc = 0.0;
        for (long long d = -radius; d <= radius; ++d) {
          const long long yy = y + d;
          if (yy < 0 || yy >= h_ll) continue;
          acc += kernel[static_cast<std::size_t>(d + radius)] * tmp[c * plane + static_cast<std::size_t>(yy * w_ll + x)];
        }
        blurred[c * plane + static_cast<std::size_t>(y * w_ll + x)] = acc;
      }
    }
  }
  Tensor<float> out(onehot.shape());
  auto o = out.mutable_data();
  for (std::size_t p = 0; p < plane; ++p) {
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c) total += blurred[c * plane + p];
    for (std::size_t c = 0; c < C; ++c) {
      o[c * plane + p] = total > 0 ? static_cast<float>(blurred[c * plane + p] / total) : in[c * plane + p];
    }
  }
  return out;
}

double bicubic_kernel(double x, double a) {
  const double ax = std::abs(x);
  if (ax <= 1.0) return (a + 2.0) * ax * ax * ax - (a + 3.0) * ax * ax + 1.0;
  if (ax < 2.0) return a * ax * ax * ax - 5.0 * a * ax * ax + 8.0 * a * ax - 4.0 * a;
  return 0.0;
}

std::vector<ResampleTaps> downsample_taps(std::size_t n_in, std::size_t s) {
  if (s == 0 || n_in % s != 0) {
    throw std::invalid_argument("extent " + std::to_string(n_in) + " not divisible by scale " +
                                std::to_string(s));
  }
  const std::size_t n_out = n_in / s;
  const double sd = static_cast<double>(s);
  std::vector<ResampleTaps> taps(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    const double u = (static_cast<double>(i) + 0.5) * sd - 0.5;
    const auto lo = static_cast<long long>(std::floor(u - 2.0 * sd));
    const auto hi = static_cast<long long>(std::ceil(u + 2.0 * sd));
    double total = 0.0;
    auto& t = taps[i];
    for (long long j = lo; j <= hi; ++j) {
      const double d = (u - static_cast<double>(j)) / sd;
      if (std::abs(d) >= 2.0) continue;
      const double wgt = bicubic_kernel(d) / sd;
      t.index.push_back(mirror(j, n_in));
      t.weight.push_back(wgt);
      total += wgt;
    }
    for (double& wgt : t.weight) wgt /= total;
  }
  return taps;
}

Tensor<float> bicubic_downsample(const Tensor<float>& img, std::size_t s) {
  const auto [C, H, W] = chw(img, "bicubic_downsample input");
  if (s == 0 || H % s != 0 || W % s != 0) {
    throw std::invalid_argument("bicubic_downsample: extents " + img.shape().str() +
                                " not divisible by " + std::to_string(s));
  }
  const auto col_taps = downsample_taps(W, s);
  const auto row_taps = downsample_taps(H, s);
  const std::size_t h = H / s, w = W / s;
  auto in = img.data();
  std::vector<double> tmp(C * H * w);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      const float* row = in.data() + (c * H + y) * W;
      for (std::size_t j = 0; j < w; ++j) {
        const auto& t = col_taps[j];
        double acc = 0.0;
        for (std::size_t q = 0; q < t.index.size(); ++q) acc += t.weight[q] * row[t.index[q]];
        tmp[(c * H + y) * w + j] = acc;
      }
    }
  }
  Tensor<float> out(Shape{C, h, w});
  auto o = out.mutable_data();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < h; ++i) {
      const auto& t = row_taps[i];
      for (std::size_t j = 0; j < w; ++j) {
        double acc = 0.0;
        for (std::size_t q = 0; q < t.index.size(); ++q) acc += t.weight[q] * tmp[(c * H + t.index[q]) * w + j];
        o[(c * h + i) * w + j] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Tensor<float> nearest_downsample(const Tensor<float>& maps, std::size_t s) {
  const auto [C, H, W] = chw(maps, "nearest_downsample input");
  if (s == 0 || H % s != 0 || W % s != 0) {
    throw std::invalid_argument("nearest_downsample: extents " + maps.shape().str() +
                                " not divisible by " + std::to_string(s));
  }
  const std::size_t h = H / s, w = W / s;
  Tensor<float> out(Shape{C, h, w});
  auto in = maps.data();
  auto o = out.mutable_data();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        o[(c * h + i) * w + j] = in[(c * H + i * s + s / 2) * W + j * s + s / 2];
      }
    }
  }
  return out;
}

Tensor<float> crop(const Tensor<float>& img, std::size_t y, std::size_t x, std::size_t h,
                   std::size_t w) {
  const auto [C, H, W] = chw(img, "crop input");
  if (y + h > H || x + w > W) {
    throw std::out_of_range("crop window exceeds " + img.shape().str());
  }
  Tensor<float> out(Shape{C, h, w});
  auto in = img.data();
  auto o = out.mutable_data();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < h; ++i) {
      std::copy_n(in.data() + (c * H + y + i) * W + x, w, o.data() + (c * h + i) * w);
    }
  }
  return out;
}

Tensor<float> stack(const std::vector<Tensor<float>>& items) {
  if (items.empty()) throw std::invalid_argument("stack: no items");
  const Shape& s = items.front().shape();
  std::vector<std::size_t> dims{items.size()};
  dims.insert(dims.end(), s.dims().begin(), s.dims().end());
  std::vector<float> values;
  values.reserve(items.size() * s.numel());
  for (const auto& t : items) {
    if (t.shape() != s) throw ShapeError("stack: mismatched shapes " + s.str() + " and " + t.shape().str());
    values.insert(values.end(), t.data().begin(), t.data().end());
  }
  return Tensor<float>(Shape(std::move(dims)), std::move(values));
}

Tensor<float> uniform_maps(std::size_t classes, std::size_t cls, std::size_t h, std::size_t w) {
  if (cls >= classes) throw std::out_of_range("class index out of range");
  Tensor<float> out(Shape{classes, h, w});
  auto o = out.mutable_data();
  std::fill_n(o.data() + cls * h * w, h * w, 1.0f);
  return out;
}

TrainingPair sample_training_pair(const Scene& scene, std::size_t hr_patch, RngStream& rng,
                                  bool single_category) {
  const auto [C3, H, W] = chw(scene.hr, "scene");
  (void)C3;
  const std::size_t s = scene.scale;
  if (hr_patch == 0 || hr_patch % s != 0) {
    throw std::invalid_argument("hr_patch " + std::to_string(hr_patch) + " not divisible by scale " +
                                std::to_string(s));
  }
  if (hr_patch > H || hr_patch > W) {
    throw std::invalid_argument("patch " + std::to_string(hr_patch) + " larger than scene " +
                                scene.hr.shape().str());
  }
  const std::size_t lp = hr_patch / s;
  const std::size_t ny = H / s - lp + 1, nx = W / s - lp + 1;
  const std::size_t classes = scene.onehot.shape()[0];

  auto purity_of = [&](std::size_t oy, std::size_t ox, std::size_t& label) {
    std::vector<std::size_t> counts(classes, 0);
    for (std::size_t y = 0; y < hr_patch; ++y) {
      for (std::size_t x = 0; x < hr_patch; ++x) ++counts[scene.labels[(oy * s + y) * W + ox * s + x]];
    }
    label = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    return static_cast<double>(counts[label]) / static_cast<double>(hr_patch * hr_patch);
  };

  std::size_t oy = rng.below(ny), ox = rng.below(nx), label = 0;
  double purity = purity_of(oy, ox, label);
  if (single_category && purity < 1.0) {
    bool found = false;
    for (int attempt = 0; attempt < 64 && !found; ++attempt) {
      oy = rng.below(ny);
      ox = rng.below(nx);
      purity = purity_of(oy, ox, label);
      found = purity == 1.0;
    }
    for (std::size_t y = 0; y < ny && !found; ++y) {
      for (std::size_t x = 0; x < nx && !found; ++x) {
        oy = y;
        ox = x;
        purity = purity_of(oy, ox, label);
        found = purity == 1.0;
      }
    }
    if (!found) throw std::runtime_error("no single-category crop of size " + std::to_string(hr_patch));
  }

  TrainingPair pair;
  pair.hr_y = oy * s;
  pair.hr_x = ox * s;
  pair.hr = crop(scene.hr, pair.hr_y, pair.hr_x, hr_patch, hr_patch);
  pair.lr = crop(scene.lr, oy, ox, lp, lp);
  pair.psi = crop(scene.lr_psi, oy, ox, lp, lp);
  pair.label = label;
  pair.purity = purity;
  return pair;
}

}  // namespace sftgan
