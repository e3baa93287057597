#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sftgan/rng.hpp"
#include "sftgan/tensor.hpp"

namespace sftgan {

enum class TextureKind { sky, mountain, plant, grass, water, animal, building, background };

inline constexpr TextureKind kAllCategories[] = {
    TextureKind::sky,   TextureKind::mountain, TextureKind::plant,   TextureKind::grass,
    TextureKind::water, TextureKind::animal,   TextureKind::building};

std::string to_string(TextureKind kind);
/// Throws std::invalid_argument for an unknown name.
TextureKind parse_texture_kind(const std::string& name);

/// Seeded lattice value noise in [0, 1): bilinear with smoothstep easing
/// between lattice points spaced `period` pixels apart.
double value_noise(std::uint64_t key, double x, double y, double period);

/// 3 x h x w texture with values in [0, 1]. Requires h, w >= 8.
Tensor<float> synth_texture(TextureKind kind, std::size_t h, std::size_t w, std::uint64_t seed);

enum class LayoutKind { single, half_plane, voronoi };

std::string to_string(LayoutKind kind);
LayoutKind parse_layout(const std::string& name);

struct SceneSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  /// Category channel k is categories[k]; background is the last channel.
  std::vector<TextureKind> categories{std::begin(kAllCategories), std::end(kAllCategories)};
  LayoutKind layout = LayoutKind::voronoi;
  std::size_t voronoi_cells = 4;
  /// For the single layout: fixed class index (categories.size() = background);
  /// drawn from the seed when unset.
  std::optional<std::size_t> single_class;
  std::size_t scale = 4;
  double sigma = 2.0;
  std::uint64_t seed = 0;

  std::size_t num_classes() const { return categories.size() + 1; }
  void validate() const;
};

struct Scene {
  Tensor<float> hr;      // 3 x H x W
  Tensor<float> onehot;  // classes x H x W
  Tensor<float> soft;    // classes x H x W
  Tensor<float> lr;      // 3 x H/s x W/s
  Tensor<float> lr_psi;  // classes x H/s x W/s
  std::vector<std::size_t> labels;  // H x W class indices
  std::size_t scale = 4;
};

Scene compose_scene(const SceneSpec& spec);

/// FNV-1a over all scene tensors.
std::uint64_t scene_hash(const Scene& scene);

/// Per-channel Gaussian blur truncated at 3 sigma (taps outside the canvas are
/// dropped), then per-pixel renormalization. sigma == 0 copies the input.
Tensor<float> soften_segmentation(const Tensor<float>& onehot, double sigma);

/// Cubic convolution kernel.
double bicubic_kernel(double x, double a = -0.5);

struct ResampleTaps {
  std::vector<std::size_t> index;
  std::vector<double> weight;  // normalized to sum 1
};

/// Tap lists for shrinking an axis of length n_in by the integer factor s:
/// centre u = (i + 0.5) s - 0.5, weights k((u - j) / s) / s over |u - j| < 2s,
/// indices mirrored half-sample symmetrically at the edges.
std::vector<ResampleTaps> downsample_taps(std::size_t n_in, std::size_t s);

/// Separable antialiased bicubic shrink of a C x H x W image, rows then columns.
Tensor<float> bicubic_downsample(const Tensor<float>& img, std::size_t s);

/// Nearest sampling of C x H x W maps at index i * s + s / 2.
Tensor<float> nearest_downsample(const Tensor<float>& maps, std::size_t s);

struct TrainingPair {
  Tensor<float> lr;   // 3 x p/s x p/s
  Tensor<float> psi;  // classes x p/s x p/s
  Tensor<float> hr;   // 3 x p x p
  std::size_t label = 0;   // dominant one-hot channel in the crop
  double purity = 0.0;     // fraction of crop pixels carrying the label
  std::size_t hr_y = 0, hr_x = 0;
};

/// Aligned random crop. With single_category the crop is drawn among windows
/// whose one-hot label is constant (purity 1); throws std::runtime_error if
/// none is found.
TrainingPair sample_training_pair(const Scene& scene, std::size_t hr_patch, RngStream& rng,
                                  bool single_category = false);

/// C x H x W crop.
Tensor<float> crop(const Tensor<float>& img, std::size_t y, std::size_t x, std::size_t h,
                   std::size_t w);

/// Stacks equally shaped C x H x W tensors into N x C x H x W.
Tensor<float> stack(const std::vector<Tensor<float>>& items);

/// Constant one-hot maps (classes x h x w) for a single class.
Tensor<float> uniform_maps(std::size_t classes, std::size_t cls, std::size_t h, std::size_t w);

}  // namespace sftgan
