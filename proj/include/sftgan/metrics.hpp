#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sftgan/models.hpp"

namespace sftgan {

inline constexpr double kPsnrCap = 99.0;
inline constexpr std::size_t kMagnitudeBins = 32;
inline constexpr std::size_t kOrientationBins = 16;

/// 10 log10(peak^2 / MSE), capped at 99 dB when MSE < 1e-12.
double psnr(const Tensor<float>& a, const Tensor<float>& b, double peak = 1.0);

struct TextureSignature {
  std::vector<double> magnitude;    // over [0, 1]
  std::vector<double> orientation;  // over [0, pi)
};

/// Central-difference gradients of the luma channel (edges clamped).
/// img is 3 x H x W, or N x 3 x H x W pooled over the batch. mask has H x W
/// entries (shared across the batch); empty means every pixel. Pixels with
/// gradient magnitude <= 1e-6 carry no orientation; if none remain, the
/// orientation mass goes to bin 0.
TextureSignature texture_signature(const Tensor<float>& img, std::span<const std::uint8_t> mask = {});

/// Symmetric chi-square distance summed over both histograms.
double signature_distance(const TextureSignature& a, const TextureSignature& b);

/// Mean spatial variance over the channels of an N x C x H x W map.
double mean_spatial_variance(const Tensor<float>& map);

struct ModulationMap {
  std::size_t layer = 0;
  std::string param;  // "gamma" or "beta"
  std::size_t channel = 0;
  std::size_t height = 0, width = 0;
  double variance = 0.0;
  std::vector<std::uint8_t> gray;
};

/// Min-max to [0, 255]; a constant map renders as 128.
std::vector<std::uint8_t> normalize_to_gray(std::span<const float> values);

/// gamma and beta of the requested modulation layers for the first batch item,
/// top_k channels each by spatial variance (ties to the lower channel).
/// Throws std::out_of_range for a bad layer index.
std::vector<ModulationMap> export_modulation_maps(const Generator& g, const Tensor<float>& x,
                                                  const Tensor<float>& psi,
                                                  const std::vector<std::size_t>& layers,
                                                  std::size_t top_k);

struct MetricsRow {
  std::string image_id;
  std::string category;
  std::string model;
  double psnr = 0.0;
  double signature_distance = 0.0;
};

void write_metrics_report(std::ostream& out, const std::vector<MetricsRow>& rows);

}  // namespace sftgan
