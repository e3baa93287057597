#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "sftgan/tensor.hpp"

namespace sftgan {

/// Binary P6 image, maxval 255, interleaved RGB.
struct PpmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  bool operator==(const PpmImage&) const = default;
};

void write_ppm(std::ostream& out, const PpmImage& img);
/// Throws FormatError on anything but a well-formed P6 / maxval 255 image.
PpmImage read_ppm(std::istream& in);

void save_ppm(const std::filesystem::path& path, const PpmImage& img);
PpmImage load_ppm(const std::filesystem::path& path);

/// 3 x H x W in [0, 1].
Tensor<float> ppm_to_tensor(const PpmImage& img);
/// Clamps to [0, 1] and rounds to the nearest code.
PpmImage tensor_to_ppm(const Tensor<float>& img);

/// Single-channel map replicated to gray RGB.
PpmImage gray_to_ppm(const std::vector<std::uint8_t>& gray, std::size_t h, std::size_t w);

}  // namespace sftgan
