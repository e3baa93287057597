#include "sftgan/ppm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "sftgan/tensor_file.hpp"

namespace sftgan {

void write_ppm(std::ostream& out, const PpmImage& img) {
  if (img.rgb.size() != img.width * img.height * 3) {
    throw std::invalid_argument("ppm: payload size does not match extents");
  }
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
}

namespace {

std::size_t read_header_number(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  std::size_t value = 0;
  bool any = false;
  while (in.peek() != EOF && std::isdigit(in.peek())) {
    value = value * 10 + static_cast<std::size_t>(in.get() - '0');
    any = true;
    if (value > 1'000'000) throw FormatError("ppm: header value too large");
  }
  if (!any) throw FormatError("ppm: malformed header");
  return value;
}

}  // namespace

PpmImage read_ppm(std::istream& in) {
  char magic[2];
  if (!in.read(magic, 2) || magic[0] != 'P' || magic[1] != '6') throw FormatError("ppm: not a P6 file");
  PpmImage img;
  img.width = read_header_number(in);
  img.height = read_header_number(in);
  const std::size_t maxval = read_header_number(in);
  if (maxval != 255) throw FormatError("ppm: only maxval 255 is supported");
  if (img.width == 0 || img.height == 0) throw FormatError("ppm: empty image");
  if (!std::isspace(in.get())) throw FormatError("ppm: missing separator after header");
  img.rgb.resize(img.width * img.height * 3);
  if (!in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()))) {
    throw FormatError("ppm: truncated payload");
  }
  return img;
}

void save_ppm(const std::filesystem::path& path, const PpmImage& img) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_ppm(out, img);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

PpmImage load_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return read_ppm(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Tensor<float> ppm_to_tensor(const PpmImage& img) {
  const std::size_t plane = img.width * img.height;
  Tensor<float> out(Shape{3, img.height, img.width});
  auto o = out.mutable_data();
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) o[c * plane + p] = static_cast<float>(img.rgb[p * 3 + c]) / 255.0f;
  }
  return out;
}

PpmImage tensor_to_ppm(const Tensor<float>& t) {
  const Shape& s = t.shape();
  if (s.rank() != 3 || s[0] != 3) throw ShapeError("tensor_to_ppm expects 3 x H x W, got " + s.str());
  PpmImage img;
  img.height = s[1];
  img.width = s[2];
  const std::size_t plane = img.width * img.height;
  img.rgb.resize(plane * 3);
  auto v = t.data();
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const float x = std::clamp(v[c * plane + p], 0.0f, 1.0f);
      img.rgb[p * 3 + c] = static_cast<std::uint8_t>(std::lround(x * 255.0f));
    }
  }
  return img;
}

PpmImage gray_to_ppm(const std::vector<std::uint8_t>& gray, std::size_t h, std::size_t w) {
  if (gray.size() != h * w) throw std::invalid_argument("gray_to_ppm: size mismatch");
  PpmImage img;
  img.width = w;
  img.height = h;
  img.rgb.resize(h * w * 3);
  for (std::size_t p = 0; p < h * w; ++p) img.rgb[p * 3] = img.rgb[p * 3 + 1] = img.rgb[p * 3 + 2] = gray[p];
  return img;
}

}  // namespace sftgan
