#include "sftgan/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace sftgan {

namespace io {

void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  write_u32(out, static_cast<std::uint32_t>(v));
  write_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError(std::string("truncated input while reading ") + what);
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& in, const char* what) {
  const std::uint64_t lo = read_u32(in, what);
  const std::uint64_t hi = read_u32(in, what);
  return lo | (hi << 32);
}

}  // namespace io

void write_tensor(std::ostream& out, const Tensor<float>& t) {
  out.write(kTensorMagic, 4);
  io::write_u32(out, kTensorVersion);
  io::write_u32(out, static_cast<std::uint32_t>(t.shape().rank()));
  for (auto d : t.shape().dims()) io::write_u32(out, static_cast<std::uint32_t>(d));
  for (float v : t.data()) io::write_u32(out, std::bit_cast<std::uint32_t>(v));
}

Tensor<float> read_tensor(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) throw FormatError("truncated input while reading tensor magic");
  if (std::memcmp(magic, kTensorMagic, 4) != 0) throw FormatError("bad tensor magic (expected SFTB)");
  const auto version = io::read_u32(in, "tensor version");
  if (version != kTensorVersion) {
    throw FormatError("unsupported tensor version " + std::to_string(version));
  }
  const auto rank = io::read_u32(in, "tensor rank");
  if (rank > 8) throw FormatError("implausible tensor rank " + std::to_string(rank));
  std::vector<std::size_t> dims(rank);
  std::size_t count = 1;
  for (auto& d : dims) {
    d = io::read_u32(in, "tensor extent");
    count *= d;
  }
  if (count > (std::size_t{1} << 31)) throw FormatError("implausible tensor size");
  std::vector<unsigned char> raw(count * 4);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw FormatError("truncated tensor payload");
  }
  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* b = raw.data() + 4 * i;
    const std::uint32_t u = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                            (static_cast<std::uint32_t>(b[2]) << 16) |
                            (static_cast<std::uint32_t>(b[3]) << 24);
    values[i] = std::bit_cast<float>(u);
  }
  return Tensor<float>(Shape(std::move(dims)), std::move(values));
}

void save_tensor(const std::filesystem::path& path, const Tensor<float>& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_tensor(out, t);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Tensor<float> load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_tensor(in);
}

}  // namespace sftgan
