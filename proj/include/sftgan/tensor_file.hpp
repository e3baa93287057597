#pragma once

// TensorFile: "SFTB" | u32 version (=1) | u32 rank | u32 extents[rank] |
// f32 payload, all little-endian, payload row-major.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "sftgan/tensor.hpp"

namespace sftgan {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kTensorMagic[4] = {'S', 'F', 'T', 'B'};
inline constexpr std::uint32_t kTensorVersion = 1;

void write_tensor(std::ostream& out, const Tensor<float>& t);
Tensor<float> read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor<float>& t);
Tensor<float> load_tensor(const std::filesystem::path& path);

namespace io {
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
std::uint32_t read_u32(std::istream& in, const char* what);
std::uint64_t read_u64(std::istream& in, const char* what);
}  // namespace io

}  // namespace sftgan
