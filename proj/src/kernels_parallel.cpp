#include <omp.h>

#include <algorithm>
#include <vector>

#include "sftgan/kernels.hpp"

namespace sftgan::kernels {

int max_threads() { return omp_get_max_threads(); }

namespace parallel {
namespace {

template <typename T>
struct Tile {
  static constexpr std::size_t rows = 4;
  static constexpr std::size_t cols = 128 / sizeof(T);  // two 512-bit vectors
};

// C[i0:i0+rows, j0:j0+cols] += A * B, reduction over p in increasing order.
template <typename T>
inline void micro_kernel(std::size_t n, std::size_t k, const T* __restrict a, const T* __restrict b,
                         T* __restrict c, std::size_t i0, std::size_t j0) {
  constexpr std::size_t MR = Tile<T>::rows, NR = Tile<T>::cols;
  T acc[MR][NR];
  for (std::size_t r = 0; r < MR; ++r)
    for (std::size_t q = 0; q < NR; ++q) acc[r][q] = c[(i0 + r) * n + j0 + q];
  for (std::size_t p = 0; p < k; ++p) {
    const T* brow = b + p * n + j0;
    for (std::size_t r = 0; r < MR; ++r) {
      const T av = a[(i0 + r) * k + p];
#pragma omp simd
      for (std::size_t q = 0; q < NR; ++q) acc[r][q] += av * brow[q];
    }
  }
  for (std::size_t r = 0; r < MR; ++r)
    for (std::size_t q = 0; q < NR; ++q) c[(i0 + r) * n + j0 + q] = acc[r][q];
}

// Edge tiles: same per-element reduction order as the micro kernel.
template <typename T>
inline void edge_kernel(std::size_t n, std::size_t k, const T* a, const T* b, T* c, std::size_t i0,
                        std::size_t i1, std::size_t j0, std::size_t j1) {
  for (std::size_t i = i0; i < i1; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b + p * n;
#pragma omp simd
      for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
std::vector<T> im2col(const ConvGeometry& g, std::span<const T> input) {
  const std::size_t oh_n = g.out_h(), ow_n = g.out_w();
  const std::size_t plane = oh_n * ow_n;
  const std::size_t cols = g.batch * plane;
  const long rows = static_cast<long>(g.in_channels * g.kernel_h * g.kernel_w);
  std::vector<T> col(static_cast<std::size_t>(rows) * cols);
  const long pad = static_cast<long>(g.pad);
#pragma omp parallel for schedule(static)
  for (long row = 0; row < rows; ++row) {
    const std::size_t kx = static_cast<std::size_t>(row) % g.kernel_w;
    const std::size_t ky = (static_cast<std::size_t>(row) / g.kernel_w) % g.kernel_h;
    const std::size_t ic = static_cast<std::size_t>(row) / (g.kernel_w * g.kernel_h);
    T* dst = col.data() + static_cast<std::size_t>(row) * cols;
    for (std::size_t n = 0; n < g.batch; ++n) {
      const T* src = input.data() + (n * g.in_channels + ic) * g.in_h * g.in_w;
      for (std::size_t oh = 0; oh < oh_n; ++oh) {
        const long iy = static_cast<long>(oh * g.stride + ky) - pad;
        T* out = dst + n * plane + oh * ow_n;
        if (iy < 0 || iy >= static_cast<long>(g.in_h)) {
          std::fill(out, out + ow_n, T(0));
          continue;
        }
        const T* line = src + static_cast<std::size_t>(iy) * g.in_w;
        for (std::size_t ow = 0; ow < ow_n; ++ow) {
          const long ix = static_cast<long>(ow * g.stride + kx) - pad;
          out[ow] = (ix < 0 || ix >= static_cast<long>(g.in_w)) ? T(0) : line[ix];
        }
      }
    }
  }
  return col;
}

// NCHW grad_output -> [out_channels, batch * plane]
template <typename T>
std::vector<T> fold_channels(std::span<const T> src, std::size_t batch, std::size_t channels,
                             std::size_t plane) {
  std::vector<T> out(batch * channels * plane);
#pragma omp parallel for schedule(static)
  for (long c = 0; c < static_cast<long>(channels); ++c) {
    for (std::size_t n = 0; n < batch; ++n) {
      const T* s = src.data() + (n * channels + static_cast<std::size_t>(c)) * plane;
      std::copy(s, s + plane, out.data() + (static_cast<std::size_t>(c) * batch + n) * plane);
    }
  }
  return out;
}

template <typename T>
std::vector<T> transpose(std::span<const T> src, std::size_t rows, std::size_t cols) {
  std::vector<T> out(rows * cols);
#pragma omp parallel for schedule(static)
  for (long j = 0; j < static_cast<long>(cols); ++j) {
    for (std::size_t i = 0; i < rows; ++i) {
      out[static_cast<std::size_t>(j) * rows + i] = src[i * cols + static_cast<std::size_t>(j)];
    }
  }
  return out;
}

}  // namespace

template <typename T>
void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a,
                     std::span<const T> b, std::span<T> c) {
  constexpr std::size_t MR = Tile<T>::rows, NR = Tile<T>::cols;
  const std::size_t row_blocks = (m + MR - 1) / MR;
  const std::size_t col_blocks = (n + NR - 1) / NR;
  const T* pa = a.data();
  const T* pb = b.data();
  T* pc = c.data();
#pragma omp parallel for collapse(2) schedule(static)
  for (long bi = 0; bi < static_cast<long>(row_blocks); ++bi) {
    for (long bj = 0; bj < static_cast<long>(col_blocks); ++bj) {
      const std::size_t i0 = static_cast<std::size_t>(bi) * MR;
      const std::size_t j0 = static_cast<std::size_t>(bj) * NR;
      const std::size_t i1 = std::min(m, i0 + MR), j1 = std::min(n, j0 + NR);
      if (i1 - i0 == MR && j1 - j0 == NR) {
        micro_kernel(n, k, pa, pb, pc, i0, j0);
      } else {
        edge_kernel(n, k, pa, pb, pc, i0, i1, j0, j1);
      }
    }
  }
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output) {
  const std::size_t plane = g.out_h() * g.out_w();
  const std::size_t cols = g.batch * plane;
  const std::size_t depth = g.in_channels * g.kernel_h * g.kernel_w;
  const auto col = im2col(g, input);
  std::vector<T> tmp(g.out_channels * cols);
  for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
    std::fill_n(tmp.begin() + static_cast<long>(oc * cols), cols, bias.empty() ? T(0) : bias[oc]);
  }
  gemm_accumulate<T>(g.out_channels, cols, depth, weight, col, tmp);
#pragma omp parallel for schedule(static)
  for (long oc = 0; oc < static_cast<long>(g.out_channels); ++oc) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      const T* s = tmp.data() + (static_cast<std::size_t>(oc) * g.batch + n) * plane;
      std::copy(s, s + plane,
                output.data() + (n * g.out_channels + static_cast<std::size_t>(oc)) * plane);
    }
  }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> weight,
                           std::span<const T> grad_output, std::span<T> grad_input) {
  const std::size_t oh_n = g.out_h(), ow_n = g.out_w();
  const std::size_t plane = oh_n * ow_n;
  const std::size_t cols = g.batch * plane;
  const std::size_t depth = g.in_channels * g.kernel_h * g.kernel_w;
  const auto wt = transpose<T>(weight, g.out_channels, depth);
  const auto gout = fold_channels<T>(grad_output, g.batch, g.out_channels, plane);
  std::vector<T> colgrad(depth * cols, T(0));
  gemm_accumulate<T>(depth, cols, g.out_channels, wt, gout, colgrad);

  const long pad = static_cast<long>(g.pad);
  const long planes = static_cast<long>(g.batch * g.in_channels);
#pragma omp parallel for schedule(static)
  for (long np = 0; np < planes; ++np) {
    const std::size_t n = static_cast<std::size_t>(np) / g.in_channels;
    const std::size_t ic = static_cast<std::size_t>(np) % g.in_channels;
    T* dst = grad_input.data() + static_cast<std::size_t>(np) * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        const T* src = colgrad.data() + ((ic * g.kernel_h + ky) * g.kernel_w + kx) * cols + n * plane;
        for (std::size_t oh = 0; oh < oh_n; ++oh) {
          const long iy = static_cast<long>(oh * g.stride + ky) - pad;
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
          T* line = dst + static_cast<std::size_t>(iy) * g.in_w;
          for (std::size_t ow = 0; ow < ow_n; ++ow) {
            const long ix = static_cast<long>(ow * g.stride + kx) - pad;
            if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
            line[ix] += src[oh * ow_n + ow];
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_params(const ConvGeometry& g, std::span<const T> input,
                            std::span<const T> grad_output, std::span<T> grad_weight,
                            std::span<T> grad_bias) {
  const std::size_t plane = g.out_h() * g.out_w();
  const std::size_t cols = g.batch * plane;
  const std::size_t depth = g.in_channels * g.kernel_h * g.kernel_w;
  const auto gout = fold_channels<T>(grad_output, g.batch, g.out_channels, plane);
  const auto col = im2col(g, input);
  const auto colt = transpose<T>(col, depth, cols);
  gemm_accumulate<T>(g.out_channels, depth, cols, gout, colt, grad_weight);
  if (!grad_bias.empty()) {
#pragma omp parallel for schedule(static)
    for (long oc = 0; oc < static_cast<long>(g.out_channels); ++oc) {
      T acc = 0;
      const T* row = gout.data() + static_cast<std::size_t>(oc) * cols;
      for (std::size_t p = 0; p < cols; ++p) acc += row[p];
      grad_bias[static_cast<std::size_t>(oc)] += acc;
    }
  }
}

#define SFTGAN_INSTANTIATE(T)                                                                    \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,  \
                                  std::span<const T>, std::span<T>);                            \
  template void conv2d_backward_input<T>(const ConvGeometry&, std::span<const T>,                \
                                         std::span<const T>, std::span<T>);                     \
  template void conv2d_backward_params<T>(const ConvGeometry&, std::span<const T>,               \
                                          std::span<const T>, std::span<T>, std::span<T>);      \
  template void gemm_accumulate<T>(std::size_t, std::size_t, std::size_t, std::span<const T>,    \
                                   std::span<const T>, std::span<T>);

SFTGAN_INSTANTIATE(float)
SFTGAN_INSTANTIATE(double)
#undef SFTGAN_INSTANTIATE

}  // namespace parallel
}  // namespace sftgan::kernels
