#include "sftgan/kernels.hpp"

namespace sftgan::kernels {

std::size_t ConvGeometry::out_h() const {
  if (in_h + 2 * pad < kernel_h || stride == 0) return 0;
  return (in_h + 2 * pad - kernel_h) / stride + 1;
}

std::size_t ConvGeometry::out_w() const {
  if (in_w + 2 * pad < kernel_w || stride == 0) return 0;
  return (in_w + 2 * pad - kernel_w) / stride + 1;
}

namespace reference {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output) {
  const std::size_t oh_n = g.out_h(), ow_n = g.out_w();
  const long pad = static_cast<long>(g.pad);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
      for (std::size_t oh = 0; oh < oh_n; ++oh) {
        for (std::size_t ow = 0; ow < ow_n; ++ow) {
          T acc = bias.empty() ? T(0) : bias[oc];
          for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
              const long iy = static_cast<long>(oh * g.stride + ky) - pad;
              if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const long ix = static_cast<long>(ow * g.stride + kx) - pad;
                if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
                const T w = weight[((oc * g.in_channels + ic) * g.kernel_h + ky) * g.kernel_w + kx];
                const T x = input[((n * g.in_channels + ic) * g.in_h + iy) * g.in_w + ix];
                acc += w * x;
              }
            }
          }
          output[((n * g.out_channels + oc) * oh_n + oh) * ow_n + ow] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> weight,
                           std::span<const T> grad_output, std::span<T> grad_input) {
  const std::size_t oh_n = g.out_h(), ow_n = g.out_w();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
      for (std::size_t iy = 0; iy < g.in_h; ++iy) {
        for (std::size_t ix = 0; ix < g.in_w; ++ix) {
          T acc = 0;
          for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
              const long ty = static_cast<long>(iy + g.pad) - static_cast<long>(ky);
              if (ty < 0 || ty % static_cast<long>(g.stride) != 0) continue;
              const std::size_t oh = static_cast<std::size_t>(ty) / g.stride;
              if (oh >= oh_n) continue;
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const long tx = static_cast<long>(ix + g.pad) - static_cast<long>(kx);
                if (tx < 0 || tx % static_cast<long>(g.stride) != 0) continue;
                const std::size_t ow = static_cast<std::size_t>(tx) / g.stride;
                if (ow >= ow_n) continue;
                acc += weight[((oc * g.in_channels + ic) * g.kernel_h + ky) * g.kernel_w + kx] *
                       grad_output[((n * g.out_channels + oc) * oh_n + oh) * ow_n + ow];
              }
            }
          }
          grad_input[((n * g.in_channels + ic) * g.in_h + iy) * g.in_w + ix] += acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_params(const ConvGeometry& g, std::span<const T> input,
                            std::span<const T> grad_output, std::span<T> grad_weight,
                            std::span<T> grad_bias) {
  const std::size_t oh_n = g.out_h(), ow_n = g.out_w();
  const long pad = static_cast<long>(g.pad);
  for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
    if (!grad_bias.empty()) {
      T acc = 0;
      for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t p = 0; p < oh_n * ow_n; ++p) {
          acc += grad_output[(n * g.out_channels + oc) * oh_n * ow_n + p];
        }
      }
      grad_bias[oc] += acc;
    }
    for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          T acc = 0;
          for (std::size_t n = 0; n < g.batch; ++n) {
            for (std::size_t oh = 0; oh < oh_n; ++oh) {
              const long iy = static_cast<long>(oh * g.stride + ky) - pad;
              if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
              for (std::size_t ow = 0; ow < ow_n; ++ow) {
                const long ix = static_cast<long>(ow * g.stride + kx) - pad;
                if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
                acc += grad_output[((n * g.out_channels + oc) * oh_n + oh) * ow_n + ow] *
                       input[((n * g.in_channels + ic) * g.in_h + iy) * g.in_w + ix];
              }
            }
          }
          grad_weight[((oc * g.in_channels + ic) * g.kernel_h + ky) * g.kernel_w + kx] += acc;
        }
      }
    }
  }
}

template <typename T>
void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a,
                     std::span<const T> b, std::span<T> c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
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

}  // namespace reference
}  // namespace sftgan::kernels
