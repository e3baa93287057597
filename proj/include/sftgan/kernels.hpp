#pragma once

// Convolution kernels in two flavours:
//
//   reference::  direct nested loops, single-threaded. Kept as the oracle the
//                fast path is tested and benchmarked against.
//   parallel::   im2col + register-blocked GEMM, OpenMP across output rows.
//
// Every output element of the parallel path is reduced by exactly one thread
// in a fixed order, so results do not depend on the thread count.

#include <cstddef>
#include <span>

namespace sftgan::kernels {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1, in_h = 1, in_w = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1, kernel_w = 1;
  std::size_t stride = 1, pad = 0;

  /// floor((H + 2 pad - k) / stride) + 1, or 0 when the kernel does not fit.
  std::size_t out_h() const;
  std::size_t out_w() const;
  std::size_t input_size() const { return batch * in_channels * in_h * in_w; }
  std::size_t weight_size() const { return out_channels * in_channels * kernel_h * kernel_w; }
  std::size_t output_size() const { return batch * out_channels * out_h() * out_w(); }
};

namespace reference {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output);

/// grad_input += dL/dinput
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> weight,
                           std::span<const T> grad_output, std::span<T> grad_input);

/// grad_weight += dL/dweight, grad_bias += dL/dbias
template <typename T>
void conv2d_backward_params(const ConvGeometry& g, std::span<const T> input,
                            std::span<const T> grad_output, std::span<T> grad_weight,
                            std::span<T> grad_bias);

/// C[m x n] += A[m x k] * B[k x n], all row-major and dense.
template <typename T>
void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a,
                     std::span<const T> b, std::span<T> c);

}  // namespace reference

namespace parallel {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output);

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> weight,
                           std::span<const T> grad_output, std::span<T> grad_input);

template <typename T>
void conv2d_backward_params(const ConvGeometry& g, std::span<const T> input,
                            std::span<const T> grad_output, std::span<T> grad_weight,
                            std::span<T> grad_bias);

template <typename T>
void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a,
                     std::span<const T> b, std::span<T> c);

}  // namespace parallel

/// Number of OpenMP threads the parallel kernels will use.
int max_threads();

}  // namespace sftgan::kernels
