// Serial reference kernels against the OpenMP kernels on desk-scale shapes.
#include <benchmark/benchmark.h>

#include <vector>

#include "sftgan/kernels.hpp"
#include "sftgan/rng.hpp"

using namespace sftgan;

namespace {

struct Buffers {
  kernels::ConvGeometry geo;
  std::vector<float> x, w, b, y, go, gx, gw, gb;
};

Buffers make_buffers(benchmark::State& state) {
  Buffers buf;
  auto& g = buf.geo;
  g.batch = 8;
  g.in_channels = g.out_channels = static_cast<std::size_t>(state.range(0));
  g.in_h = g.in_w = static_cast<std::size_t>(state.range(1));
  g.kernel_h = g.kernel_w = 3;
  g.pad = 1;
  auto rng = RngStream::keyed(1, "bench");
  auto fill = [&rng](std::vector<float>& v, std::size_t n) {
    v.resize(n);
    for (auto& e : v) e = static_cast<float>(rng.uniform(-1, 1));
  };
  fill(buf.x, g.input_size());
  fill(buf.w, g.weight_size());
  fill(buf.b, g.out_channels);
  fill(buf.go, g.output_size());
  buf.y.resize(g.output_size());
  buf.gx.resize(g.input_size());
  buf.gw.resize(g.weight_size());
  buf.gb.resize(g.out_channels);
  return buf;
}

void flops_counter(benchmark::State& state, const kernels::ConvGeometry& g) {
  state.counters["GFLOP/s"] = benchmark::Counter(
      2.0 * static_cast<double>(g.output_size() * g.in_channels * g.kernel_h * g.kernel_w),
      benchmark::Counter::kIsIterationInvariantRate, benchmark::Counter::kIs1000);
}

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  auto buf = make_buffers(state);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::conv2d_forward<float>(buf.geo, buf.x, buf.w, buf.b, buf.y);
    } else {
      kernels::reference::conv2d_forward<float>(buf.geo, buf.x, buf.w, buf.b, buf.y);
    }
    benchmark::DoNotOptimize(buf.y.data());
  }
  flops_counter(state, buf.geo);
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& state) {
  auto buf = make_buffers(state);
  for (auto _ : state) {
    std::fill(buf.gx.begin(), buf.gx.end(), 0.0f);
    std::fill(buf.gw.begin(), buf.gw.end(), 0.0f);
    std::fill(buf.gb.begin(), buf.gb.end(), 0.0f);
    if constexpr (Parallel) {
      kernels::parallel::conv2d_backward_input<float>(buf.geo, buf.w, buf.go, buf.gx);
      kernels::parallel::conv2d_backward_params<float>(buf.geo, buf.x, buf.go, buf.gw, buf.gb);
    } else {
      kernels::reference::conv2d_backward_input<float>(buf.geo, buf.w, buf.go, buf.gx);
      kernels::reference::conv2d_backward_params<float>(buf.geo, buf.x, buf.go, buf.gw, buf.gb);
    }
    benchmark::DoNotOptimize(buf.gx.data());
    benchmark::DoNotOptimize(buf.gw.data());
  }
  flops_counter(state, buf.geo);
}

// {channels, spatial extent}: LR trunk (8x8), upsampling stages, discriminator input.
void shapes(benchmark::internal::Benchmark* b) {
  b->Args({32, 8})->Args({32, 16})->Args({32, 32})->Args({64, 16})->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/reference")->Apply(shapes);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/parallel")->Apply(shapes);
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/reference")->Apply(shapes);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/parallel")->Apply(shapes);

BENCHMARK_MAIN();
