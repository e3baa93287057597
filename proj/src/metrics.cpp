#include "sftgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <ostream>

namespace sftgan {

double psnr(const Tensor<float>& a, const Tensor<float>& b, double peak) {
  if (a.shape() != b.shape()) {
    throw ShapeError("psnr: shapes " + a.shape().str() + " and " + b.shape().str() + " differ");
  }
  if (a.numel() == 0) throw std::invalid_argument("psnr: empty images");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.numel());
  if (mse < 1e-12) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

TextureSignature texture_signature(const Tensor<float>& img, std::span<const std::uint8_t> mask) {
  const Shape& s = img.shape();
  std::size_t n = 1, off = 0;
  if (s.rank() == 4) {
    n = s[0];
    off = 1;
  } else if (s.rank() != 3) {
    throw ShapeError("texture_signature expects 3 x H x W or N x 3 x H x W, got " + s.str());
  }
  if (s[off] != 3) throw ShapeError("texture_signature expects 3 channels, got " + s.str());
  const std::size_t H = s[off + 1], W = s[off + 2], plane = H * W;
  if (!mask.empty() && mask.size() != plane) throw ShapeError("texture_signature: mask size mismatch");
  const std::size_t selected =
      mask.empty() ? plane : static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
  if (selected == 0 || n == 0) throw std::invalid_argument("texture_signature: empty mask");

  TextureSignature sig{std::vector<double>(kMagnitudeBins, 0.0), std::vector<double>(kOrientationBins, 0.0)};
  std::vector<double> luma(plane);
  std::size_t oriented = 0;
  auto v = img.data();
  for (std::size_t b = 0; b < n; ++b) {
    const float* base = v.data() + b * 3 * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      luma[p] = 0.299 * base[p] + 0.587 * base[plane + p] + 0.114 * base[2 * plane + p];
    }
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        if (!mask.empty() && mask[y * W + x] == 0) continue;
        const std::size_t xl = x > 0 ? x - 1 : 0, xr = std::min(x + 1, W - 1);
        const std::size_t yu = y > 0 ? y - 1 : 0, yd = std::min(y + 1, H - 1);
        const double gx = 0.5 * (luma[y * W + xr] - luma[y * W + xl]);
        const double gy = 0.5 * (luma[yd * W + x] - luma[yu * W + x]);
        const double mag = std::hypot(gx, gy);
        const auto mbin = std::min(kMagnitudeBins - 1, static_cast<std::size_t>(mag * kMagnitudeBins));
        sig.magnitude[mbin] += 1.0;
        if (mag > 1e-6) {
          double theta = std::atan2(gy, gx);
          if (theta < 0) theta += std::numbers::pi;
          const auto obin = std::min(kOrientationBins - 1,
                                     static_cast<std::size_t>(theta / std::numbers::pi * kOrientationBins));
          sig.orientation[obin] += 1.0;
          ++oriented;
        }
      }
    }
  }
  const double total = static_cast<double>(selected * n);
  for (double& h : sig.magnitude) h /= total;
  if (oriented == 0) {
    sig.orientation[0] = 1.0;
  } else {
    for (double& h : sig.orientation) h /= static_cast<double>(oriented);
  }
  return sig;
}

double signature_distance(const TextureSignature& a, const TextureSignature& b) {
  if (a.magnitude.size() != b.magnitude.size() || a.orientation.size() != b.orientation.size()) {
    throw std::invalid_argument("signature_distance: binning mismatch");
  }
  auto chi = [](const std::vector<double>& p, const std::vector<double>& q) {
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) d += (p[i] - q[i]) * (p[i] - q[i]) / (p[i] + q[i] + 1e-12);
    return d;
  };
  return chi(a.magnitude, b.magnitude) + chi(a.orientation, b.orientation);
}

double mean_spatial_variance(const Tensor<float>& map) {
  const Nchw s = as_nchw(map.shape(), "mean_spatial_variance");
  const std::size_t plane = s.plane();
  double total = 0.0;
  auto v = map.data();
  for (std::size_t k = 0; k < s.n * s.c; ++k) {
    const float* m = v.data() + k * plane;
    double mean = 0.0;
    for (std::size_t p = 0; p < plane; ++p) mean += m[p];
    mean /= static_cast<double>(plane);
    double var = 0.0;
    for (std::size_t p = 0; p < plane; ++p) var += (m[p] - mean) * (m[p] - mean);
    total += var / static_cast<double>(plane);
  }
  return total / static_cast<double>(s.n * s.c);
}

std::vector<std::uint8_t> normalize_to_gray(std::span<const float> values) {
  std::vector<std::uint8_t> out(values.size(), 128);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*hi == *lo) return out;
  const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround((values[i] - *lo) / range * 255.0));
  }
  return out;
}

std::vector<ModulationMap> export_modulation_maps(const Generator& g, const Tensor<float>& x,
                                                  const Tensor<float>& psi,
                                                  const std::vector<std::size_t>& layers,
                                                  std::size_t top_k) {
  ModulationTrace trace;
  g.infer(x, psi, &trace);
  std::vector<ModulationMap> out;
  for (const std::size_t layer : layers) {
    if (layer >= trace.gamma.size()) {
      throw std::out_of_range("modulation layer " + std::to_string(layer) + " out of range (" +
                              std::to_string(trace.gamma.size()) + " layers)");
    }
    for (const auto& [name, maps] : {std::pair<const char*, const Tensor<float>*>{"gamma", &trace.gamma[layer]},
                                     std::pair<const char*, const Tensor<float>*>{"beta", &trace.beta[layer]}}) {
      const Nchw s = as_nchw(maps->shape(), "modulation map");
      const std::size_t plane = s.plane();
      std::vector<double> variance(s.c);
      for (std::size_t c = 0; c < s.c; ++c) {
        const auto ch = maps->data().subspan(c * plane, plane);
        const double mean = std::accumulate(ch.begin(), ch.end(), 0.0) / static_cast<double>(plane);
        double var = 0.0;
        for (float v : ch) var += (v - mean) * (v - mean);
        variance[c] = var / static_cast<double>(plane);
      }
      std::vector<std::size_t> order(s.c);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return variance[a] > variance[b]; });
      for (std::size_t k = 0; k < std::min(top_k, s.c); ++k) {
        const std::size_t c = order[k];
        ModulationMap m;
        m.layer = layer;
        m.param = name;
        m.channel = c;
        m.height = s.h;
        m.width = s.w;
        m.variance = variance[c];
        m.gray = normalize_to_gray(maps->data().subspan(c * plane, plane));
        out.push_back(std::move(m));
      }
    }
  }
  return out;
}

void write_metrics_report(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "# signature_distance is a texture proxy: chi-square between gradient histograms\n";
  out << "image_id,category,model,psnr,signature_distance\n";
  for (const auto& r : rows) {
    out << r.image_id << ',' << r.category << ',' << r.model << ',' << std::setprecision(10) << r.psnr
        << ',' << r.signature_distance << "\n";
  }
}

}  // namespace sftgan
