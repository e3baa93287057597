#pragma once

// Central finite-difference verification of reverse-mode gradients.
//
// The builder is re-executed in double precision: once with gradient
// recording for the analytic reference, then twice per checked coordinate at
// p +/- eps. Large tensors are subsampled by a seeded draw so reports are
// reproducible.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sftgan/autodiff.hpp"
#include "sftgan/rng.hpp"

namespace sftgan {

struct NamedTensor {
  std::string name;
  Tensor<double> value;
};

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double tolerance = 0.0;
  bool pass = true;

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& p : params) m = std::max(m, p.max_rel_error);
    return m;
  }
};

struct GradCheckOptions {
  double eps = 1e-3;
  double tol = 1e-3;
  /// Floor of the relative-error denominator.
  double abs_floor = 1e-6;
  /// Coordinates checked per tensor; larger tensors are subsampled.
  std::size_t max_coords = 32;
  std::uint64_t seed = 0;
};

class NonDeterministicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double relative_error(double analytic, double numeric, double abs_floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
  return std::abs(analytic - numeric) / denom;
}

/// Builder signature: ad::Var<double>(ad::Graph<double>&, std::span<const ad::Var<double>>)
/// returning a scalar loss.
template <typename Builder>
GradCheckReport finite_diff_check(Builder&& build, const std::vector<NamedTensor>& params,
                                  const GradCheckOptions& opt = {}) {
  if (!(opt.eps > 0.0)) throw std::invalid_argument("finite_diff_check: eps must be > 0");

  auto evaluate = [&](const std::vector<Tensor<double>>& values) {
    ad::Graph<double> g;
    std::vector<ad::Var<double>> vars;
    for (const auto& v : values) vars.push_back(g.constant(v));
    const ad::Var<double> loss = build(g, std::span<const ad::Var<double>>(vars));
    return loss.value()[0];
  };

  std::vector<Tensor<double>> values;
  for (const auto& p : params) values.push_back(p.value.clone());

  ad::Graph<double> graph;
  std::vector<ad::Var<double>> vars;
  for (const auto& v : values) vars.push_back(graph.leaf(v, true));
  const ad::Var<double> loss = build(graph, std::span<const ad::Var<double>>(vars));
  if (loss.value().numel() != 1) throw ShapeError("finite_diff_check: builder must return a scalar");
  graph.backward(loss);

  const double base = loss.value()[0];
  const double again = evaluate(values);
  if (again != base) {
    throw NonDeterministicError("finite_diff_check: two identical forward passes disagree (" +
                                std::to_string(base) + " vs " + std::to_string(again) + ")");
  }

  GradCheckReport report;
  report.tolerance = opt.tol;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Tensor<double> analytic = graph.grad(vars[k]);
    const std::size_t n = values[k].numel();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (n > opt.max_coords) {
      auto rng = RngStream::keyed(opt.seed, "gradcheck", k);
      for (std::size_t i = 0; i < opt.max_coords; ++i) {
        std::swap(coords[i], coords[i + rng.below(n - i)]);
      }
      coords.resize(opt.max_coords);
      std::sort(coords.begin(), coords.end());
    }
    ParamCheck check{params[k].name, 0.0, coords.size()};
    for (std::size_t c : coords) {
      std::vector<Tensor<double>> probe = values;
      Tensor<double> bumped = values[k].clone();
      const double orig = bumped[c];
      bumped.mutable_data()[c] = orig + opt.eps;
      probe[k] = bumped;
      const double plus = evaluate(probe);
      Tensor<double> lowered = values[k].clone();
      lowered.mutable_data()[c] = orig - opt.eps;
      probe[k] = lowered;
      const double minus = evaluate(probe);
      const double numeric = (plus - minus) / (2.0 * opt.eps);
      check.max_rel_error =
          std::max(check.max_rel_error, relative_error(analytic[c], numeric, opt.abs_floor));
    }
    report.pass = report.pass && check.max_rel_error <= opt.tol;
    report.params.push_back(std::move(check));
  }
  return report;
}

}  // namespace sftgan
