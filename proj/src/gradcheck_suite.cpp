#include "sftgan/gradcheck_suite.hpp"

#include <functional>

#include "sftgan/losses.hpp"

namespace sftgan {

std::string to_string(GradcheckScope scope) {
  switch (scope) {
    case GradcheckScope::ops: return "ops";
    case GradcheckScope::layers: return "layers";
    case GradcheckScope::end2end: return "end2end";
  }
  return "unknown";
}

GradcheckScope parse_gradcheck_scope(const std::string& name) {
  if (name == "ops") return GradcheckScope::ops;
  if (name == "layers") return GradcheckScope::layers;
  if (name == "end2end") return GradcheckScope::end2end;
  throw std::invalid_argument("unknown gradcheck scope '" + name + "' (expected ops, layers or end2end)");
}

namespace {

using V = ad::Var<double>;
using Vars = std::span<const V>;
using Builder = std::function<V(ad::Graph<double>&, Vars)>;

Tensor<double> random_tensor(RngStream& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.mutable_data()) v = rng.uniform(lo, hi);
  return t;
}

/// sum(out * w) with a fixed random w, so every output element matters.
V project(ad::Graph<double>& g, const V& out, std::uint64_t seed) {
  auto rng = RngStream::keyed(seed, "projection");
  return ad::sum(ad::mul(out, g.constant(random_tensor(rng, out.shape()))));
}

struct Case {
  std::string name;
  std::vector<NamedTensor> inputs;
  Builder build;
};

GradcheckRow run_case(const std::string& scope, const Case& c, const GradCheckOptions& opt) {
  const auto report = finite_diff_check(c.build, c.inputs, opt);
  std::size_t coords = 0;
  for (const auto& p : report.params) coords += p.coords_checked;
  return {scope, c.name, report.max_rel_error(), coords, report.pass};
}

std::vector<Case> op_cases(std::uint64_t seed) {
  auto rng = RngStream::keyed(seed, "gradcheck-ops");
  const Shape x4{2, 3, 5, 4};
  std::vector<Case> cases;
  auto binary = [&](const char* name, ad::BinaryKind kind, Shape b_shape) {
    cases.push_back({name,
                     {{"a", random_tensor(rng, x4)}, {"b", random_tensor(rng, std::move(b_shape))}},
                     [kind, seed](ad::Graph<double>& g, Vars v) {
                       return project(g, ad::ew_binary(v[0], v[1], kind), seed);
                     }});
  };
  binary("add", ad::BinaryKind::add, x4);
  binary("sub", ad::BinaryKind::sub, x4);
  binary("mul", ad::BinaryKind::mul, x4);
  binary("add_broadcast_channel", ad::BinaryKind::add, Shape{2, 3, 1, 1});
  binary("mul_broadcast_channel", ad::BinaryKind::mul, Shape{2, 3, 1, 1});
  binary("mul_broadcast_pixel", ad::BinaryKind::mul, Shape{2, 1, 5, 4});
  cases.push_back({"affine", {{"x", random_tensor(rng, x4)}}, [seed](ad::Graph<double>& g, Vars v) {
                     return project(g, ad::affine(v[0], -1.7, 0.3), seed);
                   }});
  auto conv = [&](const char* name, std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                  bool bias) {
    std::vector<NamedTensor> inputs{{"input", random_tensor(rng, Shape{2, in, 7, 6})},
                                    {"weight", random_tensor(rng, Shape{out, in, k, k})}};
    if (bias) inputs.push_back({"bias", random_tensor(rng, Shape{out})});
    cases.push_back({name, std::move(inputs), [stride, k, bias, seed](ad::Graph<double>& g, Vars v) {
                       return project(g, ad::conv2d(v[0], v[1], bias ? v[2] : V(), stride, k / 2), seed);
                     }});
  };
  conv("conv2d_3x3", 3, 4, 3, 1, true);
  conv("conv2d_3x3_stride2", 3, 4, 3, 2, true);
  conv("conv2d_1x1_nobias", 4, 2, 1, 1, false);
  cases.push_back({"leaky_relu", {{"x", random_tensor(rng, x4)}}, [seed](ad::Graph<double>& g, Vars v) {
                     return project(g, ad::leaky_relu(v[0], 0.2), seed);
                   }});
  cases.push_back({"nearest_upsample", {{"x", random_tensor(rng, Shape{1, 2, 3, 3})}},
                   [seed](ad::Graph<double>& g, Vars v) { return project(g, ad::nearest_upsample(v[0], std::size_t{2}), seed); }});
  cases.push_back({"sum", {{"x", random_tensor(rng, x4)}}, [](ad::Graph<double>&, Vars v) { return ad::sum(v[0]); }});
  cases.push_back({"mean", {{"x", random_tensor(rng, x4)}}, [](ad::Graph<double>&, Vars v) { return ad::mean(v[0]); }});
  cases.push_back({"global_avg_pool", {{"x", random_tensor(rng, x4)}}, [seed](ad::Graph<double>& g, Vars v) {
                     return project(g, ad::global_avg_pool(v[0]), seed);
                   }});
  cases.push_back({"sigmoid", {{"x", random_tensor(rng, x4, -4.0, 4.0)}}, [seed](ad::Graph<double>& g, Vars v) {
                     return project(g, ad::sigmoid(v[0]), seed);
                   }});
  cases.push_back({"log_softmax", {{"x", random_tensor(rng, Shape{3, 5}, -3.0, 3.0)}},
                   [seed](ad::Graph<double>& g, Vars v) { return project(g, ad::log_softmax(v[0]), seed); }});
  cases.push_back({"log_softmax_spatial", {{"x", random_tensor(rng, Shape{2, 4, 2, 3}, -3.0, 3.0)}},
                   [seed](ad::Graph<double>& g, Vars v) { return project(g, ad::log_softmax(v[0]), seed); }});
  cases.push_back({"log_clamped", {{"x", random_tensor(rng, x4, 0.05, 0.95)}}, [seed](ad::Graph<double>& g, Vars v) {
                     return project(g, ad::log_clamped(v[0], 1e-7, 1.0 - 1e-7), seed);
                   }});
  cases.push_back({"pick", {{"x", random_tensor(rng, Shape{3, 4})}}, [](ad::Graph<double>&, Vars v) {
                     const std::size_t labels[3] = {2, 0, 3};
                     return ad::sum(ad::pick(v[0], std::span<const std::size_t>(labels)));
                   }});
  cases.push_back({"concat_channels",
                   {{"a", random_tensor(rng, Shape{2, 2, 3, 3})}, {"b", random_tensor(rng, Shape{2, 3, 3, 3})}},
                   [seed](ad::Graph<double>& g, Vars v) {
                     const V parts[2] = {v[0], v[1]};
                     return project(g, ad::concat_channels<double>(parts), seed);
                   }});
  cases.push_back({"slice_channels", {{"x", random_tensor(rng, x4)}}, [seed](ad::Graph<double>& g, Vars v) {
                     return project(g, ad::slice_channels(v[0], 1, 2), seed);
                   }});
  cases.push_back({"reshape", {{"x", random_tensor(rng, x4)}}, [seed](ad::Graph<double>& g, Vars v) {
                     return project(g, ad::reshape(v[0], Shape{2, 60}), seed);
                   }});
  return cases;
}

/// Checks a float-built module in double: parameters and inputs are all
/// finite-difference targets.
Case module_case(const std::string& name, const ParameterSet<float>& params,
                 std::vector<NamedTensor> inputs,
                 std::function<V(Binding<double>&, ad::Graph<double>&, Vars)> forward) {
  auto pd = std::make_shared<ParameterSet<double>>(params.cast<double>());
  const std::size_t n_inputs = inputs.size();
  for (const auto& p : *pd) inputs.push_back({p.name, p.value});
  return {name, std::move(inputs), [pd, n_inputs, forward](ad::Graph<double>& g, Vars v) {
            Binding<double> bind(g, *pd, v.subspan(n_inputs));
            return forward(bind, g, v.first(n_inputs));
          }};
}

std::vector<Case> layer_cases(std::uint64_t seed) {
  auto rng = RngStream::keyed(seed, "gradcheck-layers");
  auto init = RngStream::keyed(seed, "gradcheck-layer-init");
  std::vector<Case> cases;
  const std::size_t C = 4, Cc = 3, K = 3;

  cases.push_back({"sft_apply",
                   {{"features", random_tensor(rng, Shape{2, C, 4, 4})},
                    {"gamma", random_tensor(rng, Shape{2, C, 4, 4})},
                    {"beta", random_tensor(rng, Shape{2, C, 4, 4})}},
                   [seed](ad::Graph<double>& g, Vars v) {
                     return project(g, sft_apply(v[0], ModulationPair<double>{v[1], v[2]}), seed);
                   }});
  {
    ParameterSet<float> ps;
    const auto layer = make_sft_layer(ps, "sft", Cc, C, init);
    cases.push_back(module_case("sft_layer", ps,
                                {{"features", random_tensor(rng, Shape{2, C, 4, 4})},
                                 {"shared", random_tensor(rng, Shape{2, Cc, 4, 4})}},
                                [layer, seed](Binding<double>& b, ad::Graph<double>& g, Vars in) {
                                  return project(g, layer.forward(b, in[0], in[1]), seed);
                                }));
  }
  {
    ParameterSet<float> ps;
    const auto net = make_condition_network(ps, "cond", K, 5, Cc, init);
    cases.push_back(module_case("condition_network", ps, {{"psi", random_tensor(rng, Shape{1, K, 3, 3}, 0.0, 1.0)}},
                                [net, seed](Binding<double>& b, ad::Graph<double>& g, Vars in) {
                                  return project(g, net.forward(b, in[0]), seed);
                                }));
  }
  for (const auto kind : {BlockConditioning::sft, BlockConditioning::film, BlockConditioning::plain}) {
    ParameterSet<float> ps;
    const auto block = make_res_block(ps, "block", kind, C, Cc, init);
    const std::string name = kind == BlockConditioning::sft    ? "res_block_sft"
                             : kind == BlockConditioning::film ? "res_block_film"
                                                               : "res_block_plain";
    cases.push_back(module_case(name, ps,
                                {{"features", random_tensor(rng, Shape{1, C, 4, 4})},
                                 {"shared", random_tensor(rng, Shape{1, Cc, 4, 4})}},
                                [block, seed](Binding<double>& b, ad::Graph<double>& g, Vars in) {
                                  return project(g, block.forward(b, in[0], in[1]), seed);
                                }));
  }
  {
    DiscriminatorConfig dc;
    dc.num_classes = K;
    dc.channels = {4, 4, 6};
    dc.strides = {1, 2, 2};
    dc.seed = seed;
    auto d = std::make_shared<Discriminator>(dc);
    cases.push_back(module_case("discriminator", d->params(), {{"image", random_tensor(rng, Shape{2, 3, 8, 8}, 0.0, 1.0)}},
                                [d](Binding<double>& b, ad::Graph<double>&, Vars in) {
                                  const auto out = d->forward(b, in[0]);
                                  const std::size_t labels[2] = {1, 2};
                                  return ad::add(discriminator_loss(out.prob, ad::affine(out.prob, 0.5, 0.1)),
                                                 aux_class_loss(out.class_log_probs, std::span<const std::size_t>(labels)));
                                }));
  }
  {
    auto phi = std::make_shared<FeatureNet>(seed, 3);
    cases.push_back({"perceptual_loss",
                     {{"pred", random_tensor(rng, Shape{1, 3, 8, 8}, 0.0, 1.0)}},
                     [phi, target = random_tensor(rng, Shape{1, 3, 8, 8}, 0.0, 1.0)](ad::Graph<double>& g, Vars v) {
                       const auto pd = phi->params().cast<double>();
                       Binding<double> b(g, pd, false);
                       return perceptual_loss(b, *phi, v[0], g.constant(target));
                     }});
  }
  for (const bool saturating : {false, true}) {
    cases.push_back({saturating ? "adversarial_loss_g_saturating" : "adversarial_loss_g",
                     {{"d", random_tensor(rng, Shape{4}, 0.05, 0.95)}},
                     [saturating](ad::Graph<double>&, Vars v) { return adversarial_loss_g(v[0], saturating); }});
  }
  cases.push_back({"discriminator_loss",
                   {{"d_real", random_tensor(rng, Shape{4}, 0.05, 0.95)}, {"d_fake", random_tensor(rng, Shape{4}, 0.05, 0.95)}},
                   [](ad::Graph<double>&, Vars v) { return discriminator_loss(v[0], v[1]); }});
  cases.push_back({"aux_class_loss", {{"logits", random_tensor(rng, Shape{3, K}, -2.0, 2.0)}},
                   [](ad::Graph<double>&, Vars v) {
                     const std::size_t labels[3] = {0, 2, 1};
                     return aux_class_loss(ad::log_softmax(v[0]), std::span<const std::size_t>(labels));
                   }});
  return cases;
}

std::vector<Case> end2end_cases(std::uint64_t seed) {
  auto rng = RngStream::keyed(seed, "gradcheck-end2end");
  std::vector<Case> cases;
  const std::size_t K = 3;
  for (const auto mode : {ConditioningMode::sft, ConditioningMode::film, ConditioningMode::input_concat,
                          ConditioningMode::compositional}) {
    GeneratorConfig gc;
    gc.mode = mode;
    gc.num_classes = K;
    gc.width = 6;
    gc.blocks = 2;
    gc.cond_hidden = 6;
    gc.cond_channels = 4;
    gc.scale = 4;
    gc.seed = seed;
    auto gen = std::make_shared<Generator>(gc);
    DiscriminatorConfig dc;
    dc.num_classes = K;
    dc.hr_size = 16;
    dc.channels = {4, 4, 6};
    dc.strides = {1, 2, 2};
    dc.seed = seed + 1;
    auto disc = std::make_shared<Discriminator>(dc);
    auto phi = std::make_shared<FeatureNet>(seed + 2, 3);
    auto d_params = std::make_shared<ParameterSet<double>>(disc->params().cast<double>());
    auto phi_params = std::make_shared<ParameterSet<double>>(phi->params().cast<double>());

    const auto x = random_tensor(rng, Shape{2, 3, 4, 4}, 0.0, 1.0);
    Tensor<double> psi(Shape{2, K, 4, 4});
    {
      auto p = psi.mutable_data();
      for (std::size_t n = 0; n < 2; ++n) {
        for (std::size_t q = 0; q < 16; ++q) {
          double w[K], total = 0;
          for (auto& v : w) total += (v = rng.uniform(0.1, 1.0));
          for (std::size_t c = 0; c < K; ++c) p[(n * K + c) * 16 + q] = w[c] / total;
        }
      }
    }
    const auto y = random_tensor(rng, Shape{2, 3, 16, 16}, 0.0, 1.0);
    cases.push_back(module_case(
        "generator_total_loss_" + to_string(mode), gen->params(), {},
        [=](Binding<double>& b, ad::Graph<double>& g, Vars) {
          const auto fake = gen->forward(b, g.constant(x), g.constant(psi));
          Binding<double> db(g, *d_params, false);
          Binding<double> pb(g, *phi_params, false);
          const auto d_out = disc->forward(db, fake);
          const std::size_t labels[2] = {0, 2};
          LossWeights w;
          w.adv = 0.5;
          w.cls = 0.5;
          return generator_total_loss(pb, *phi, fake, g.constant(y), d_out,
                                      std::span<const std::size_t>(labels), w).total;
        }));
  }
  return cases;
}

}  // namespace

std::vector<GradcheckRow> run_gradcheck_suite(GradcheckScope scope, std::uint64_t seed, double tol) {
  GradCheckOptions opt;
  opt.eps = 1e-5;
  opt.tol = tol;
  opt.abs_floor = 1e-6;
  opt.seed = seed;
  std::vector<Case> cases;
  switch (scope) {
    case GradcheckScope::ops: cases = op_cases(seed); break;
    case GradcheckScope::layers: cases = layer_cases(seed); break;
    case GradcheckScope::end2end:
      cases = end2end_cases(seed);
      opt.max_coords = 12;
      break;
  }
  std::vector<GradcheckRow> rows;
  for (const auto& c : cases) rows.push_back(run_case(to_string(scope), c, opt));
  return rows;
}

}  // namespace sftgan
