#include "sftgan/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "sftgan/datagen.hpp"
#include "sftgan/gradcheck_suite.hpp"
#include "sftgan/metrics.hpp"
#include "sftgan/ppm.hpp"
#include "sftgan/tensor_file.hpp"
#include "sftgan/trainer.hpp"

namespace fs = std::filesystem;

namespace sftgan {

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Tensor<float> add_batch_axis(const Tensor<float>& t) {
  std::vector<std::size_t> dims{1};
  dims.insert(dims.end(), t.shape().dims().begin(), t.shape().dims().end());
  return t.reshaped(Shape(std::move(dims)));
}

Tensor<float> drop_batch_axis(const Tensor<float>& t) {
  const auto& d = t.shape().dims();
  return t.reshaped(Shape(std::vector<std::size_t>(d.begin() + 1, d.end())));
}

/// HR-resolution probability maps (C x H x W or 1 x C x H x W) to LR.
Tensor<float> psi_to_lr(const Tensor<float>& psi_hr, std::size_t scale, std::size_t h, std::size_t w,
                        std::size_t classes) {
  Tensor<float> maps = psi_hr;
  if (maps.shape().rank() == 4 && maps.shape()[0] == 1) maps = drop_batch_axis(maps);
  if (maps.shape().rank() != 3) throw ShapeError("probability maps must be C x H x W, got " + psi_hr.shape().str());
  if (maps.shape()[0] != classes) {
    throw ShapeError("probability maps have " + std::to_string(maps.shape()[0]) +
                     " channels, checkpoint expects " + std::to_string(classes));
  }
  if (maps.shape()[1] != h * scale || maps.shape()[2] != w * scale) {
    throw ShapeError("probability maps " + maps.shape().str() + " do not cover the input at x" +
                     std::to_string(scale) + " (expected " + std::to_string(h * scale) + "x" +
                     std::to_string(w * scale) + ")");
  }
  return nearest_downsample(maps, scale);
}

Tensor<float> nearest_upsample_image(const Tensor<float>& img, std::size_t s) {
  const std::size_t C = img.shape()[0], h = img.shape()[1], w = img.shape()[2];
  Tensor<float> out(Shape{C, h * s, w * s});
  auto o = out.mutable_data();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < h * s; ++y) {
      for (std::size_t x = 0; x < w * s; ++x) o[(c * h * s + y) * w * s + x] = img[(c * h + y / s) * w + x / s];
    }
  }
  return out;
}

/// Places equally tall 3 x H x W images next to each other.
Tensor<float> side_by_side(const std::vector<Tensor<float>>& images) {
  const std::size_t H = images.front().shape()[1];
  std::size_t W = 0;
  for (const auto& im : images) W += im.shape()[2];
  Tensor<float> out(Shape{3, H, W});
  auto o = out.mutable_data();
  std::size_t x0 = 0;
  for (const auto& im : images) {
    const std::size_t w = im.shape()[2];
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < w; ++x) o[(c * H + y) * W + x0 + x] = im[(c * H + y) * w + x];
      }
    }
    x0 += w;
  }
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create directory " + dir.string());
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out_dir;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::size_t size = 64;
  std::string layout = "voronoi";
  std::string categories = "sky,mountain,plant,grass,water,animal,building";
  std::size_t scale = 4;
  double sigma = 2.0;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  SceneSpec spec;
  spec.height = spec.width = a.size;
  spec.layout = parse_layout(a.layout);
  spec.categories.clear();
  for (const auto& name : split_list(a.categories)) spec.categories.push_back(parse_texture_kind(name));
  spec.scale = a.scale;
  spec.sigma = a.sigma;
  spec.validate();

  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) throw std::runtime_error("cannot write " + (dir / "manifest.txt").string());
  for (std::size_t i = 0; i < a.count; ++i) {
    spec.seed = hash_combine(a.seed, i);
    const Scene scene = compose_scene(spec);
    std::ostringstream stem;
    stem << "scene_" << std::setw(4) << std::setfill('0') << i;
    save_ppm(dir / (stem.str() + "_hr.ppm"), tensor_to_ppm(scene.hr));
    save_ppm(dir / (stem.str() + "_lr.ppm"), tensor_to_ppm(scene.lr));
    save_tensor(dir / (stem.str() + "_psi.sftb"), scene.soft);
    manifest << stem.str() << " seed=" << spec.seed << " layout=" << to_string(spec.layout)
             << " size=" << a.size << " scale=" << a.scale << " hash=" << std::hex << scene_hash(scene)
             << std::dec << "\n";
  }
  if (!manifest) throw std::runtime_error("failed writing manifest");
  out << "wrote " << a.count << " scenes to " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string resume;
  std::optional<std::uint64_t> iters;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig cfg = load_config(a.config);
  if (a.iters) cfg.iters = *a.iters;
  TrainState state = [&] {
    if (a.resume.empty()) return init_state(cfg);
    auto loaded = checkpoint_load(a.resume);
    if (loaded.config_hash != config_hash(cfg)) {
      err << "warning: checkpoint " << a.resume << " was written with a different configuration\n";
    }
    return std::move(loaded.state);
  }();
  try {
    train_gan(state, cfg);
  } catch (const TrainingAborted& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  out << "trained to iteration " << state.iteration << "; checkpoint " << cfg.checkpoint_path
      << ", log " << cfg.log_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct InferArgs {
  std::string checkpoint, input, psi, output;
  bool background_only = false;
};

int cmd_infer(const InferArgs& a, std::ostream& out) {
  const auto loaded = checkpoint_load(a.checkpoint);
  const Generator& g = loaded.state.generator;
  const auto& gc = g.config();
  const Tensor<float> lr = ppm_to_tensor(load_ppm(a.input));
  const std::size_t h = lr.shape()[1], w = lr.shape()[2];
  if (h < 8 || w < 8) throw ShapeError("input extents must be >= 8, got " + lr.shape().str());
  Tensor<float> psi;
  if (a.background_only) {
    psi = uniform_maps(gc.num_classes, gc.num_classes - 1, h, w);
  } else {
    psi = psi_to_lr(load_tensor(a.psi), gc.scale, h, w, gc.num_classes);
  }
  const auto sr = g.infer(add_batch_axis(lr), add_batch_axis(psi));
  save_ppm(a.output, tensor_to_ppm(drop_batch_axis(sr)));
  out << "wrote " << sr.shape()[2] << "x" << sr.shape()[3] << " image to " << a.output << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_gradcheck(const std::string& scope, std::uint64_t seed, std::ostream& out) {
  std::vector<GradcheckScope> scopes;
  if (scope == "all") {
    scopes = {GradcheckScope::ops, GradcheckScope::layers, GradcheckScope::end2end};
  } else {
    scopes = {parse_gradcheck_scope(scope)};
  }
  bool pass = true;
  out << std::left << std::setw(9) << "scope" << std::setw(36) << "check" << std::setw(14)
      << "max_rel_err" << std::setw(8) << "coords" << "result\n";
  for (const auto s : scopes) {
    for (const auto& row : run_gradcheck_suite(s, seed)) {
      pass = pass && row.pass;
      out << std::left << std::setw(9) << row.scope << std::setw(36) << row.name << std::setw(14)
          << std::scientific << std::setprecision(3) << row.max_rel_error << std::defaultfloat
          << std::setw(8) << row.coords << (row.pass ? "pass" : "FAIL") << "\n";
    }
  }
  out << (pass ? "all checks passed\n" : "some checks FAILED\n");
  return pass ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------

struct EvalScene {
  Scene scene;
  std::string id;
};

std::vector<EvalScene> evaluation_scenes(const TrainConfig& cfg, std::size_t count) {
  std::vector<EvalScene> out;
  for (std::size_t i = 0; i < count; ++i) {
    SceneSpec spec;
    spec.height = spec.width = 2 * cfg.hr_patch;
    spec.categories = cfg.categories;
    spec.layout = i % 2 == 0 ? LayoutKind::half_plane : LayoutKind::voronoi;
    spec.scale = cfg.scale;
    spec.sigma = cfg.sigma;
    spec.seed = hash_combine(cfg.seed ^ 0xe7a1, i);
    out.push_back({compose_scene(spec), "eval" + std::to_string(i)});
  }
  return out;
}

std::string class_name(const TrainConfig& cfg, std::size_t k) {
  return k < cfg.categories.size() ? to_string(cfg.categories[k]) : "background";
}

/// PSNR on the whole image plus one signature distance per present class.
std::vector<MetricsRow> evaluate_model(const Generator& g, const TrainConfig& cfg,
                                       const std::vector<EvalScene>& scenes, const std::string& model) {
  std::vector<MetricsRow> rows;
  for (const auto& es : scenes) {
    const auto& sc = es.scene;
    const auto sr = drop_batch_axis(g.infer(add_batch_axis(sc.lr), add_batch_axis(sc.lr_psi)));
    rows.push_back({es.id, "all", model, psnr(sr, sc.hr), signature_distance(texture_signature(sr), texture_signature(sc.hr))});
    for (std::size_t k = 0; k < cfg.num_classes(); ++k) {
      std::vector<std::uint8_t> mask(sc.labels.size());
      for (std::size_t p = 0; p < mask.size(); ++p) mask[p] = sc.labels[p] == k;
      if (std::count(mask.begin(), mask.end(), 1) == 0) continue;
      rows.push_back({es.id, class_name(cfg, k), model, psnr(sr, sc.hr),
                      signature_distance(texture_signature(sr, mask), texture_signature(sc.hr, mask))});
    }
  }
  return rows;
}

/// Two-region probability maps: left half class a, right half class b.
Tensor<float> two_region_psi(std::size_t classes, std::size_t a, std::size_t b, std::size_t h, std::size_t w) {
  Tensor<float> psi(Shape{1, classes, h, w});
  auto p = psi.mutable_data();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) p[((x < w / 2 ? a : b) * h + y) * w + x] = 1.0f;
  }
  return psi;
}

double gamma_spatial_variance(const Generator& g, std::size_t lr_size) {
  const std::size_t C = g.config().num_classes;
  const auto trace = g.modulation_maps(two_region_psi(C, 0, C - 1, lr_size, lr_size));
  double v = 0.0;
  for (const auto& gm : trace.gamma) v += mean_spatial_variance(gm);
  return trace.gamma.empty() ? 0.0 : v / static_cast<double>(trace.gamma.size());
}

int cmd_ablate(const std::string& config, const std::string& modes, const std::string& out_dir,
               std::optional<std::uint64_t> iters, std::ostream& out, std::ostream& err) {
  TrainConfig base = load_config(config);
  if (iters) base.iters = *iters;
  std::vector<ConditioningMode> mode_list;
  for (const auto& m : split_list(modes)) mode_list.push_back(parse_mode(m));
  if (mode_list.empty()) throw ConfigError("no modes given");
  const fs::path dir(out_dir);
  ensure_dir(dir);
  const auto scenes = evaluation_scenes(base, 4);

  std::ofstream table(dir / "ablation.csv", std::ios::trunc);
  if (!table) throw std::runtime_error("cannot write " + (dir / "ablation.csv").string());
  table << "# signature distances are a texture proxy (gradient-histogram chi-square), lower is closer\n";
  table << "mode,params,gamma_spatial_variance,mean_psnr,mean_signature_distance";
  for (std::size_t k = 0; k < base.num_classes(); ++k) table << ",sig_" << class_name(base, k);
  table << "\n";

  const auto& showcase = scenes.front().scene;
  std::vector<Tensor<float>> panels{nearest_upsample_image(showcase.lr, base.scale)};
  std::vector<MetricsRow> all_rows;
  for (const auto mode : mode_list) {
    TrainConfig cfg = base;
    cfg.mode = mode;
    cfg.checkpoint_path = (dir / ("checkpoint_" + to_string(mode) + ".sftc")).string();
    cfg.log_path = (dir / ("train_log_" + to_string(mode) + ".csv")).string();
    TrainState state = init_state(cfg);
    try {
      train_gan(state, cfg);
    } catch (const TrainingAborted& e) {
      err << "error: mode " << to_string(mode) << ": " << e.what() << "\n";
      return kExitFailure;
    }
    const Generator& g = state.generator;
    const auto rows = evaluate_model(g, cfg, scenes, to_string(mode));
    all_rows.insert(all_rows.end(), rows.begin(), rows.end());

    double psnr_sum = 0, sig_sum = 0;
    std::size_t n_all = 0;
    std::map<std::string, std::pair<double, std::size_t>> per_class;
    for (const auto& r : rows) {
      if (r.category == "all") {
        psnr_sum += r.psnr;
        sig_sum += r.signature_distance;
        ++n_all;
      } else {
        per_class[r.category].first += r.signature_distance;
        per_class[r.category].second += 1;
      }
    }
    table << to_string(mode) << ',' << g.params().scalar_count() << ',';
    if (g.modulation_layers() == 0) {
      table << "NA";
    } else {
      table << std::setprecision(10) << gamma_spatial_variance(g, cfg.hr_patch / cfg.scale);
    }
    table << ',' << psnr_sum / static_cast<double>(n_all) << ',' << sig_sum / static_cast<double>(n_all);
    for (std::size_t k = 0; k < cfg.num_classes(); ++k) {
      const auto it = per_class.find(class_name(cfg, k));
      table << ',';
      if (it == per_class.end()) {
        table << "NA";
      } else {
        table << it->second.first / static_cast<double>(it->second.second);
      }
    }
    table << "\n";
    const auto sr = drop_batch_axis(g.infer(add_batch_axis(showcase.lr), add_batch_axis(showcase.lr_psi)));
    save_ppm(dir / ("ablate_" + to_string(mode) + ".ppm"), tensor_to_ppm(sr));
    panels.push_back(sr);
    out << "mode " << to_string(mode) << ": trained " << state.iteration << " iterations\n";
  }
  panels.push_back(showcase.hr);
  save_ppm(dir / "ablate_side_by_side.ppm", tensor_to_ppm(side_by_side(panels)));
  std::ofstream metrics(dir / "metrics.csv", std::ios::trunc);
  write_metrics_report(metrics, all_rows);
  out << "wrote " << (dir / "ablation.csv").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct DumpArgs {
  std::string checkpoint, psi, input, out_dir, layers = "0";
  std::size_t top_k = 4;
};

int cmd_dump_maps(const DumpArgs& a, std::ostream& out) {
  const auto loaded = checkpoint_load(a.checkpoint);
  const Generator& g = loaded.state.generator;
  const auto& gc = g.config();
  Tensor<float> psi_hr = load_tensor(a.psi);
  if (psi_hr.shape().rank() == 4 && psi_hr.shape()[0] == 1) psi_hr = drop_batch_axis(psi_hr);
  if (psi_hr.shape().rank() != 3) throw ShapeError("probability maps must be C x H x W");
  const std::size_t h = psi_hr.shape()[1] / gc.scale, w = psi_hr.shape()[2] / gc.scale;
  const Tensor<float> lr = a.input.empty() ? Tensor<float>(Shape{3, h, w}, 0.5f) : ppm_to_tensor(load_ppm(a.input));
  if (lr.shape()[1] != h || lr.shape()[2] != w) {
    throw ShapeError("input " + lr.shape().str() + " does not match probability maps " + psi_hr.shape().str());
  }
  const auto psi = psi_to_lr(psi_hr, gc.scale, h, w, gc.num_classes);
  std::vector<std::size_t> layers;
  for (const auto& s : split_list(a.layers)) layers.push_back(std::stoul(s));
  const auto maps = export_modulation_maps(g, add_batch_axis(lr), add_batch_axis(psi), layers, a.top_k);
  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  std::ofstream index(dir / "maps.csv", std::ios::trunc);
  index << "file,layer,param,channel,spatial_variance\n";
  for (const auto& m : maps) {
    const std::string name = "layer" + std::to_string(m.layer) + "_" + m.param + "_c" + std::to_string(m.channel) + ".ppm";
    save_ppm(dir / name, gray_to_ppm(m.gray, m.height, m.width));
    index << name << ',' << m.layer << ',' << m.param << ',' << m.channel << ',' << std::setprecision(10)
          << m.variance << "\n";
  }
  out << "wrote " << maps.size() << " maps to " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct MetricsArgs {
  std::string reference, psi, output, categories;
  std::vector<std::string> images;
};

int cmd_metrics(const MetricsArgs& a, std::ostream& out) {
  const Tensor<float> ref = ppm_to_tensor(load_ppm(a.reference));
  const std::size_t H = ref.shape()[1], W = ref.shape()[2];
  std::vector<std::vector<std::uint8_t>> masks;
  std::vector<std::string> names;
  if (!a.psi.empty()) {
    Tensor<float> psi = load_tensor(a.psi);
    if (psi.shape().rank() == 4 && psi.shape()[0] == 1) psi = drop_batch_axis(psi);
    if (psi.shape().rank() != 3 || psi.shape()[1] != H || psi.shape()[2] != W) {
      throw ShapeError("probability maps " + psi.shape().str() + " do not match reference " + ref.shape().str());
    }
    const std::size_t C = psi.shape()[0], plane = H * W;
    const auto given = split_list(a.categories);
    masks.assign(C, std::vector<std::uint8_t>(plane, 0));
    for (std::size_t p = 0; p < plane; ++p) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < C; ++c) {
        if (psi[c * plane + p] > psi[best * plane + p]) best = c;
      }
      masks[best][p] = 1;
    }
    for (std::size_t c = 0; c < C; ++c) {
      names.push_back(c < given.size() ? given[c] : (c + 1 == C ? "background" : "class" + std::to_string(c)));
    }
  }
  std::vector<MetricsRow> rows;
  for (const auto& path : a.images) {
    const Tensor<float> img = ppm_to_tensor(load_ppm(path));
    const std::string id = fs::path(path).stem().string();
    const double p = psnr(img, ref);
    rows.push_back({id, "all", id, p, signature_distance(texture_signature(img), texture_signature(ref))});
    for (std::size_t c = 0; c < masks.size(); ++c) {
      if (std::count(masks[c].begin(), masks[c].end(), 1) == 0) continue;
      rows.push_back({id, names[c], id, p,
                      signature_distance(texture_signature(img, masks[c]), texture_signature(ref, masks[c]))});
    }
  }
  if (a.output.empty()) {
    write_metrics_report(out, rows);
  } else {
    std::ofstream f(a.output, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + a.output);
    write_metrics_report(f, rows);
    out << "wrote " << rows.size() << " rows to " << a.output << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic-prior super-resolution toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate procedural scenes with probability maps");
  c_synth->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  c_synth->add_option("--count", synth.count, "Number of scenes")->required();
  c_synth->add_option("--seed", synth.seed, "Master seed");
  c_synth->add_option("--size", synth.size, "HR canvas extent");
  c_synth->add_option("--layout", synth.layout, "single, half_plane or voronoi");
  c_synth->add_option("--categories", synth.categories, "Comma-separated category names");
  c_synth->add_option("--scale", synth.scale, "Downsampling factor");
  c_synth->add_option("--sigma", synth.sigma, "Softening radius of the probability maps");

  TrainArgs train;
  std::uint64_t train_iters = 0;
  auto* c_train = app.add_subcommand("train", "Train a generator/discriminator pair");
  c_train->add_option("--config", train.config, "Config file")->required();
  c_train->add_option("--resume", train.resume, "Checkpoint to resume from");
  auto* o_train_iters = c_train->add_option("--iters", train_iters, "Override the iteration budget");

  InferArgs infer;
  auto* c_infer = app.add_subcommand("infer", "Super-resolve an LR image");
  c_infer->add_option("--checkpoint", infer.checkpoint, "Checkpoint file")->required();
  c_infer->add_option("--input", infer.input, "LR image (PPM)")->required();
  auto* o_psi = c_infer->add_option("--psi", infer.psi, "HR-resolution probability maps (TensorFile)");
  auto* o_bg = c_infer->add_flag("--background-only", infer.background_only, "Condition on background everywhere");
  o_psi->excludes(o_bg);
  c_infer->add_option("--output", infer.output, "Output image (PPM)")->required();

  std::string gc_scope = "all";
  std::uint64_t gc_seed = 0;
  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  c_grad->add_option("--scope", gc_scope, "ops, layers, end2end or all")
      ->check(CLI::IsMember({"ops", "layers", "end2end", "all"}));
  c_grad->add_option("--seed", gc_seed, "Seed for inputs and coordinate sampling");

  std::string ab_config, ab_modes = "sft,input_concat,film,compositional", ab_out;
  std::uint64_t ab_iters = 0;
  auto* c_ablate = app.add_subcommand("ablate", "Train and compare conditioning modes");
  c_ablate->add_option("--config", ab_config, "Config file")->required();
  c_ablate->add_option("--modes", ab_modes, "Comma-separated modes");
  c_ablate->add_option("--out-dir", ab_out, "Output directory")->required();
  auto* o_ab_iters = c_ablate->add_option("--iters", ab_iters, "Override the iteration budget");

  DumpArgs dump;
  auto* c_dump = app.add_subcommand("dump-maps", "Export modulation maps as grayscale PPMs");
  c_dump->add_option("--checkpoint", dump.checkpoint, "Checkpoint file")->required();
  c_dump->add_option("--psi", dump.psi, "HR-resolution probability maps (TensorFile)")->required();
  c_dump->add_option("--input", dump.input, "LR image (PPM); mid-gray if omitted");
  c_dump->add_option("--layers", dump.layers, "Comma-separated modulation layer indices");
  c_dump->add_option("--top-k", dump.top_k, "Channels per map, by spatial variance");
  c_dump->add_option("--out-dir", dump.out_dir, "Output directory")->required();

  MetricsArgs metrics;
  auto* c_metrics = app.add_subcommand("metrics", "PSNR and texture-signature report");
  c_metrics->add_option("--reference", metrics.reference, "Ground-truth image (PPM)")->required();
  c_metrics->add_option("--image", metrics.images, "Image to score (repeatable)")->required();
  c_metrics->add_option("--psi", metrics.psi, "Probability maps for per-category rows");
  c_metrics->add_option("--categories", metrics.categories, "Names of the probability channels");
  c_metrics->add_option("--output", metrics.output, "CSV path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*c_synth) return cmd_synth(synth, out);
    if (*c_train) {
      if (*o_train_iters) train.iters = train_iters;
      return cmd_train(train, out, err);
    }
    if (*c_infer) {
      if (!infer.background_only && infer.psi.empty()) {
        err << "error: infer needs --psi or --background-only\n" << c_infer->help();
        return kExitUsage;
      }
      return cmd_infer(infer, out);
    }
    if (*c_grad) return cmd_gradcheck(gc_scope, gc_seed, out);
    if (*c_ablate) {
      return cmd_ablate(ab_config, ab_modes, ab_out, *o_ab_iters ? std::optional(ab_iters) : std::nullopt, out, err);
    }
    if (*c_dump) return cmd_dump_maps(dump, out);
    if (*c_metrics) return cmd_metrics(metrics, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace sftgan
