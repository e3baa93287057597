#include "sftgan/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "sftgan/tensor_file.hpp"

namespace sftgan {

// ---------------------------------------------------------------------------
// Config

GeneratorConfig TrainConfig::generator_config() const {
  GeneratorConfig g;
  g.mode = mode;
  g.num_classes = num_classes();
  g.width = width;
  g.blocks = blocks;
  g.cond_hidden = cond_hidden;
  g.cond_channels = cond_channels;
  g.scale = scale;
  g.seed = hash_combine(seed, 0x6e);
  return g;
}

DiscriminatorConfig TrainConfig::discriminator_config() const {
  DiscriminatorConfig d;
  d.num_classes = num_classes();
  d.hr_size = hr_patch;
  d.seed = hash_combine(seed, 0xd1);
  return d;
}

void TrainConfig::validate() const {
  auto positive = [](bool ok, const char* name) {
    if (!ok) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(scale > 0, "scale");
  positive(batch > 0, "batch");
  positive(hr_patch > 0, "hr_patch");
  positive(base_lr > 0, "base_lr");
  positive(decay_every > 0, "decay_every");
  positive(width > 0, "width");
  positive(cond_hidden > 0, "cond_hidden");
  positive(cond_channels > 0, "cond_channels");
  positive(adam_eps > 0, "adam_eps");
  positive(checkpoint_every > 0, "checkpoint_every");
  if (hr_patch % scale != 0) throw ConfigError("hr_patch must be divisible by scale");
  if (hr_patch / scale < 1 || hr_patch < 16) throw ConfigError("hr_patch must be >= 16");
  if (beta1 < 0 || beta1 >= 1) throw ConfigError("beta1 must be in [0, 1)");
  if (beta2 < 0 || beta2 >= 1) throw ConfigError("beta2 must be in [0, 1)");
  if (categories.empty()) throw ConfigError("categories must list at least one category");
  if (sigma < 0) throw ConfigError("sigma must be >= 0");
  if (feature_stages > 4) throw ConfigError("feature_stages must be <= 4");
  if (hr_patch % (std::size_t{1} << (feature_stages > 0 ? feature_stages - 1 : 0)) != 0) {
    throw ConfigError("hr_patch must be divisible by the feature network stride");
  }
  try {
    weights.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_uint(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("expected a non-negative integer");
  return out;
}

double parse_double(const std::string& v) {
  std::size_t used = 0;
  const double out = std::stod(v, &used);
  if (used != v.size() || !std::isfinite(out)) throw std::invalid_argument("expected a number");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("expected true or false");
}

std::vector<TextureKind> parse_categories(const std::string& v) {
  std::vector<TextureKind> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto kind = parse_texture_kind(trim(item));
    if (kind == TextureKind::background) throw std::invalid_argument("background is implicit");
    if (std::find(out.begin(), out.end(), kind) != out.end()) throw std::invalid_argument("duplicate category");
    out.push_back(kind);
  }
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string categories_string(const std::vector<TextureKind>& cats) {
  std::string out;
  for (std::size_t i = 0; i < cats.size(); ++i) out += (i ? "," : "") + to_string(cats[i]);
  return out;
}

void apply_key(TrainConfig& c, const std::string& key, const std::string& v) {
  if (key == "scale") c.scale = parse_uint(v);
  else if (key == "batch") c.batch = parse_uint(v);
  else if (key == "hr_patch") c.hr_patch = parse_uint(v);
  else if (key == "iters") c.iters = parse_uint(v);
  else if (key == "base_lr") c.base_lr = parse_double(v);
  else if (key == "decay_every") c.decay_every = parse_uint(v);
  else if (key == "beta1") c.beta1 = parse_double(v);
  else if (key == "beta2") c.beta2 = parse_double(v);
  else if (key == "adam_eps") c.adam_eps = parse_double(v);
  else if (key == "lambda_percep") c.weights.percep = parse_double(v);
  else if (key == "lambda_adv") c.weights.adv = parse_double(v);
  else if (key == "lambda_cls") c.weights.cls = parse_double(v);
  else if (key == "saturating") c.saturating = parse_bool(v);
  else if (key == "seed") c.seed = parse_uint(v);
  else if (key == "mode") c.mode = parse_mode(v);
  else if (key == "width") c.width = parse_uint(v);
  else if (key == "blocks") c.blocks = parse_uint(v);
  else if (key == "cond_hidden") c.cond_hidden = parse_uint(v);
  else if (key == "cond_channels") c.cond_channels = parse_uint(v);
  else if (key == "categories") c.categories = parse_categories(v);
  else if (key == "sigma") c.sigma = parse_double(v);
  else if (key == "feature_stages") c.feature_stages = parse_uint(v);
  else if (key == "feature_seed") c.feature_seed = parse_uint(v);
  else if (key == "checkpoint_every") c.checkpoint_every = parse_uint(v);
  else if (key == "checkpoint_path") c.checkpoint_path = v;
  else if (key == "log_path") c.log_path = v;
  else throw ConfigError("unknown key '" + key + "'");
}

}  // namespace

TrainConfig parse_config(std::istream& in, const std::string& source) {
  TrainConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = source + ":" + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError(where + "expected 'key = value'");
    try {
      apply_key(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    } catch (const std::exception& e) {
      throw ConfigError(where + "bad value for '" + key + "': " + e.what());
    }
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return parse_config(in, path.string());
}

std::string config_echo(const TrainConfig& c) {
  std::ostringstream os;
  os << "scale = " << c.scale << "\n"
     << "batch = " << c.batch << "\n"
     << "hr_patch = " << c.hr_patch << "\n"
     << "iters = " << c.iters << "\n"
     << "base_lr = " << fmt_double(c.base_lr) << "\n"
     << "decay_every = " << c.decay_every << "\n"
     << "beta1 = " << fmt_double(c.beta1) << "\n"
     << "beta2 = " << fmt_double(c.beta2) << "\n"
     << "adam_eps = " << fmt_double(c.adam_eps) << "\n"
     << "lambda_percep = " << fmt_double(c.weights.percep) << "\n"
     << "lambda_adv = " << fmt_double(c.weights.adv) << "\n"
     << "lambda_cls = " << fmt_double(c.weights.cls) << "\n"
     << "saturating = " << (c.saturating ? "true" : "false") << "\n"
     << "seed = " << c.seed << "\n"
     << "mode = " << to_string(c.mode) << "\n"
     << "width = " << c.width << "\n"
     << "blocks = " << c.blocks << "\n"
     << "cond_hidden = " << c.cond_hidden << "\n"
     << "cond_channels = " << c.cond_channels << "\n"
     << "categories = " << categories_string(c.categories) << "\n"
     << "sigma = " << fmt_double(c.sigma) << "\n"
     << "feature_stages = " << c.feature_stages << "\n"
     << "feature_seed = " << c.feature_seed << "\n"
     << "checkpoint_every = " << c.checkpoint_every << "\n"
     << "checkpoint_path = " << c.checkpoint_path << "\n"
     << "log_path = " << c.log_path << "\n";
  return os.str();
}

std::uint64_t config_hash(const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.iters = 0;
  c.checkpoint_every = 1;
  c.checkpoint_path.clear();
  c.log_path.clear();
  return hash_string(config_echo(c));
}

double lr_at(std::uint64_t iter, const TrainConfig& cfg) {
  return std::ldexp(cfg.base_lr, -static_cast<int>(std::min<std::uint64_t>(iter / cfg.decay_every, 1074)));
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::zeros_like(const ParameterSet<float>& params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.value.shape());
    s.v.emplace_back(p.value.shape());
  }
  return s;
}

void adam_step(ParameterSet<float>& params, const std::vector<Tensor<float>>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].value.shape()) {
      throw ShapeError("adam_step: gradient for " + params[i].name + " has shape " +
                       grads[i].shape().str());
    }
    if (params[i].trainable && !all_finite(grads[i].data())) {
      throw NumericError("non-finite gradient for parameter " + params[i].name);
    }
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    auto p = params[i].value.mutable_data();
    auto m = state.m[i].mutable_data();
    auto v = state.v[i].mutable_data();
    auto g = grads[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k];
      const double mk = beta1 * m[k] + (1.0 - beta1) * gk;
      const double vk = beta2 * v[k] + (1.0 - beta2) * gk * gk;
      m[k] = static_cast<float>(mk);
      v[k] = static_cast<float>(vk);
      const double update = lr * (mk / c1) / (std::sqrt(vk / c2) + eps);
      p[k] = static_cast<float>(p[k] - update);
    }
  }
}

// ---------------------------------------------------------------------------
// Training

TrainState init_state(const TrainConfig& cfg) {
  cfg.validate();
  Generator g(cfg.generator_config());
  Discriminator d(cfg.discriminator_config());
  auto ag = AdamState::zeros_like(g.params());
  auto ad_ = AdamState::zeros_like(d.params());
  return TrainState{std::move(g), std::move(d), std::move(ag), std::move(ad_), 0};
}

Batch make_batch(const TrainConfig& cfg, std::uint64_t iteration) {
  std::vector<Tensor<float>> lr, psi, hr;
  Batch batch;
  for (std::size_t b = 0; b < cfg.batch; ++b) {
    auto rng = RngStream::keyed(cfg.seed, "batch", iteration, b);
    SceneSpec spec;
    spec.height = spec.width = 2 * cfg.hr_patch;
    spec.categories = cfg.categories;
    spec.layout = LayoutKind::single;
    spec.single_class = rng.below(cfg.num_classes());
    spec.scale = cfg.scale;
    spec.sigma = cfg.sigma;
    spec.seed = rng.next_u64();
    const Scene scene = compose_scene(spec);
    auto pair = sample_training_pair(scene, cfg.hr_patch, rng, true);
    lr.push_back(std::move(pair.lr));
    psi.push_back(std::move(pair.psi));
    hr.push_back(std::move(pair.hr));
    batch.labels.push_back(pair.label);
  }
  batch.lr = stack(lr);
  batch.psi = stack(psi);
  batch.hr = stack(hr);
  return batch;
}

namespace {

double scalar(const ad::Var<float>& v) { return v.value()[0]; }

double accuracy(const Tensor<float>& log_probs, const std::vector<std::size_t>& labels) {
  const std::size_t n = labels.size(), c = log_probs.numel() / n;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = log_probs.data().data() + i * c;
    const auto best = static_cast<std::size_t>(std::max_element(row, row + c) - row);
    hits += best == labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

IterationLog train_iteration(TrainState& state, const TrainConfig& cfg, const FeatureNet& phi,
                             const std::function<void(StepPhase, const TrainState&)>& probe) {
  const Batch batch = make_batch(cfg, state.iteration);
  IterationLog log;
  log.iteration = state.iteration;
  log.lr = lr_at(state.iteration, cfg);

  // Generator forward, kept for the G step.
  ad::Graph<float> g_graph;
  Binding<float> g_bind(g_graph, state.generator.params(), true);
  const auto x = g_graph.constant(batch.lr);
  const auto psi = g_graph.constant(batch.psi);
  const auto y = g_graph.constant(batch.hr);
  const auto fake = state.generator.forward(g_bind, x, psi);

  // D step on real and detached fake.
  {
    ad::Graph<float> d_graph;
    Binding<float> d_bind(d_graph, state.discriminator.params(), true);
    const auto real_out = state.discriminator.forward(d_bind, d_graph.constant(batch.hr));
    const auto fake_out = state.discriminator.forward(d_bind, d_graph.constant(fake.value()));
    const auto l_d = discriminator_loss(real_out.prob, fake_out.prob);
    const auto l_cls_d = ad::add(aux_class_loss(real_out.class_log_probs, std::span(batch.labels)),
                                 aux_class_loss(fake_out.class_log_probs, std::span(batch.labels)));
    const auto total = ad::add(l_d, l_cls_d);
    d_graph.backward(total);
    adam_step(state.discriminator.params(), d_bind.gradients(), state.adam_d, log.lr, cfg.beta1,
              cfg.beta2, cfg.adam_eps);
    log.l_d = scalar(l_d);
    log.l_cls_d = scalar(l_cls_d);
    log.d_acc_real = accuracy(real_out.class_log_probs.value(), batch.labels);
  }
  if (probe) probe(StepPhase::discriminator_updated, state);

  // G step through the updated, frozen discriminator.
  Binding<float> d_frozen(g_graph, state.discriminator.params(), false);
  Binding<float> phi_bind(g_graph, phi.params(), false);
  const auto d_fake = state.discriminator.forward(d_frozen, fake);
  const auto loss = generator_total_loss(phi_bind, phi, fake, y, d_fake, std::span(batch.labels),
                                         cfg.weights, cfg.saturating);
  g_graph.backward(loss.total);
  adam_step(state.generator.params(), g_bind.gradients(), state.adam_g, log.lr, cfg.beta1,
            cfg.beta2, cfg.adam_eps);
  log.l_percep = scalar(loss.percep);
  log.l_adv_g = scalar(loss.adv);
  log.l_cls = scalar(loss.cls);
  log.l_g_total = scalar(loss.total);
  if (probe) probe(StepPhase::generator_updated, state);
  state.iteration += 1;
  return log;
}

void write_log_header(std::ostream& out, const TrainConfig& cfg) {
  std::istringstream echo(config_echo(cfg));
  std::string line;
  while (std::getline(echo, line)) out << "# " << line << "\n";
  out << "iteration,l_percep,l_adv_g,l_d,l_cls,lr,l_cls_d,l_g_total,d_acc_real\n";
}

void write_log_row(std::ostream& out, const IterationLog& r) {
  out << r.iteration << ',' << fmt_double(r.l_percep) << ',' << fmt_double(r.l_adv_g) << ','
      << fmt_double(r.l_d) << ',' << fmt_double(r.l_cls) << ',' << fmt_double(r.lr) << ','
      << fmt_double(r.l_cls_d) << ',' << fmt_double(r.l_g_total) << ',' << fmt_double(r.d_acc_real)
      << "\n";
}

void train_gan(TrainState& state, const TrainConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  const std::uint64_t until = opts.until.value_or(cfg.iters);
  const std::uint64_t hash = config_hash(cfg);
  const FeatureNet phi(cfg.feature_seed, cfg.feature_stages);

  std::ofstream log;
  if (opts.write_files) {
    const bool fresh = state.iteration == 0;
    log.open(cfg.log_path, fresh ? std::ios::trunc : std::ios::app);
    if (!log) throw std::runtime_error("cannot open log " + cfg.log_path);
    if (fresh) write_log_header(log, cfg);
  }
  while (state.iteration < until) {
    IterationLog row;
    try {
      row = train_iteration(state, cfg, phi);
    } catch (const NumericError& e) {
      throw TrainingAborted("training aborted at iteration " + std::to_string(state.iteration) +
                            ": " + e.what());
    }
    if (opts.write_files) {
      write_log_row(log, row);
      if (state.iteration % cfg.checkpoint_every == 0) {
        log.flush();
        checkpoint_save(cfg.checkpoint_path, state, hash);
      }
    }
    if (opts.on_iteration) opts.on_iteration(row);
  }
  if (opts.write_files) checkpoint_save(cfg.checkpoint_path, state, hash);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void put_entry(std::ostream& out, const std::string& name, const Tensor<float>& t) {
  io::write_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_tensor(out, t);
}

std::vector<std::pair<std::string, Tensor<float>>> checkpoint_entries(const TrainState& s) {
  std::vector<std::pair<std::string, Tensor<float>>> e;
  const auto& gc = s.generator.config();
  const auto& dc = s.discriminator.config();
  std::vector<float> arch{static_cast<float>(gc.mode),  static_cast<float>(gc.num_classes),
                          static_cast<float>(gc.width), static_cast<float>(gc.blocks),
                          static_cast<float>(gc.cond_hidden), static_cast<float>(gc.cond_channels),
                          static_cast<float>(gc.scale), static_cast<float>(dc.hr_size)};
  e.emplace_back("meta.arch", Tensor<float>(Shape{arch.size()}, arch));
  auto add_set = [&e](const std::string& prefix, const ParameterSet<float>& params,
                      const AdamState& adam) {
    for (std::size_t i = 0; i < params.size(); ++i) e.emplace_back(prefix + params[i].name, params[i].value);
    for (std::size_t i = 0; i < params.size(); ++i) e.emplace_back("adam." + prefix + "m." + params[i].name, adam.m[i]);
    for (std::size_t i = 0; i < params.size(); ++i) e.emplace_back("adam." + prefix + "v." + params[i].name, adam.v[i]);
  };
  add_set("g.", s.generator.params(), s.adam_g);
  add_set("d.", s.discriminator.params(), s.adam_d);
  return e;
}

}  // namespace

void checkpoint_save(const std::filesystem::path& path, const TrainState& state,
                     std::uint64_t cfg_hash) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    const auto entries = checkpoint_entries(state);
    io::write_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, t] : entries) put_entry(out, name, t);
    io::write_u64(out, state.iteration);
    io::write_u64(out, cfg_hash);
    out.write(kCheckpointMagic, 4);
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::map<std::string, Tensor<float>> entries;
  const std::uint32_t count = io::read_u32(in, "checkpoint entry count");
  if (count > 1'000'000) throw FormatError("checkpoint: implausible entry count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = io::read_u32(in, "checkpoint name length");
    if (len > 4096) throw FormatError("checkpoint: implausible name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw FormatError("checkpoint: truncated name");
    entries.insert_or_assign(name, read_tensor(in));
  }
  const std::uint64_t iteration = io::read_u64(in, "checkpoint iteration");
  const std::uint64_t hash = io::read_u64(in, "checkpoint config hash");
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kCheckpointMagic)) {
    throw FormatError("checkpoint: bad or missing trailer magic");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint: trailing bytes");

  const auto arch_it = entries.find("meta.arch");
  if (arch_it == entries.end() || arch_it->second.numel() != 8) {
    throw FormatError("checkpoint: missing architecture record");
  }
  const auto a = arch_it->second.data();
  GeneratorConfig gc;
  const auto mode_index = static_cast<int>(a[0]);
  if (mode_index < 0 || mode_index > static_cast<int>(ConditioningMode::none)) {
    throw FormatError("checkpoint: unknown conditioning mode");
  }
  gc.mode = static_cast<ConditioningMode>(mode_index);
  gc.num_classes = static_cast<std::size_t>(a[1]);
  gc.width = static_cast<std::size_t>(a[2]);
  gc.blocks = static_cast<std::size_t>(a[3]);
  gc.cond_hidden = static_cast<std::size_t>(a[4]);
  gc.cond_channels = static_cast<std::size_t>(a[5]);
  gc.scale = static_cast<std::size_t>(a[6]);
  DiscriminatorConfig dc;
  dc.num_classes = gc.num_classes;
  dc.hr_size = static_cast<std::size_t>(a[7]);

  TrainState state{Generator(gc), Discriminator(dc), {}, {}, iteration};
  auto fill = [&entries](const std::string& prefix, ParameterSet<float>& params, AdamState& adam) {
    adam = AdamState::zeros_like(params);
    auto take = [&entries](const std::string& name, const Shape& shape) {
      const auto it = entries.find(name);
      if (it == entries.end()) throw FormatError("checkpoint: missing entry " + name);
      if (it->second.shape() != shape) {
        throw FormatError("checkpoint: entry " + name + " has shape " + it->second.shape().str() +
                          ", expected " + shape.str());
      }
      return it->second;
    };
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& shape = params[i].value.shape();
      params[i].value = take(prefix + params[i].name, shape);
      adam.m[i] = take("adam." + prefix + "m." + params[i].name, shape);
      adam.v[i] = take("adam." + prefix + "v." + params[i].name, shape);
    }
  };
  fill("g.", state.generator.params(), state.adam_g);
  fill("d.", state.discriminator.params(), state.adam_d);
  state.adam_g.t = iteration;
  state.adam_d.t = iteration;
  return {std::move(state), hash};
}

}  // namespace sftgan
