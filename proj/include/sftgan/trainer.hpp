#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sftgan/datagen.hpp"
#include "sftgan/losses.hpp"
#include "sftgan/models.hpp"

namespace sftgan {

/// Malformed or inconsistent configuration (maps to the usage exit code).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TrainConfig {
  std::size_t scale = 4;
  std::size_t batch = 8;
  std::size_t hr_patch = 32;
  std::uint64_t iters = 2000;
  double base_lr = 1e-4;
  std::uint64_t decay_every = 1000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  LossWeights weights;
  bool saturating = false;
  std::uint64_t seed = 0;
  ConditioningMode mode = ConditioningMode::sft;
  std::size_t width = 32;
  std::size_t blocks = 8;
  std::size_t cond_hidden = 64;
  std::size_t cond_channels = 32;
  std::vector<TextureKind> categories{TextureKind::sky, TextureKind::grass};
  double sigma = 2.0;
  std::size_t feature_stages = 4;
  std::uint64_t feature_seed = 7;
  std::uint64_t checkpoint_every = 500;
  std::string checkpoint_path = "checkpoint.sftc";
  std::string log_path = "train_log.csv";

  std::size_t num_classes() const { return categories.size() + 1; }
  GeneratorConfig generator_config() const;
  DiscriminatorConfig discriminator_config() const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Parses flat "key = value" lines; '#' starts a comment. Unknown keys,
/// malformed lines and bad values throw ConfigError naming the line number.
TrainConfig parse_config(std::istream& in, const std::string& source = "config");
TrainConfig load_config(const std::filesystem::path& path);

/// Every field as "key = value" lines, parseable by parse_config.
std::string config_echo(const TrainConfig& cfg);

/// Hash of the fields that determine the training trajectory (iteration
/// budget, checkpoint cadence and paths excluded).
std::uint64_t config_hash(const TrainConfig& cfg);

/// base_lr / 2^floor(iter / decay_every)
double lr_at(std::uint64_t iter, const TrainConfig& cfg);

struct AdamState {
  std::vector<Tensor<float>> m;
  std::vector<Tensor<float>> v;
  std::uint64_t t = 0;

  static AdamState zeros_like(const ParameterSet<float>& params);
};

/// Bias-corrected Adam on every trainable parameter. All gradients are checked
/// first; a non-finite one throws NumericError naming the parameter and leaves
/// params and state untouched.
void adam_step(ParameterSet<float>& params, const std::vector<Tensor<float>>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps);

struct TrainState {
  Generator generator;
  Discriminator discriminator;
  AdamState adam_g;
  AdamState adam_d;
  std::uint64_t iteration = 0;
};

TrainState init_state(const TrainConfig& cfg);

struct Batch {
  Tensor<float> lr;   // N x 3 x p/s x p/s
  Tensor<float> psi;  // N x classes x p/s x p/s
  Tensor<float> hr;   // N x 3 x p x p
  std::vector<std::size_t> labels;
};

/// Batch for one iteration: each sample is a single-category scene whose class
/// is uniform over the categories and background. Depends only on
/// (seed, iteration).
Batch make_batch(const TrainConfig& cfg, std::uint64_t iteration);

struct IterationLog {
  std::uint64_t iteration = 0;
  double l_percep = 0, l_adv_g = 0, l_d = 0, l_cls = 0, l_cls_d = 0, l_g_total = 0;
  double lr = 0;
  double d_acc_real = 0;  // auxiliary head accuracy on the real batch
};

enum class StepPhase { discriminator_updated, generator_updated };

/// One D step then one G step; advances state.iteration. The probe, if set,
/// sees the state after each update.
IterationLog train_iteration(
    TrainState& state, const TrainConfig& cfg, const FeatureNet& phi,
    const std::function<void(StepPhase, const TrainState&)>& probe = {});

void write_log_header(std::ostream& out, const TrainConfig& cfg);
void write_log_row(std::ostream& out, const IterationLog& row);

struct TrainOptions {
  /// Stop after this many total iterations (defaults to cfg.iters).
  std::optional<std::uint64_t> until;
  std::function<void(const IterationLog&)> on_iteration;
  bool write_files = true;
};

/// Training failed on a non-finite value; the on-disk checkpoint is the last
/// good one.
class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs the loop from state.iteration, appending to the CSV log and writing
/// checkpoints every checkpoint_every iterations and at the end.
void train_gan(TrainState& state, const TrainConfig& cfg, const TrainOptions& opts = {});

// ---------------------------------------------------------------------------
// Checkpoints: u32 entry count, then per entry u32 name length + name +
// TensorFile blob; trailer u64 iteration, u64 config hash, "SFTC".

inline constexpr char kCheckpointMagic[4] = {'S', 'F', 'T', 'C'};

void checkpoint_save(const std::filesystem::path& path, const TrainState& state,
                     std::uint64_t cfg_hash);

struct LoadedCheckpoint {
  TrainState state;
  std::uint64_t config_hash = 0;
};

/// Reads the whole file before building anything, so a failed load leaves no
/// partial state. Throws FormatError on corrupt or truncated input.
LoadedCheckpoint checkpoint_load(const std::filesystem::path& path);

}  // namespace sftgan
