#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "salsanet/dataset.hpp"
#include "salsanet/metrics.hpp"
#include "salsanet/network.hpp"

namespace salsanet {

using Alpha = std::array<double, kNumClasses>;

struct ClassStats {
  std::array<std::uint64_t, kNumClasses> frequency{};  // clamped to >= 1
  Alpha alpha{};                                       // 1 / sqrt(frequency)
};

ClassStats stats_from_counts(const std::array<std::uint64_t, kNumClasses>& counts);
// Throws kEmptyInput for an empty sequence.
ClassStats class_frequencies(std::span<const LabelGrid> labels);

struct LossResult {
  double loss = 0.0;
  nn::Tensor grad_logits;
};

// Mean over all pixels of -alpha[c] * log softmax(logits)[c] at the true class c.
LossResult weighted_ce_loss(const nn::Tensor& logits, std::span<const LabelGrid* const> labels, const Alpha& alpha);
LossResult weighted_ce_loss(const nn::Tensor& logits, std::span<const LabelGrid> labels, const Alpha& alpha);

struct TrainConfig {
  double lr0 = 0.01;
  double lr_decay = 0.1;
  std::uint64_t decay_every = 20000;
  float dropout = 0.5f;
  std::size_t batch_size = 32;
  std::size_t epochs = 500;
  std::uint64_t max_iterations = 0;  // 0: no cap beyond epochs
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool augment = true;
  double flip_probability = 0.5;
  double noise_probability = 0.5;
  double noise_sigma = 0.01;  // meters
  double max_rotation_deg = 5.0;
  bool class_weights = true;
  float bn_momentum = nn::kBatchNormMomentum;
  std::uint64_t seed = 0;
  std::uint64_t checkpoint_every = 0;  // 0: final checkpoint only
  std::string data_dir;
  std::string out_dir;
  InputSpec input{};

  void validate() const;
};

// key = value lines; '#' starts a comment. Unknown keys and bad values throw kConfig naming the key.
TrainConfig parse_train_config(std::string_view text);
TrainConfig load_train_config(const std::filesystem::path& path);
// Applies one key/value pair with the same rules as the file parser.
void set_config_value(TrainConfig& config, std::string_view key, std::string_view value);

double lr_at(std::uint64_t iteration, const TrainConfig& config);

struct AdamState {
  std::vector<nn::Tensor> first_moment;
  std::vector<nn::Tensor> second_moment;
  std::uint64_t step = 0;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update of every parameter from its grad. Moments are created on first use.
void adam_step(std::span<nn::Parameter* const> params, AdamState& state, double lr, const AdamHyper& hyper = {});

struct AugmentDraws {
  bool flip = false;
  bool noise = false;
  double angle_rad = 0.0;
};

AugmentDraws draw_augmentation(nn::Rng& rng, const TrainConfig& config);
// Flip, then per-coordinate Gaussian noise, then rotation about z. Labels are carried unchanged.
PointCloud apply_augmentation(const PointCloud& cloud, const AugmentDraws& draws, double noise_sigma, nn::Rng& rng);
PointCloud augment(const PointCloud& cloud, nn::Rng& rng, const TrainConfig& config = {});

// Per-cell argmax over the class channels; ties go to the lower class id.
std::vector<LabelGrid> predict_labels(const nn::Tensor& logits);

struct TrainLogRow {
  std::uint64_t iteration = 0;
  double lr = 0.0;
  double loss = 0.0;
};

std::string format_log_row(const TrainLogRow& row);

struct TrainHooks {
  std::function<void(const TrainLogRow&)> on_iteration;
  std::function<void(nn::SalsaNet&, std::uint64_t iterations_done)> on_checkpoint;
  std::function<void(const nn::Tensor& batch, std::uint64_t iteration)> on_non_finite;
};

struct TrainResult {
  nn::SalsaNet net;
  ClassStats stats;
  std::vector<TrainLogRow> log;
  std::uint64_t iterations = 0;
};

nn::ArchSpec arch_for(const TrainConfig& config);

// Shuffled mini-batch training: augment -> project -> forward -> weighted loss -> backward -> Adam.
// Throws kEmptyInput on an empty dataset and kNonFinite when the loss stops being finite.
TrainResult train(std::span<const Sample> data, const TrainConfig& config, const TrainHooks& hooks = {});

// Loads data_dir, trains, and writes checkpoint.snck, train_log.csv and periodic checkpoints to out_dir.
TrainResult run_training(const TrainConfig& config);

ConfusionMatrix evaluate(const nn::SalsaNet& net, std::span<const Sample> data, std::size_t batch_size = 8);

}  // namespace salsanet
