#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "sdfgen/gan/models.hpp"
#include "sdfgen/nn/adam.hpp"
#include "sdfgen/nn/checkpoint.hpp"
#include "sdfgen/sdf_grid.hpp"

namespace sdfgen::gan {

inline constexpr double kProbabilityClamp = 1e-7;
inline constexpr double kDefaultTau = 0.2;

struct LossValues {
  double loss_d = 0.0;
  double loss_g = 0.0;
};

/// Scalar evaluation of the adversarial losses on discriminator outputs.
/// loss_d = mean(-log d_real) + mean(-log(1 - d_fake)), loss_g = mean(-log d_fake).
LossValues lfg_gan_loss(std::span<const double> d_real, std::span<const double> d_fake);

/// As lfg_gan_loss with patch maps averaged, plus l1_weight * mean|x_hf - g_out|
/// on the generator side.
LossValues hfg_loss(std::span<const double> d_real, std::span<const double> d_fake,
                    std::span<const double> x_hf, std::span<const double> g_out, double l1_weight);

// Differentiable versions recorded on a tape.
Var discriminator_loss(Tape& tape, Var d_real, Var d_fake);
Var generator_adversarial_loss(Tape& tape, Var d_fake);
Var l1_loss(Tape& tape, Var target, Var prediction);

struct TrainSchedule {
  double lr_discriminator = 2e-4;
  double lr_generator = 5e-4;
  double skip_accuracy_threshold = 0.8;
  std::size_t batch_size = 8;
  std::size_t total_steps = 500;
  std::uint64_t seed = 0;
  double l1_weight = 100.0;

  void validate() const;
};

nlohmann::json to_json(const TrainSchedule& s);

struct StepMetrics {
  std::size_t step = 0;
  double loss_d = 0.0;
  double loss_g = 0.0;
  double d_accuracy = 0.0;
  bool d_skipped = false;
  double prev_d_accuracy = 0.0;
  std::optional<double> l1;  // HFG only, unweighted mean |x_hf - g_out|
  std::uint64_t d_checksum_before = 0;
  std::uint64_t d_checksum_after = 0;

  nlohmann::json log_record() const;
};

/// Fraction of real scores > 0.5 plus fake scores < 0.5, over both halves.
/// Inputs are per-sample probabilities.
double discriminator_accuracy(std::span<const double> d_real, std::span<const double> d_fake);

/// Stacks [1, R, R, R] samples (or SdfGrid values) into one [M, 1, R, R, R] tensor.
Tensor stack_samples(std::span<const Tensor> samples);
Tensor grid_to_tensor(const SdfGrid& grid);
SdfGrid tensor_to_grid(const Tensor& t, std::size_t sample = 0);

/// Seeded sampler: epochs of shuffled indices, consumed batch_size at a time.
class BatchOrder {
 public:
  BatchOrder(std::size_t dataset_size, std::uint64_t seed);
  std::vector<std::size_t> next(std::size_t batch_size);

 private:
  std::size_t size_;
  nn::Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

Tensor gather(const Tensor& data, std::span<const std::size_t> indices);

class LfgTrainer {
 public:
  /// `data` holds truncated targets [M, 1, R, R, R].
  LfgTrainer(const LfgConfig& config, const TrainSchedule& schedule, Tensor data);

  /// One step; the discriminator is skipped when prev_d_accuracy exceeds the threshold.
  StepMetrics step(double prev_d_accuracy);
  /// Uses the accuracy reported by the previous step (0 before the first).
  StepMetrics step();

  LowFrequencyGenerator& generator() { return generator_; }
  LfgDiscriminator& discriminator() { return discriminator_; }
  Tensor sample_latent(std::size_t n);

 private:
  LfgConfig config_;
  TrainSchedule schedule_;
  Tensor data_;
  nn::Rng init_rng_;
  LowFrequencyGenerator generator_;
  LfgDiscriminator discriminator_;
  nn::Rng latent_rng_;
  BatchOrder order_;
  nn::AdamState adam_g_;
  nn::AdamState adam_d_;
  std::size_t steps_ = 0;
  double prev_accuracy_ = 0.0;
};

class HfgTrainer {
 public:
  /// `low` and `high` are paired [M, 1, R, R, R] tensors.
  HfgTrainer(const HfgConfig& config, const TrainSchedule& schedule, Tensor low, Tensor high);

  StepMetrics step(double prev_d_accuracy);
  StepMetrics step();

  /// Mean |high - H(low)| over the whole training set, eval-mode batch norm.
  double training_l1();

  HighFrequencyGenerator& generator() { return generator_; }
  PatchDiscriminator& discriminator() { return discriminator_; }

 private:
  HfgConfig config_;
  TrainSchedule schedule_;
  Tensor low_;
  Tensor high_;
  nn::Rng init_rng_;
  HighFrequencyGenerator generator_;
  PatchDiscriminator discriminator_;
  BatchOrder order_;
  nn::AdamState adam_g_;
  nn::AdamState adam_d_;
  std::size_t steps_ = 0;
  double prev_accuracy_ = 0.0;
};

/// Checkpoint headers carry the architecture, tau and (HFG) cutoff so that
/// generation can check compatibility.
struct LfgBundle {
  LfgConfig config;
  double tau = kDefaultTau;
};

struct HfgBundle {
  HfgConfig config;
  double tau = kDefaultTau;
  int cutoff = 2;
};

void save_lfg(const std::filesystem::path& path, const LfgBundle& meta, LowFrequencyGenerator& g,
              LfgDiscriminator& d);
void save_hfg(const std::filesystem::path& path, const HfgBundle& meta, HighFrequencyGenerator& g,
              PatchDiscriminator& d);

struct LoadedLfg {
  LfgBundle meta;
  std::unique_ptr<LowFrequencyGenerator> generator;
  std::unique_ptr<LfgDiscriminator> discriminator;
};

struct LoadedHfg {
  HfgBundle meta;
  std::unique_ptr<HighFrequencyGenerator> generator;
  std::unique_ptr<PatchDiscriminator> discriminator;
};

LoadedLfg load_lfg(const std::filesystem::path& path);
LoadedHfg load_hfg(const std::filesystem::path& path);

struct TrainResult {
  std::vector<StepMetrics> metrics;
};

/// Full runs: train, write the checkpoint and a JSON-lines log.
/// `targets` are truncated fields; `log_path` may be empty.
TrainResult train_lfg(const std::vector<SdfGrid>& targets, const LfgConfig& config,
                      const TrainSchedule& schedule, double tau, const std::filesystem::path& checkpoint,
                      const std::filesystem::path& log_path);
TrainResult train_hfg(const std::vector<SdfGrid>& low, const std::vector<SdfGrid>& high,
                      const HfgConfig& config, const TrainSchedule& schedule, double tau, int cutoff,
                      const std::filesystem::path& checkpoint, const std::filesystem::path& log_path);

}  // namespace sdfgen::gan
