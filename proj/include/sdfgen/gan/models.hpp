#pragma once

#include <memory>
#include <vector>

#include "json.hpp"
#include "sdfgen/nn/layers.hpp"

namespace sdfgen::gan {

using nn::Mode;
using nn::Tape;
using nn::Tensor;
using nn::Var;

/// Low-frequency generator architecture.
///
/// Channels halve after every up-convolution starting from base_channels;
/// the final up-convolution emits a single channel.
struct LfgConfig {
  std::size_t latent_dim = 64;
  std::size_t base_resolution = 2;
  std::size_t base_channels = 64;
  std::size_t n_upconv_layers = 3;
  std::size_t kernel = 5;
  double leaky_slope = 0.2;

  std::size_t output_resolution() const { return base_resolution << n_upconv_layers; }
  /// Channel count entering up-convolution i (0-based); index n_upconv_layers is the output.
  std::size_t channels(std::size_t i) const;
  void validate() const;

  /// 200-d latent, 512 x 4^3 projection, four up-convolutions to 64^3.
  static LfgConfig full();
  /// 64-d latent, 64 x 2^3 projection, three up-convolutions to 16^3.
  static LfgConfig desk();
};

/// Conditional high-frequency generator (encoder/decoder with skips) plus the
/// patch discriminator layout.
struct HfgConfig {
  std::size_t resolution = 16;
  std::size_t levels = 3;
  std::size_t base_channels = 8;  // doubles per encoder level
  std::size_t kernel = 5;
  double leaky_slope = 0.2;
  bool skips = true;
  std::size_t patch_layers = 1;   // stride-2 convolutions before the 1x1 head
  std::size_t disc_channels = 8;

  std::size_t encoder_channels(std::size_t level) const { return base_channels << (level - 1); }
  void validate() const;
};

nlohmann::json to_json(const LfgConfig& c);
nlohmann::json to_json(const HfgConfig& c);
LfgConfig lfg_config_from_json(const nlohmann::json& j);
HfgConfig hfg_config_from_json(const nlohmann::json& j);

/// Per-call switches: batch-norm mode and whether train-mode batch
/// statistics are folded into the running averages.
struct ForwardOptions {
  Mode mode = Mode::train;
  bool update_running = true;

  nn::BatchNormOptions batchnorm() const { return {mode, update_running && mode == Mode::train}; }
};

/// z [N, latent] -> field [N, 1, R, R, R] in (-1, 1).
class LowFrequencyGenerator {
 public:
  LowFrequencyGenerator(const LfgConfig& config, nn::Rng& rng);
  Var forward(Tape& tape, Var z, const ForwardOptions& options);
  nn::ModuleState state();
  const LfgConfig& config() const { return config_; }

 private:
  LfgConfig config_;
  nn::Linear project_;
  nn::BatchNorm project_norm_;
  std::vector<nn::UpConv3d> upconvs_;
  std::vector<nn::BatchNorm> norms_;
};

/// Mirror of the generator: strided convolutions with leaky ReLU down to the
/// base resolution, then a linear sigmoid head. field -> probability [N, 1].
class LfgDiscriminator {
 public:
  LfgDiscriminator(const LfgConfig& config, nn::Rng& rng);
  Var forward(Tape& tape, Var field, const ForwardOptions& options);
  nn::ModuleState state();

 private:
  LfgConfig config_;
  std::vector<nn::Conv3d> convs_;
  std::vector<nn::BatchNorm> norms_;  // for convs_[1..]
  nn::Linear head_;
};

/// Low band [N, 1, R, R, R] -> predicted high band of the same shape.
///
/// Encoder: conv, then (conv, batch norm) per level, leaky ReLU after each.
/// Decoder: ReLU, up-convolution, batch norm, then concatenation with the
/// encoder output of matching resolution. The last up-convolution is linear.
class HighFrequencyGenerator {
 public:
  HighFrequencyGenerator(const HfgConfig& config, nn::Rng& rng);
  Var forward(Tape& tape, Var low, const ForwardOptions& options);
  nn::ModuleState state();
  /// Decoder parameters only (weights and biases of every up-convolution).
  std::vector<nn::Parameter*> decoder_parameters();
  const HfgConfig& config() const { return config_; }
  void set_skips(bool enabled) { config_.skips = enabled; }

 private:
  HfgConfig config_;
  std::vector<nn::Conv3d> encoder_;
  std::vector<nn::BatchNorm> encoder_norms_;  // levels 2..L
  std::vector<nn::UpConv3d> decoder_;         // decoder_[j] produces resolution R / 2^j
  std::vector<nn::BatchNorm> decoder_norms_;  // all but the last up-convolution
};

/// Fully convolutional discriminator on (low, high) pairs; outputs a map of
/// per-patch probabilities [N, 1, r, r, r].
class PatchDiscriminator {
 public:
  PatchDiscriminator(const HfgConfig& config, nn::Rng& rng);
  Var forward(Tape& tape, Var low, Var high, const ForwardOptions& options);
  nn::ModuleState state();
  /// Receptive-field side length of one patch, in voxels.
  std::size_t receptive_field() const;

 private:
  HfgConfig config_;
  std::vector<nn::Conv3d> convs_;
  std::vector<nn::BatchNorm> norms_;
  nn::Conv3d head_;
};

/// Shape after each stage of the generator ladder, starting with the
/// projection: [C, R, R, R] entries.
std::vector<nn::Shape> lfg_shape_ladder(const LfgConfig& config);

}  // namespace sdfgen::gan
