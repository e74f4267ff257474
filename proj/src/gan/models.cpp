#include "sdfgen/gan/models.hpp"

namespace sdfgen::gan {

namespace {

nn::ConvGeometry halving(std::size_t kernel) {
  auto g = nn::doubling_geometry(kernel);
  g.output_padding = 0;
  return g;
}

}  // namespace

std::size_t LfgConfig::channels(std::size_t i) const {
  if (i >= n_upconv_layers) return 1;
  return std::max<std::size_t>(1, base_channels >> i);
}

void LfgConfig::validate() const {
  if (latent_dim < 1) throw Error("LfgConfig: latent_dim must be at least 1");
  if (base_resolution < 1 || base_channels < 1) throw Error("LfgConfig: base sizes must be positive");
  if (n_upconv_layers < 1) throw Error("LfgConfig: need at least one up-convolution");
  if (kernel % 2 == 0) throw Error("LfgConfig: kernel must be odd");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw Error("LfgConfig: leaky slope must be in (0, 1)");
}

LfgConfig LfgConfig::full() { return LfgConfig{200, 4, 512, 4, 5, 0.2}; }
LfgConfig LfgConfig::desk() { return LfgConfig{}; }

void HfgConfig::validate() const {
  if (levels < 1) throw Error("HfgConfig: need at least one encoder level");
  if (resolution % (std::size_t{1} << levels) != 0) {
    throw Error("HfgConfig: resolution must be divisible by 2^levels");
  }
  if (patch_layers < 1 || resolution % (std::size_t{1} << patch_layers) != 0) {
    throw Error("HfgConfig: resolution must be divisible by 2^patch_layers");
  }
  if (base_channels < 1 || disc_channels < 1) throw Error("HfgConfig: channel counts must be positive");
  if (kernel % 2 == 0) throw Error("HfgConfig: kernel must be odd");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw Error("HfgConfig: leaky slope must be in (0, 1)");
}

nlohmann::json to_json(const LfgConfig& c) {
  return {{"latent_dim", c.latent_dim},       {"base_resolution", c.base_resolution},
          {"base_channels", c.base_channels}, {"n_upconv_layers", c.n_upconv_layers},
          {"kernel", c.kernel},               {"leaky_slope", c.leaky_slope},
          {"output_resolution", c.output_resolution()}};
}

nlohmann::json to_json(const HfgConfig& c) {
  return {{"resolution", c.resolution},       {"levels", c.levels},
          {"base_channels", c.base_channels}, {"kernel", c.kernel},
          {"leaky_slope", c.leaky_slope},     {"skips", c.skips},
          {"patch_layers", c.patch_layers},   {"disc_channels", c.disc_channels}};
}

LfgConfig lfg_config_from_json(const nlohmann::json& j) {
  LfgConfig c;
  c.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.base_resolution = j.at("base_resolution").get<std::size_t>();
  c.base_channels = j.at("base_channels").get<std::size_t>();
  c.n_upconv_layers = j.at("n_upconv_layers").get<std::size_t>();
  c.kernel = j.at("kernel").get<std::size_t>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.validate();
  if (j.contains("output_resolution") && j["output_resolution"].get<std::size_t>() != c.output_resolution()) {
    throw Error("LfgConfig: output_resolution inconsistent with base_resolution * 2^layers");
  }
  return c;
}

HfgConfig hfg_config_from_json(const nlohmann::json& j) {
  HfgConfig c;
  c.resolution = j.at("resolution").get<std::size_t>();
  c.levels = j.at("levels").get<std::size_t>();
  c.base_channels = j.at("base_channels").get<std::size_t>();
  c.kernel = j.at("kernel").get<std::size_t>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.skips = j.at("skips").get<bool>();
  c.patch_layers = j.at("patch_layers").get<std::size_t>();
  c.disc_channels = j.at("disc_channels").get<std::size_t>();
  c.validate();
  return c;
}

LowFrequencyGenerator::LowFrequencyGenerator(const LfgConfig& config, nn::Rng& rng)
    : config_((config.validate(), config)),
      project_("lfg.project", config.latent_dim,
               config.channels(0) * config.base_resolution * config.base_resolution * config.base_resolution,
               rng),
      project_norm_("lfg.project_norm", config.channels(0)) {
  const auto geo = nn::doubling_geometry(config.kernel);
  for (std::size_t i = 0; i < config.n_upconv_layers; ++i) {
    const std::string name = "lfg.up" + std::to_string(i);
    upconvs_.emplace_back(name, config.channels(i), config.channels(i + 1), geo, rng);
    if (i + 1 < config.n_upconv_layers) norms_.emplace_back(name + ".norm", config.channels(i + 1));
  }
}

Var LowFrequencyGenerator::forward(Tape& tape, Var z, const ForwardOptions& options) {
  const auto& zv = tape.value(z);
  if (zv.rank() != 2 || zv.dim(1) != config_.latent_dim) {
    throw Error("LFG: latent must be [N, " + std::to_string(config_.latent_dim) + "], got " +
                nn::shape_string(zv.shape()));
  }
  const std::size_t n = zv.dim(0);
  const std::size_t b = config_.base_resolution;
  Var x = project_(tape, z);
  x = nn::reshape(tape, x, {n, config_.channels(0), b, b, b});
  x = nn::relu(tape, project_norm_(tape, x, options.batchnorm()));
  for (std::size_t i = 0; i < upconvs_.size(); ++i) {
    x = upconvs_[i](tape, x);
    if (i + 1 < upconvs_.size()) {
      x = nn::relu(tape, norms_[i](tape, x, options.batchnorm()));
    } else {
      x = nn::tanh(tape, x);
    }
  }
  return x;
}

nn::ModuleState LowFrequencyGenerator::state() {
  nn::ModuleState s;
  project_.collect(s);
  project_norm_.collect(s);
  for (std::size_t i = 0; i < upconvs_.size(); ++i) {
    upconvs_[i].collect(s);
    if (i < norms_.size()) norms_[i].collect(s);
  }
  return s;
}

LfgDiscriminator::LfgDiscriminator(const LfgConfig& config, nn::Rng& rng)
    : config_((config.validate(), config)),
      head_("lfg_d.head",
            config.channels(0) * config.base_resolution * config.base_resolution * config.base_resolution, 1,
            rng) {
  const auto geo = halving(config.kernel);
  const std::size_t layers = config.n_upconv_layers;
  for (std::size_t j = 0; j < layers; ++j) {
    const std::size_t in = j == 0 ? 1 : config.channels(layers - j);
    const std::size_t out = config.channels(layers - 1 - j);
    const std::string name = "lfg_d.conv" + std::to_string(j);
    convs_.emplace_back(name, in, out, geo, rng);
    if (j > 0) norms_.emplace_back(name + ".norm", out);
  }
}

Var LfgDiscriminator::forward(Tape& tape, Var field, const ForwardOptions& options) {
  const auto& fv = tape.value(field);
  const std::size_t r = config_.output_resolution();
  if (fv.rank() != 5 || fv.dim(1) != 1 || fv.dim(2) != r || fv.dim(3) != r || fv.dim(4) != r) {
    throw Error("LFG discriminator: expected [N, 1, " + std::to_string(r) + "^3], got " +
                nn::shape_string(fv.shape()));
  }
  const std::size_t n = fv.dim(0);
  Var x = field;
  for (std::size_t j = 0; j < convs_.size(); ++j) {
    x = convs_[j](tape, x);
    if (j > 0) x = norms_[j - 1](tape, x, options.batchnorm());
    x = nn::leaky_relu(tape, x, config_.leaky_slope);
  }
  x = nn::reshape(tape, x, {n, tape.value(x).numel() / n});
  return nn::sigmoid(tape, head_(tape, x));
}

nn::ModuleState LfgDiscriminator::state() {
  nn::ModuleState s;
  for (std::size_t j = 0; j < convs_.size(); ++j) {
    convs_[j].collect(s);
    if (j > 0) norms_[j - 1].collect(s);
  }
  head_.collect(s);
  return s;
}

HighFrequencyGenerator::HighFrequencyGenerator(const HfgConfig& config, nn::Rng& rng)
    : config_((config.validate(), config)) {
  const auto down = halving(config.kernel);
  const auto up = nn::doubling_geometry(config.kernel);
  const std::size_t levels = config.levels;
  for (std::size_t i = 0; i < levels; ++i) {
    const std::size_t in = i == 0 ? 1 : config.encoder_channels(i);
    const std::string name = "hfg.enc" + std::to_string(i + 1);
    encoder_.emplace_back(name, in, config.encoder_channels(i + 1), down, rng);
    if (i > 0) encoder_norms_.emplace_back(name + ".norm", config.encoder_channels(i + 1));
  }
  for (std::size_t j = 0; j < levels; ++j) {
    const std::size_t in = j + 1 == levels ? config.encoder_channels(levels) : 2 * config.encoder_channels(j + 1);
    const std::size_t out = j == 0 ? 1 : config.encoder_channels(j);
    const std::string name = "hfg.dec" + std::to_string(j);
    decoder_.emplace_back(name, in, out, up, rng);
    if (j > 0) decoder_norms_.emplace_back(name + ".norm", out);
  }
}

Var HighFrequencyGenerator::forward(Tape& tape, Var low, const ForwardOptions& options) {
  const auto& lv = tape.value(low);
  const std::size_t r = config_.resolution;
  if (lv.rank() != 5 || lv.dim(1) != 1 || lv.dim(2) != r || lv.dim(3) != r || lv.dim(4) != r) {
    throw Error("HFG: expected [N, 1, " + std::to_string(r) + "^3], got " + nn::shape_string(lv.shape()));
  }
  const std::size_t levels = config_.levels;
  std::vector<Var> encoded;  // encoded[i] is the level-(i+1) output, pre-activation
  Var x = low;
  for (std::size_t i = 0; i < levels; ++i) {
    if (i > 0) x = nn::leaky_relu(tape, encoded.back(), config_.leaky_slope);
    x = encoder_[i](tape, x);
    if (i > 0) x = encoder_norms_[i - 1](tape, x, options.batchnorm());
    encoded.push_back(x);
  }

  Var d = encoded.back();
  for (std::size_t j = levels; j-- > 0;) {
    Var u = decoder_[j](tape, nn::relu(tape, d));
    if (j == 0) return u;
    u = decoder_norms_[j - 1](tape, u, options.batchnorm());
    Var skip = encoded[j - 1];
    if (!config_.skips) skip = tape.constant(Tensor(tape.value(skip).shape()));
    d = nn::concat_channels(tape, u, skip);
  }
  return d;  // unreachable: levels >= 1
}

nn::ModuleState HighFrequencyGenerator::state() {
  nn::ModuleState s;
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    encoder_[i].collect(s);
    if (i > 0) encoder_norms_[i - 1].collect(s);
  }
  for (std::size_t j = 0; j < decoder_.size(); ++j) {
    decoder_[j].collect(s);
    if (j > 0) decoder_norms_[j - 1].collect(s);
  }
  return s;
}

std::vector<nn::Parameter*> HighFrequencyGenerator::decoder_parameters() {
  std::vector<nn::Parameter*> out;
  for (auto& up : decoder_) {
    out.push_back(&up.weight);
    out.push_back(&up.bias);
  }
  return out;
}

PatchDiscriminator::PatchDiscriminator(const HfgConfig& config, nn::Rng& rng)
    : config_((config.validate(), config)),
      head_("hfg_d.head", config.disc_channels << (config.patch_layers - 1), 1, nn::ConvGeometry{1, 1, 0, 0},
            rng) {
  const auto down = halving(config.kernel);
  for (std::size_t i = 0; i < config.patch_layers; ++i) {
    const std::size_t in = i == 0 ? 2 : config.disc_channels << (i - 1);
    const std::string name = "hfg_d.conv" + std::to_string(i);
    convs_.emplace_back(name, in, config.disc_channels << i, down, rng);
    if (i > 0) norms_.emplace_back(name + ".norm", config.disc_channels << i);
  }
}

Var PatchDiscriminator::forward(Tape& tape, Var low, Var high, const ForwardOptions& options) {
  Var x = nn::concat_channels(tape, low, high);
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    x = convs_[i](tape, x);
    if (i > 0) x = norms_[i - 1](tape, x, options.batchnorm());
    x = nn::leaky_relu(tape, x, config_.leaky_slope);
  }
  return nn::sigmoid(tape, head_(tape, x));
}

nn::ModuleState PatchDiscriminator::state() {
  nn::ModuleState s;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    convs_[i].collect(s);
    if (i > 0) norms_[i - 1].collect(s);
  }
  head_.collect(s);
  return s;
}

std::size_t PatchDiscriminator::receptive_field() const {
  std::size_t rf = 1;
  std::size_t jump = 1;
  for (const auto& c : convs_) {
    rf += (c.geometry.kernel - 1) * jump;
    jump *= c.geometry.stride;
  }
  return rf;
}

std::vector<nn::Shape> lfg_shape_ladder(const LfgConfig& config) {
  config.validate();
  std::vector<nn::Shape> ladder;
  std::size_t r = config.base_resolution;
  ladder.push_back({config.channels(0), r, r, r});
  const auto geo = nn::doubling_geometry(config.kernel);
  for (std::size_t i = 0; i < config.n_upconv_layers; ++i) {
    r = nn::upconv_output_size(r, geo);
    ladder.push_back({config.channels(i + 1), r, r, r});
  }
  return ladder;
}

}  // namespace sdfgen::gan
