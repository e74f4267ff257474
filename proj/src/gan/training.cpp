#include "sdfgen/gan/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

namespace sdfgen::gan {

using nn::Shape;

namespace {

void check_probabilities(std::span<const double> p, const char* what) {
  if (p.empty()) throw Error(std::string(what) + ": empty discriminator output");
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw Error(std::string(what) + ": discriminator output " + std::to_string(v) + " outside [0, 1]");
    }
  }
}

double mean_neg_log(std::span<const double> p, bool complement) {
  double acc = 0.0;
  for (double v : p) {
    const double q = complement ? 1.0 - v : v;
    acc -= std::log(std::clamp(q, kProbabilityClamp, 1.0 - kProbabilityClamp));
  }
  return acc / static_cast<double>(p.size());
}

std::vector<double> per_sample_means(const Tensor& t) {
  const std::size_t n = t.dim(0);
  const std::size_t per = t.numel() / n;
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < per; ++j) acc += t[i * per + j];
    out[i] = acc / static_cast<double>(per);
  }
  return out;
}

std::uint64_t sub_seed(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (std::uint64_t{out[0]} << 32) | out[1];
}

void check_batch_data(const Tensor& data, const char* what) {
  if (data.rank() != 5 || data.dim(0) == 0 || data.dim(1) != 1) {
    throw Error(std::string(what) + ": expected nonempty [M, 1, R, R, R] data, got " +
                nn::shape_string(data.shape()));
  }
  if (!data.all_finite()) throw Error(std::string(what) + ": training data contains non-finite values");
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

template <class Fn>
StepMetrics guarded(std::size_t step, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error("training step " + std::to_string(step) + ": " + e.what());
  }
}

}  // namespace

LossValues lfg_gan_loss(std::span<const double> d_real, std::span<const double> d_fake) {
  check_probabilities(d_real, "lfg_gan_loss");
  check_probabilities(d_fake, "lfg_gan_loss");
  return {mean_neg_log(d_real, false) + mean_neg_log(d_fake, true), mean_neg_log(d_fake, false)};
}

LossValues hfg_loss(std::span<const double> d_real, std::span<const double> d_fake,
                    std::span<const double> x_hf, std::span<const double> g_out, double l1_weight) {
  if (x_hf.size() != g_out.size() || x_hf.empty()) throw Error("hfg_loss: target and output sizes differ");
  LossValues out = lfg_gan_loss(d_real, d_fake);
  double l1 = 0.0;
  for (std::size_t i = 0; i < x_hf.size(); ++i) l1 += std::abs(x_hf[i] - g_out[i]);
  out.loss_g += l1_weight * l1 / static_cast<double>(x_hf.size());
  return out;
}

Var discriminator_loss(Tape& tape, Var d_real, Var d_fake) {
  check_probabilities(tape.value(d_real).data(), "discriminator_loss");
  check_probabilities(tape.value(d_fake).data(), "discriminator_loss");
  Var real_term = nn::mean(tape, nn::log_clamped(tape, d_real, kProbabilityClamp));
  Var fake_term =
      nn::mean(tape, nn::log_clamped(tape, nn::affine(tape, d_fake, -1.0, 1.0), kProbabilityClamp));
  return nn::affine(tape, nn::add(tape, real_term, fake_term), -1.0, 0.0);
}

Var generator_adversarial_loss(Tape& tape, Var d_fake) {
  check_probabilities(tape.value(d_fake).data(), "generator_loss");
  return nn::affine(tape, nn::mean(tape, nn::log_clamped(tape, d_fake, kProbabilityClamp)), -1.0, 0.0);
}

Var l1_loss(Tape& tape, Var target, Var prediction) {
  if (tape.value(target).shape() != tape.value(prediction).shape()) {
    throw Error("l1_loss: shape mismatch " + nn::shape_string(tape.value(target).shape()) + " vs " +
                nn::shape_string(tape.value(prediction).shape()));
  }
  return nn::mean(tape, nn::abs(tape, nn::sub(tape, target, prediction)));
}

void TrainSchedule::validate() const {
  if (!(lr_discriminator > 0.0) || !(lr_generator > 0.0)) throw Error("schedule: learning rates must be > 0");
  if (!(skip_accuracy_threshold > 0.0 && skip_accuracy_threshold < 1.0)) {
    throw Error("schedule: skip threshold must be in (0, 1)");
  }
  if (batch_size < 1) throw Error("schedule: batch size must be at least 1");
  if (!(l1_weight >= 0.0)) throw Error("schedule: l1 weight must be >= 0");
}

nlohmann::json to_json(const TrainSchedule& s) {
  return {{"lr_discriminator", s.lr_discriminator},
          {"lr_generator", s.lr_generator},
          {"skip_accuracy_threshold", s.skip_accuracy_threshold},
          {"batch_size", s.batch_size},
          {"total_steps", s.total_steps},
          {"seed", s.seed},
          {"l1_weight", s.l1_weight}};
}

nlohmann::json StepMetrics::log_record() const {
  nlohmann::json j = {{"step", step},
                      {"loss_d", loss_d},
                      {"loss_g", loss_g},
                      {"d_accuracy", d_accuracy},
                      {"d_skipped", d_skipped},
                      {"prev_d_accuracy", prev_d_accuracy},
                      {"d_checksum_before", hex(d_checksum_before)},
                      {"d_checksum_after", hex(d_checksum_after)}};
  if (l1) j["l1"] = *l1;
  return j;
}

double discriminator_accuracy(std::span<const double> d_real, std::span<const double> d_fake) {
  if (d_real.empty() || d_fake.empty()) throw Error("discriminator_accuracy: empty input");
  std::size_t correct = 0;
  for (double v : d_real) correct += v > 0.5;
  for (double v : d_fake) correct += v < 0.5;
  return static_cast<double>(correct) / static_cast<double>(d_real.size() + d_fake.size());
}

Tensor stack_samples(std::span<const Tensor> samples) {
  if (samples.empty()) throw Error("stack_samples: no samples");
  const Shape& first = samples[0].shape();
  Shape shape{samples.size()};
  shape.insert(shape.end(), first.begin(), first.end());
  Tensor out(shape);
  std::size_t off = 0;
  for (const auto& s : samples) {
    if (s.shape() != first) {
      throw Error("stack_samples: shape " + nn::shape_string(s.shape()) + " differs from " +
                  nn::shape_string(first));
    }
    std::copy(s.data().begin(), s.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(off));
    off += s.numel();
  }
  return out;
}

Tensor grid_to_tensor(const SdfGrid& grid) {
  const auto [nx, ny, nz] = grid.dims;
  return Tensor({1, nz, ny, nx}, grid.values);
}

SdfGrid tensor_to_grid(const Tensor& t, std::size_t sample) {
  if (t.rank() != 5 || t.dim(1) != 1 || t.dim(2) != t.dim(3) || t.dim(3) != t.dim(4)) {
    throw Error("tensor_to_grid: expected [N, 1, R, R, R], got " + nn::shape_string(t.shape()));
  }
  if (sample >= t.dim(0)) throw Error("tensor_to_grid: sample index out of range");
  SdfGrid grid = SdfGrid::canonical(t.dim(2));
  const std::size_t per = grid.size();
  std::copy_n(t.data().begin() + static_cast<std::ptrdiff_t>(sample * per), per, grid.values.begin());
  return grid;
}

BatchOrder::BatchOrder(std::size_t dataset_size, std::uint64_t seed) : size_(dataset_size), rng_(seed) {
  if (size_ == 0) throw Error("empty dataset");
}

std::vector<std::size_t> BatchOrder::next(std::size_t batch_size) {
  std::vector<std::size_t> out;
  out.reserve(batch_size);
  while (out.size() < batch_size) {
    if (cursor_ == order_.size()) {
      order_.resize(size_);
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    out.push_back(order_[cursor_++]);
  }
  return out;
}

Tensor gather(const Tensor& data, std::span<const std::size_t> indices) {
  Shape shape = data.shape();
  const std::size_t per = data.numel() / shape[0];
  shape[0] = indices.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= data.dim(0)) throw Error("gather: index out of range");
    std::copy_n(data.data().begin() + static_cast<std::ptrdiff_t>(indices[i] * per), per,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return out;
}

LfgTrainer::LfgTrainer(const LfgConfig& config, const TrainSchedule& schedule, Tensor data)
    : config_((config.validate(), config)),
      schedule_((schedule.validate(), schedule)),
      data_(std::move(data)),
      init_rng_(sub_seed(schedule.seed, 0)),
      generator_(config, init_rng_),
      discriminator_(config, init_rng_),
      latent_rng_(sub_seed(schedule.seed, 1)),
      order_((check_batch_data(data_, "train-lfg"), data_.dim(0)), sub_seed(schedule.seed, 2)) {
  const std::size_t r = config.output_resolution();
  if (data_.dim(2) != r || data_.dim(3) != r || data_.dim(4) != r) {
    throw Error("train-lfg: data resolution " + std::to_string(data_.dim(2)) + " does not match generator output " +
                std::to_string(r));
  }
  adam_g_.config.lr = schedule.lr_generator;
  adam_d_.config.lr = schedule.lr_discriminator;
}

Tensor LfgTrainer::sample_latent(std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor z({n, config_.latent_dim});
  for (auto& v : z.data()) v = u(latent_rng_);
  return z;
}

StepMetrics LfgTrainer::step() { return step(prev_accuracy_); }

StepMetrics LfgTrainer::step(double prev_d_accuracy) {
  const std::size_t step_number = ++steps_;
  return guarded(step_number, [&] {
    StepMetrics m;
    m.step = step_number;
    m.prev_d_accuracy = prev_d_accuracy;
    m.d_skipped = prev_d_accuracy > schedule_.skip_accuracy_threshold;

    const auto indices = order_.next(schedule_.batch_size);
    const Tensor real = gather(data_, indices);
    const Tensor z = sample_latent(schedule_.batch_size);
    const auto g_state = generator_.state();
    const auto d_state = discriminator_.state();
    m.d_checksum_before = nn::checksum(d_state);

    Tensor fake;
    {
      Tape tape(nn::GradMode::disabled);
      fake = tape.value(generator_.forward(tape, tape.constant(z), {Mode::train, false}));
    }
    {
      Tape tape(m.d_skipped ? nn::GradMode::disabled : nn::GradMode::enabled);
      const ForwardOptions opts{Mode::train, !m.d_skipped};
      Var dr = discriminator_.forward(tape, tape.constant(real), opts);
      Var df = discriminator_.forward(tape, tape.constant(fake), opts);
      Var loss = discriminator_loss(tape, dr, df);
      m.loss_d = tape.value(loss)[0];
      m.d_accuracy = discriminator_accuracy(tape.value(dr).data(), tape.value(df).data());
      if (!m.d_skipped) {
        nn::zero_grads(d_state.params);
        tape.backward(loss);
        nn::adam_step(d_state.params, adam_d_);
      }
    }
    {
      Tape tape;
      Var g = generator_.forward(tape, tape.constant(z), {Mode::train, true});
      Var df = discriminator_.forward(tape, g, {Mode::train, false});
      Var loss = generator_adversarial_loss(tape, df);
      m.loss_g = tape.value(loss)[0];
      nn::zero_grads(g_state.params);
      nn::zero_grads(d_state.params);
      tape.backward(loss);
      nn::adam_step(g_state.params, adam_g_);
      nn::zero_grads(d_state.params);
    }
    m.d_checksum_after = nn::checksum(d_state);
    prev_accuracy_ = m.d_accuracy;
    return m;
  });
}

HfgTrainer::HfgTrainer(const HfgConfig& config, const TrainSchedule& schedule, Tensor low, Tensor high)
    : config_((config.validate(), config)),
      schedule_((schedule.validate(), schedule)),
      low_(std::move(low)),
      high_(std::move(high)),
      init_rng_(sub_seed(schedule.seed, 0)),
      generator_(config, init_rng_),
      discriminator_(config, init_rng_),
      order_((check_batch_data(low_, "train-hfg"), check_batch_data(high_, "train-hfg"), low_.dim(0)),
             sub_seed(schedule.seed, 2)) {
  if (low_.shape() != high_.shape()) {
    throw Error("train-hfg: low " + nn::shape_string(low_.shape()) + " and high " +
                nn::shape_string(high_.shape()) + " differ");
  }
  if (low_.dim(2) != config.resolution || low_.dim(3) != config.resolution || low_.dim(4) != config.resolution) {
    throw Error("train-hfg: data resolution " + std::to_string(low_.dim(2)) + " does not match config " +
                std::to_string(config.resolution));
  }
  adam_g_.config.lr = schedule.lr_generator;
  adam_d_.config.lr = schedule.lr_discriminator;
}

StepMetrics HfgTrainer::step() { return step(prev_accuracy_); }

StepMetrics HfgTrainer::step(double prev_d_accuracy) {
  const std::size_t step_number = ++steps_;
  return guarded(step_number, [&] {
    StepMetrics m;
    m.step = step_number;
    m.prev_d_accuracy = prev_d_accuracy;
    m.d_skipped = prev_d_accuracy > schedule_.skip_accuracy_threshold;

    const auto indices = order_.next(schedule_.batch_size);
    const Tensor low = gather(low_, indices);
    const Tensor high = gather(high_, indices);
    const auto g_state = generator_.state();
    const auto d_state = discriminator_.state();
    m.d_checksum_before = nn::checksum(d_state);

    Tensor fake;
    {
      Tape tape(nn::GradMode::disabled);
      fake = tape.value(generator_.forward(tape, tape.constant(low), {Mode::train, false}));
    }
    {
      Tape tape(m.d_skipped ? nn::GradMode::disabled : nn::GradMode::enabled);
      const ForwardOptions opts{Mode::train, !m.d_skipped};
      Var lo = tape.constant(low);
      Var dr = discriminator_.forward(tape, lo, tape.constant(high), opts);
      Var df = discriminator_.forward(tape, lo, tape.constant(fake), opts);
      Var loss = discriminator_loss(tape, dr, df);
      m.loss_d = tape.value(loss)[0];
      m.d_accuracy = discriminator_accuracy(per_sample_means(tape.value(dr)), per_sample_means(tape.value(df)));
      if (!m.d_skipped) {
        nn::zero_grads(d_state.params);
        tape.backward(loss);
        nn::adam_step(d_state.params, adam_d_);
      }
    }
    {
      Tape tape;
      Var lo = tape.constant(low);
      Var g = generator_.forward(tape, lo, {Mode::train, true});
      Var df = discriminator_.forward(tape, lo, g, {Mode::train, false});
      Var adversarial = generator_adversarial_loss(tape, df);
      Var l1 = l1_loss(tape, tape.constant(high), g);
      Var loss = nn::add(tape, adversarial, nn::affine(tape, l1, schedule_.l1_weight, 0.0));
      m.loss_g = tape.value(loss)[0];
      m.l1 = tape.value(l1)[0];
      nn::zero_grads(g_state.params);
      nn::zero_grads(d_state.params);
      tape.backward(loss);
      nn::adam_step(g_state.params, adam_g_);
      nn::zero_grads(d_state.params);
    }
    m.d_checksum_after = nn::checksum(d_state);
    prev_accuracy_ = m.d_accuracy;
    return m;
  });
}

double HfgTrainer::training_l1() {
  Tape tape(nn::GradMode::disabled);
  const Tensor& out = tape.value(generator_.forward(tape, tape.constant(low_), {Mode::eval, false}));
  double acc = 0.0;
  for (std::size_t i = 0; i < out.numel(); ++i) acc += std::abs(high_[i] - out[i]);
  return acc / static_cast<double>(out.numel());
}

namespace {

std::vector<nn::NamedTensor> combined(nn::ModuleState a, const nn::ModuleState& b) {
  a.append(b);
  return a.tensors;
}

nn::Checkpoint read_kind(const std::filesystem::path& path, const char* kind) {
  auto ck = nn::read_checkpoint(path);
  if (!ck.header.contains("kind") || ck.header["kind"] != kind) {
    throw Error(path.string() + ": not a " + kind + " checkpoint");
  }
  return ck;
}

}  // namespace

void save_lfg(const std::filesystem::path& path, const LfgBundle& meta, LowFrequencyGenerator& g,
              LfgDiscriminator& d) {
  nlohmann::json header = {{"kind", "lfg"}, {"config", to_json(meta.config)}, {"tau", meta.tau}};
  const auto tensors = combined(g.state(), d.state());
  nn::write_checkpoint(path, header, tensors);
}

void save_hfg(const std::filesystem::path& path, const HfgBundle& meta, HighFrequencyGenerator& g,
              PatchDiscriminator& d) {
  nlohmann::json header = {
      {"kind", "hfg"}, {"config", to_json(meta.config)}, {"tau", meta.tau}, {"cutoff", meta.cutoff}};
  const auto tensors = combined(g.state(), d.state());
  nn::write_checkpoint(path, header, tensors);
}

LoadedLfg load_lfg(const std::filesystem::path& path) {
  const auto ck = read_kind(path, "lfg");
  LoadedLfg out;
  try {
    out.meta.config = lfg_config_from_json(ck.header.at("config"));
    out.meta.tau = ck.header.at("tau").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": malformed lfg header: " + e.what());
  }
  nn::Rng rng(0);
  out.generator = std::make_unique<LowFrequencyGenerator>(out.meta.config, rng);
  out.discriminator = std::make_unique<LfgDiscriminator>(out.meta.config, rng);
  nn::restore(ck, combined(out.generator->state(), out.discriminator->state()));
  return out;
}

LoadedHfg load_hfg(const std::filesystem::path& path) {
  const auto ck = read_kind(path, "hfg");
  LoadedHfg out;
  try {
    out.meta.config = hfg_config_from_json(ck.header.at("config"));
    out.meta.tau = ck.header.at("tau").get<double>();
    out.meta.cutoff = ck.header.at("cutoff").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": malformed hfg header: " + e.what());
  }
  nn::Rng rng(0);
  out.generator = std::make_unique<HighFrequencyGenerator>(out.meta.config, rng);
  out.discriminator = std::make_unique<PatchDiscriminator>(out.meta.config, rng);
  nn::restore(ck, combined(out.generator->state(), out.discriminator->state()));
  return out;
}

namespace {

Tensor stack_grids(const std::vector<SdfGrid>& grids) {
  std::vector<Tensor> samples;
  samples.reserve(grids.size());
  for (const auto& g : grids) samples.push_back(grid_to_tensor(g));
  return stack_samples(samples);
}

class LogWriter {
 public:
  explicit LogWriter(const std::filesystem::path& path) {
    if (path.empty()) return;
    out_.open(path, std::ios::trunc);
    if (!out_) throw Error("cannot write training log: " + path.string());
  }
  void write(const StepMetrics& m) {
    if (out_.is_open()) out_ << m.log_record().dump() << '\n';
  }

 private:
  std::ofstream out_;
};

}  // namespace

TrainResult train_lfg(const std::vector<SdfGrid>& targets, const LfgConfig& config,
                      const TrainSchedule& schedule, double tau, const std::filesystem::path& checkpoint,
                      const std::filesystem::path& log_path) {
  if (targets.empty()) throw Error("train-lfg: empty dataset");
  LfgTrainer trainer(config, schedule, stack_grids(targets));
  LogWriter log(log_path);
  TrainResult result;
  for (std::size_t s = 0; s < schedule.total_steps; ++s) {
    result.metrics.push_back(trainer.step());
    log.write(result.metrics.back());
  }
  if (!checkpoint.empty()) save_lfg(checkpoint, {config, tau}, trainer.generator(), trainer.discriminator());
  return result;
}

TrainResult train_hfg(const std::vector<SdfGrid>& low, const std::vector<SdfGrid>& high,
                      const HfgConfig& config, const TrainSchedule& schedule, double tau, int cutoff,
                      const std::filesystem::path& checkpoint, const std::filesystem::path& log_path) {
  if (low.empty()) throw Error("train-hfg: empty dataset");
  if (low.size() != high.size()) throw Error("train-hfg: low and high band counts differ");
  HfgTrainer trainer(config, schedule, stack_grids(low), stack_grids(high));
  LogWriter log(log_path);
  TrainResult result;
  for (std::size_t s = 0; s < schedule.total_steps; ++s) {
    result.metrics.push_back(trainer.step());
    log.write(result.metrics.back());
  }
  if (!checkpoint.empty()) {
    save_hfg(checkpoint, {config, tau, cutoff}, trainer.generator(), trainer.discriminator());
  }
  return result;
}

}  // namespace sdfgen::gan
