// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "sdfgen/aabb_tree.hpp"
#include "sdfgen/pipeline.hpp"
#include "sdfgen/sdf_kernel.hpp"
#include "sdfgen/synth.hpp"
#include "support.hpp"

using namespace sdfgen;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Outcome()>& fn) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s [%d] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path work_dir() {
  auto d = fs::current_path() / "acceptance_work";
  fs::create_directories(d);
  return d;
}

// Shared state between criteria: the icosphere grid and the trained models.
SdfGrid g_icosphere_grid;
fs::path g_lfg_ckpt, g_hfg_ckpt;

std::vector<SdfGrid> chair_dataset(std::size_t count, std::uint64_t seed, double tau) {
  SynthSpec spec;
  spec.count = count;
  spec.seed = seed;
  spec.resolution = 16;
  std::vector<SdfGrid> out;
  for (const auto& s : synth_shapes(spec)) out.push_back(truncate_field(mesh_to_sdf(s.mesh, 16), tau));
  return out;
}

Outcome geometry_oracle() {
  const TriMesh sphere = make_icosphere(0.45, 3);
  SdfOptions opts;
  opts.threads = 1;
  const auto t0 = Clock::now();
  g_icosphere_grid = mesh_to_sdf(sphere, 64, opts);
  const double elapsed = seconds_since(t0);
  const SdfGrid exact = support::analytic_sphere(64, 0.45);
  double worst = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    const double e = std::abs(g_icosphere_grid.values[i] - exact.values[i]);
    worst = std::max(worst, e);
    sum += e;
  }
  const double mean = sum / double(exact.size());
  return {worst < 0.01 && mean < 0.003 && elapsed < 60.0,
          fmt("max err %.5f (< 0.01), mean err %.6f (< 0.003), single-thread %.1fs (< 60s)", worst, mean, elapsed)};
}

Outcome eikonal() {
  const auto e = eikonal_residual(g_icosphere_grid);
  return {e.median < 0.05, fmt("median %.5f (< 0.05), p95 %.4f, %zu evaluated, %zu excluded", e.median, e.p95,
                               e.evaluated, e.excluded)};
}

Outcome winding() {
  const double a = 0.3;
  TriMesh cube = make_box({-a, -a, -a}, {a, a, a});
  cube.triangles.resize(10);  // remove the +z face
  const SdfGrid g = mesh_to_sdf(cube, 10);
  const double h = g.spacing;
  std::size_t inside_ok = 0, inside_n = 0, outside_ok = 0, outside_n = 0, skipped = 0;
  for (std::size_t z = 0; z < 10; ++z)
    for (std::size_t y = 0; y < 10; ++y)
      for (std::size_t x = 0; x < 10; ++x) {
        const Vec3 p = g.position(x, y, z);
        // Distance to the missing face (square at z = a).
        const double dx = std::max(std::abs(p.x) - a, 0.0), dy = std::max(std::abs(p.y) - a, 0.0);
        const double hole = std::sqrt(dx * dx + dy * dy + (p.z - a) * (p.z - a));
        if (hole < h) {
          ++skipped;
          continue;
        }
        const bool inside = std::abs(p.x) < a && std::abs(p.y) < a && std::abs(p.z) < a;
        const bool classified = g.at(x, y, z) > 0.0;
        (inside ? inside_n : outside_n)++;
        (inside ? inside_ok : outside_ok) += classified == inside;
      }
  return {inside_ok == inside_n && outside_ok == outside_n && inside_n > 0,
          fmt("inside %zu/%zu, outside %zu/%zu correct, %zu lattice points within h of the hole", inside_ok,
              inside_n, outside_ok, outside_n, skipped)};
}

Outcome spectral_contract() {
  const FilterSpec spec{8};
  const Bands b = split_bands(g_icosphere_grid, spec);
  double comp = 0.0, idem = 0.0;
  for (std::size_t i = 0; i < b.low.size(); ++i) {
    comp = std::max(comp, std::abs(b.low.values[i] + b.high.values[i] - g_icosphere_grid.values[i]));
  }
  const SdfGrid again = low_pass(b.low, spec);
  for (std::size_t i = 0; i < b.low.size(); ++i) idem = std::max(idem, std::abs(again.values[i] - b.low.values[i]));

  double e_space = 0.0, e_freq = 0.0;
  for (double v : g_icosphere_grid.values) e_space += v * v;
  for (const auto& c : fft3(g_icosphere_grid).coefficients) e_freq += std::norm(c);
  const double parseval = std::abs(e_freq / double(g_icosphere_grid.size()) - e_space) / e_space;

  std::mt19937_64 rng(8);
  SdfGrid small = SdfGrid::canonical(8);
  for (auto& v : small.values) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  const auto fast = fft3(small);
  const auto slow = support::naive_dft3(small.values, 8);
  double dft = 0.0;
  for (std::size_t i = 0; i < slow.size(); ++i) dft = std::max(dft, std::abs(fast.coefficients[i] - slow[i]));

  return {comp < 1e-10 && idem < 1e-10 && parseval < 1e-9 && dft < 1e-9,
          fmt("complementarity %.2e, idempotence %.2e, Parseval rel %.2e, naive DFT 8^3 %.2e", comp, idem,
              parseval, dft)};
}

Outcome marching() {
  const TriMesh m = marching_cubes(support::analytic_sphere(64, 0.4));
  const bool closed = is_closed_manifold(m);
  const long chi = euler_characteristic(m);
  const double area = surface_area(m), exact = 4 * std::numbers::pi * 0.16;
  const double rel = std::abs(area - exact) / exact;
  return {closed && chi == 2 && rel < 0.02,
          fmt("closed manifold %s, Euler %ld, area %.5f vs %.5f (%.3f%%)", closed ? "yes" : "no", chi, area, exact,
              100 * rel)};
}

Outcome gradients() {
  using namespace sdfgen::nn;
  std::mt19937_64 rng(6);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  struct Layer {
    const char* name;
    std::function<double(int)> check;
  };
  auto unary = [&](auto op, double lo = -1.0, double hi = 1.0) {
    return [&, op, lo, hi](int i) {
      const Shape s{pick(1, 3), pick(1, 3), pick(1, 4), pick(1, 3)};
      return support::gradient_check([op](Tape& t, const std::vector<Var>& v) { return op(t, v[0]); },
                                     {support::random_tensor(s, rng, lo, hi)}, i);
    };
  };
  std::vector<Layer> layers = {
      {"linear",
       [&](int i) {
         const std::size_t n = pick(1, 4), in = pick(1, 6), out = pick(1, 5);
         return support::gradient_check([](Tape& t, const std::vector<Var>& v) { return linear(t, v[0], v[1], v[2]); },
                                        {support::random_tensor({n, in}, rng), support::random_tensor({out, in}, rng),
                                         support::random_tensor({out}, rng)},
                                        i);
       }},
      {"conv3d",
       [&](int i) {
         const std::size_t k = 2 * pick(0, 2) + 1, s = pick(1, 2), p = pick(0, k / 2), ci = pick(1, 2), co = pick(1, 2);
         const ConvGeometry g{k, s, p, 0};
         return support::gradient_check(
             [g](Tape& t, const std::vector<Var>& v) { return conv3d(t, v[0], v[1], v[2], g); },
             {support::random_tensor({pick(1, 2), ci, pick(k, k + 2), pick(k, k + 2), pick(k, k + 2)}, rng),
              support::random_tensor({co, ci, k, k, k}, rng), support::random_tensor({co}, rng)},
             i);
       }},
      {"upconv3d",
       [&](int i) {
         const std::size_t k = 2 * pick(0, 2) + 1, s = pick(1, 2), p = pick(0, k / 2), op = pick(0, s - 1);
         const std::size_t ci = pick(1, 2), co = pick(1, 2);
         const ConvGeometry g{k, s, p, op};
         return support::gradient_check(
             [g](Tape& t, const std::vector<Var>& v) { return upconv3d(t, v[0], v[1], v[2], g); },
             {support::random_tensor({pick(1, 2), ci, pick(1, 3), pick(1, 3), pick(1, 3)}, rng),
              support::random_tensor({ci, co, k, k, k}, rng), support::random_tensor({co}, rng)},
             i);
       }},
      {"batchnorm",
       [&](int i) {
         const std::size_t c = pick(1, 3);
         return support::gradient_check(
             [c](Tape& t, const std::vector<Var>& v) {
               BatchNormStats stats{Tensor({c}), Tensor({c}, 1.0)};
               return batchnorm(t, v[0], v[1], v[2], stats, {Mode::train, false});
             },
             {support::random_tensor({pick(2, 3), c, pick(1, 3), pick(1, 3), pick(1, 3)}, rng),
              support::random_tensor({c}, rng), support::random_tensor({c}, rng)},
             i);
       }},
      {"concat",
       [&](int i) {
         const std::size_t n = pick(1, 2), d = pick(1, 3);
         return support::gradient_check(
             [](Tape& t, const std::vector<Var>& v) { return concat_channels(t, v[0], v[1]); },
             {support::random_tensor({n, pick(1, 3), d, d, d}, rng), support::random_tensor({n, pick(1, 3), d, d, d}, rng)},
             i);
       }},
      {"add",
       [&](int i) {
         const Shape s{pick(1, 3), pick(1, 5)};
         return support::gradient_check([](Tape& t, const std::vector<Var>& v) { return add(t, v[0], v[1]); },
                                        {support::random_tensor(s, rng), support::random_tensor(s, rng)}, i);
       }},
      {"sub",
       [&](int i) {
         const Shape s{pick(1, 3), pick(1, 5)};
         return support::gradient_check([](Tape& t, const std::vector<Var>& v) { return sub(t, v[0], v[1]); },
                                        {support::random_tensor(s, rng), support::random_tensor(s, rng)}, i);
       }},
      {"affine", unary([](Tape& t, Var x) { return affine(t, x, 0.7, -0.2); })},
      {"relu", unary([](Tape& t, Var x) { return relu(t, x); })},
      {"leaky_relu", unary([](Tape& t, Var x) { return leaky_relu(t, x, 0.2); })},
      {"tanh", unary([](Tape& t, Var x) { return nn::tanh(t, x); })},
      {"sigmoid", unary([](Tape& t, Var x) { return sigmoid(t, x); })},
      {"abs", unary([](Tape& t, Var x) { return nn::abs(t, x); })},
      {"log", unary([](Tape& t, Var x) { return log_clamped(t, x, 1e-7); }, 0.05, 0.95)},
      {"reshape", unary([](Tape& t, Var x) { return reshape(t, x, {t.value(x).numel()}); })},
      {"sum", unary([](Tape& t, Var x) { return sum(t, x); })},
      {"mean", unary([](Tape& t, Var x) { return mean(t, x); })},
      {"mean_per_sample", unary([](Tape& t, Var x) { return mean_per_sample(t, x); })},
  };
  double worst = 0.0;
  std::string worst_name;
  for (auto& layer : layers) {
    for (int i = 0; i < 20; ++i) {
      const double e = layer.check(i);
      if (e > worst) {
        worst = e;
        worst_name = layer.name;
      }
    }
  }

  double adjoint = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t k = 2 * pick(1, 2) + 1, s = pick(1, 2), ci = pick(1, 3), co = pick(1, 3);
    const std::size_t m = pick(2, 4);
    const ConvGeometry g{k, s, k / 2, s - 1};
    const std::size_t n_in = upconv_output_size(m, g);
    const Tensor x = support::random_tensor({2, ci, n_in, n_in, n_in}, rng);
    const Tensor y = support::random_tensor({2, co, m, m, m}, rng);
    const Tensor w = support::random_tensor({co, ci, k, k, k}, rng);
    Tape tape(GradMode::disabled);
    const Tensor& cx = tape.value(conv3d(tape, tape.constant(x), tape.constant(w), tape.constant(Tensor({co})), g));
    const Tensor& uy = tape.value(upconv3d(tape, tape.constant(y), tape.constant(w), tape.constant(Tensor({ci})), g));
    const double lhs = support::dot(cx, y), rhs = support::dot(x, uy);
    adjoint = std::max(adjoint, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
  }
  return {worst < 1e-4 && adjoint < 1e-10,
          fmt("%zu layers x 20 shapes, worst rel err %.2e (%s), adjointness %.2e", layers.size(), worst,
              worst_name.c_str(), adjoint)};
}

Outcome ladders() {
  auto run = [](const gan::LfgConfig& c) {
    nn::Rng rng(1);
    gan::LowFrequencyGenerator g(c, rng);
    nn::Tape tape(nn::GradMode::disabled);
    const auto z = latent_from_seed(1, c.latent_dim);
    return tape.value(g.forward(tape, tape.constant(z), {nn::Mode::eval, false})).shape();
  };
  const auto full = gan::lfg_shape_ladder(gan::LfgConfig::full());
  const auto desk = gan::lfg_shape_ladder(gan::LfgConfig::desk());
  const bool full_ok = gan::LfgConfig::full().latent_dim == 200 && full.front() == nn::Shape{512, 4, 4, 4} &&
                        full.back() == nn::Shape{1, 64, 64, 64} && run(gan::LfgConfig::full()) == nn::Shape{1, 1, 64, 64, 64};
  const bool desk_ok = desk.front() == nn::Shape{64, 2, 2, 2} && desk.back() == nn::Shape{1, 16, 16, 16} &&
                       run(gan::LfgConfig::desk()) == nn::Shape{1, 1, 16, 16, 16};
  std::string text;
  for (const auto& s : full) text += nn::shape_string(s) + " ";
  return {full_ok && desk_ok, fmt("full z[200] -> %s; desk 64x2^3 -> 1x16^3", text.c_str())};
}

Outcome skip_rule() {
  const double tau = gan::kDefaultTau;
  const auto data = chair_dataset(20, 1, tau);
  gan::TrainSchedule s;
  s.total_steps = 500;
  s.seed = 1;
  g_lfg_ckpt = work_dir() / "lfg.ckpt";
  const auto r = gan::train_lfg(data, gan::LfgConfig::desk(), s, tau, g_lfg_ckpt, work_dir() / "lfg_log.jsonl");
  std::size_t skipped = 0, trained = 0, violations = 0, nonfinite = 0;
  double max_loss_g = 0.0;
  for (const auto& m : r.metrics) {
    const bool should_skip = m.prev_d_accuracy > s.skip_accuracy_threshold;
    if (should_skip != m.d_skipped) ++violations;
    if (m.d_skipped && m.d_checksum_before != m.d_checksum_after) ++violations;
    if (!m.d_skipped && m.d_checksum_before == m.d_checksum_after) ++violations;
    (m.d_skipped ? skipped : trained)++;
    if (!std::isfinite(m.loss_d) || !std::isfinite(m.loss_g)) ++nonfinite;
    max_loss_g = std::max(max_loss_g, m.loss_g);
  }
  return {violations == 0 && skipped > 0 && trained > 0 && nonfinite == 0,
          fmt("500 steps: %zu skipped, %zu trained, %zu rule violations, max loss_g %.3f", skipped, trained,
              violations, max_loss_g)};
}

Outcome hfg_supervised() {
  const double tau = gan::kDefaultTau;
  const int cutoff = 2;
  const auto pairs = make_hfg_pairs(chair_dataset(20, 2, tau), cutoff);
  std::vector<nn::Tensor> lo, hi;
  for (std::size_t i = 0; i < pairs.low.size(); ++i) {
    lo.push_back(gan::grid_to_tensor(pairs.low[i]));
    hi.push_back(gan::grid_to_tensor(pairs.high[i]));
  }
  gan::TrainSchedule s;
  s.total_steps = 1000;
  s.seed = 2;
  gan::HfgConfig config;
  const auto t0 = Clock::now();
  gan::HfgTrainer trainer(config, s, gan::stack_samples(lo), gan::stack_samples(hi));
  std::vector<double> l1;  // training-set L1 after each step
  std::ofstream log(work_dir() / "hfg_log.jsonl");
  for (std::size_t step = 1; step <= s.total_steps; ++step) {
    auto m = trainer.step();
    l1.push_back(trainer.training_l1());
    auto rec = m.log_record();
    rec["train_l1"] = l1.back();
    log << rec.dump() << '\n';
  }
  const double elapsed = seconds_since(t0);
  g_hfg_ckpt = work_dir() / "hfg.ckpt";
  gan::save_hfg(g_hfg_ckpt, {config, tau, cutoff}, trainer.generator(), trainer.discriminator());
  std::size_t windows = 0, monotone = 0;
  for (std::size_t w = 0; w + 200 < l1.size(); w += 200) {
    ++windows;
    monotone += l1[w + 200] <= l1[w];
  }
  const double at50 = l1[49], final = l1.back();
  return {final <= 0.5 * at50 && elapsed < 1800.0,
          fmt("train-set L1 step 50 %.5f -> step 1000 %.5f (ratio %.3f <= 0.5), %zu/%zu 200-step windows "
              "non-increasing, %.0fs (< 1800s)",
              at50, final, final / at50, monotone, windows, elapsed)};
}

Outcome composition() {
  auto gen = ShapeGenerator::load(g_lfg_ckpt, g_hfg_ckpt);
  GenerateOptions opts;
  opts.symmetry = Axis::x;
  const Generation sym = gen.run_seed(3, opts);
  double asym = 0.0;
  const SdfGrid mirrored = reflect(sym.composed, Axis::x);
  for (std::size_t i = 0; i < mirrored.size(); ++i) asym = std::max(asym, std::abs(mirrored.values[i] - sym.composed.values[i]));

  for (auto* p : gen.hfg().state().params) p->value.fill(0.0);
  const Generation zero = gen.run_seed(3, GenerateOptions{});
  const bool bitwise = zero.composed.values == zero.low.values;
  return {bitwise && asym <= 1e-12,
          fmt("zeroed HFG output == sigma(L(z)) bitwise: %s; x-mirror asymmetry %.1e", bitwise ? "yes" : "no", asym)};
}

Outcome determinism() {
  const fs::path dir = work_dir() / "determinism";
  fs::create_directories(dir);
  std::vector<std::string> mismatched;
  auto twice = [&](const std::string& what, const std::function<std::vector<fs::path>(int)>& make) {
    const auto a = make(0), b = make(1);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (slurp(a[i]) != slurp(b[i]) || slurp(a[i]).empty()) mismatched.push_back(what + ":" + a[i].filename().string());
    }
  };
  const TriMesh sphere = make_icosphere(0.45, 3);
  save_mesh(sphere, dir / "sphere.obj");
  twice("convert", [&](int run) {
    const fs::path out = dir / ("sphere_" + std::to_string(run) + ".sdf");
    write_sdf(mesh_to_sdf(normalize_mesh(load_mesh(dir / "sphere.obj").mesh), 32), out);
    return std::vector<fs::path>{out};
  });
  const auto data = chair_dataset(8, 4, gan::kDefaultTau);
  gan::TrainSchedule s;
  s.total_steps = 15;
  s.seed = 4;
  twice("train-lfg", [&](int run) {
    const fs::path ck = dir / ("lfg_" + std::to_string(run) + ".ckpt"), lg = dir / ("lfg_" + std::to_string(run) + ".jsonl");
    gan::train_lfg(data, gan::LfgConfig::desk(), s, gan::kDefaultTau, ck, lg);
    return std::vector<fs::path>{ck, lg};
  });
  const auto pairs = make_hfg_pairs(data, 2);
  twice("train-hfg", [&](int run) {
    const fs::path ck = dir / ("hfg_" + std::to_string(run) + ".ckpt"), lg = dir / ("hfg_" + std::to_string(run) + ".jsonl");
    gan::train_hfg(pairs.low, pairs.high, gan::HfgConfig{}, s, gan::kDefaultTau, 2, ck, lg);
    return std::vector<fs::path>{ck, lg};
  });
  twice("generate", [&](int run) {
    auto gen = ShapeGenerator::load(dir / "lfg_0.ckpt", dir / "hfg_0.ckpt");
    GenerateOptions opts;
    opts.symmetry = Axis::x;
    const auto g = gen.run_seed(9, opts);
    const fs::path sdf = dir / ("gen_" + std::to_string(run) + ".sdf"), obj = dir / ("gen_" + std::to_string(run) + ".obj");
    write_sdf(g.field, sdf);
    save_mesh(g.mesh.triangles.empty() ? make_box({0, 0, 0}, {1, 1, 1}) : g.mesh, obj);
    return std::vector<fs::path>{sdf, obj};
  });
  std::string detail = mismatched.empty() ? "convert, train-lfg, train-hfg, generate byte-identical across two runs"
                                          : "differing artifacts:";
  for (const auto& m : mismatched) detail += " " + m;
  return {mismatched.empty(), detail};
}

}  // namespace

int main() {
  std::printf("sdfgen %s acceptance\n", SDFGEN_VERSION);
  report(1, "icosphere SDF vs analytic sphere", geometry_oracle);
  report(2, "eikonal residual", eikonal);
  report(3, "winding robustness on an open cube", winding);
  report(4, "spectral contract", spectral_contract);
  report(5, "marching cubes sphere", marching);
  report(6, "gradient checks and adjointness", gradients);
  report(7, "generator shape ladders", ladders);
  report(8, "discriminator skip rule", skip_rule);
  report(9, "HFG supervised L1", hfg_supervised);
  report(10, "composition identity and symmetry", composition);
  report(11, "determinism", determinism);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
