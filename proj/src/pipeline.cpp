#include "sdfgen/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <random>

namespace sdfgen {

SdfGrid truncate_field(const SdfGrid& raw, double tau) {
  if (!(tau > 0.0)) throw Error("tau must be positive");
  SdfGrid out = raw;
  for (auto& v : out.values) v = std::clamp(v / tau, -1.0, 1.0);
  return out;
}

SdfGrid denormalize_field(const SdfGrid& truncated, double tau) {
  if (!(tau > 0.0)) throw Error("tau must be positive");
  SdfGrid out = truncated;
  for (auto& v : out.values) v *= tau;
  return out;
}

HfgPairs make_hfg_pairs(const std::vector<SdfGrid>& truncated, int cutoff) {
  HfgPairs pairs;
  for (const auto& g : truncated) {
    auto bands = split_bands(g, FilterSpec{cutoff});
    pairs.low.push_back(std::move(bands.low));
    pairs.high.push_back(std::move(bands.high));
  }
  return pairs;
}

Axis axis_from_string(const std::string& s) {
  if (s == "x") return Axis::x;
  if (s == "y") return Axis::y;
  if (s == "z") return Axis::z;
  throw Error("unknown symmetry axis '" + s + "' (expected x, y or z)");
}

SdfGrid reflect(const SdfGrid& grid, Axis axis) {
  SdfGrid out = grid;
  const auto [nx, ny, nz] = grid.dims;
  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t y = 0; y < ny; ++y) {
      for (std::size_t x = 0; x < nx; ++x) {
        const std::size_t sx = axis == Axis::x ? nx - 1 - x : x;
        const std::size_t sy = axis == Axis::y ? ny - 1 - y : y;
        const std::size_t sz = axis == Axis::z ? nz - 1 - z : z;
        out.at(x, y, z) = grid.at(sx, sy, sz);
      }
    }
  }
  return out;
}

SdfGrid symmetrize(const SdfGrid& grid, Axis axis) {
  const SdfGrid mirrored = reflect(grid, axis);
  SdfGrid out = grid;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = (grid.values[i] + mirrored.values[i]) / 2.0;
  return out;
}

nn::Tensor latent_from_seed(std::uint64_t seed, std::size_t dim) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  nn::Tensor z({1, dim});
  for (auto& v : z.data()) v = u(rng);
  return z;
}

ShapeGenerator::ShapeGenerator(gan::LoadedLfg lfg, gan::LoadedHfg hfg, std::optional<int> cutoff)
    : lfg_(std::move(lfg)), hfg_(std::move(hfg)) {
  const std::size_t r = lfg_.meta.config.output_resolution();
  if (r != hfg_.meta.config.resolution) {
    throw Error("resolution mismatch: LFG produces " + std::to_string(r) + "^3, HFG expects " +
                std::to_string(hfg_.meta.config.resolution) + "^3");
  }
  if (lfg_.meta.tau != hfg_.meta.tau) {
    throw Error("tau mismatch between checkpoints: " + std::to_string(lfg_.meta.tau) + " vs " +
                std::to_string(hfg_.meta.tau));
  }
  if (cutoff && *cutoff != hfg_.meta.cutoff) {
    throw Error("cutoff mismatch: requested " + std::to_string(*cutoff) + ", HFG trained with " +
                std::to_string(hfg_.meta.cutoff));
  }
  check_filter({r, r, r}, FilterSpec{hfg_.meta.cutoff});
}

ShapeGenerator ShapeGenerator::load(const std::filesystem::path& lfg, const std::filesystem::path& hfg,
                                    std::optional<int> cutoff) {
  return ShapeGenerator(gan::load_lfg(lfg), gan::load_hfg(hfg), cutoff);
}

Generation ShapeGenerator::run(const nn::Tensor& z, const GenerateOptions& options) {
  if (options.cutoff && *options.cutoff != cutoff()) {
    throw Error("cutoff mismatch: requested " + std::to_string(*options.cutoff) + ", HFG trained with " +
                std::to_string(cutoff()));
  }
  if (z.rank() != 2 || z.dim(0) != 1 || z.dim(1) != latent_dim()) {
    throw Error("latent must be [1, " + std::to_string(latent_dim()) + "]");
  }
  if (!z.all_finite()) throw Error("latent contains non-finite values");
  const gan::ForwardOptions eval{nn::Mode::eval, false};

  Generation g;
  {
    nn::Tape tape(nn::GradMode::disabled);
    const nn::Tensor raw = tape.value(lfg_.generator->forward(tape, tape.constant(z), eval));
    g.low = low_pass(gan::tensor_to_grid(raw), FilterSpec{cutoff()});
  }
  {
    nn::Tape tape(nn::GradMode::disabled);
    const nn::Tensor in = gan::grid_to_tensor(g.low).reshaped({1, 1, resolution(), resolution(), resolution()});
    g.high = gan::tensor_to_grid(tape.value(hfg_.generator->forward(tape, tape.constant(in), eval)));
  }
  g.composed = g.low;
  for (std::size_t i = 0; i < g.composed.size(); ++i) g.composed.values[i] = g.low.values[i] + g.high.values[i];
  if (options.symmetry) g.composed = symmetrize(g.composed, *options.symmetry);
  g.field = denormalize_field(g.composed, tau());
  if (options.extract_mesh) g.mesh = extract_surface(g.field, options.surface);
  return g;
}

Generation ShapeGenerator::run_seed(std::uint64_t seed, const GenerateOptions& options) {
  return run(latent_from_seed(seed, latent_dim()), options);
}

std::vector<Generation> ShapeGenerator::interpolate(std::uint64_t seed_a, std::uint64_t seed_b, std::size_t steps,
                                                    const GenerateOptions& options) {
  if (steps < 2) throw Error("interpolate: steps must be at least 2");
  const nn::Tensor za = latent_from_seed(seed_a, latent_dim());
  const nn::Tensor zb = latent_from_seed(seed_b, latent_dim());
  std::vector<Generation> out;
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    nn::Tensor z = za;
    for (std::size_t k = 0; k < z.numel(); ++k) z[k] = (1.0 - t) * za[k] + t * zb[k];
    out.push_back(run(z, options));
  }
  return out;
}

std::vector<SdfGrid> load_dataset(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  const auto manifest = dir / "manifest.jsonl";
  if (std::filesystem::exists(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        files.push_back(dir / nlohmann::json::parse(line).at("sdf").get<std::string>());
      } catch (const nlohmann::json::exception& e) {
        throw Error(manifest.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
  } else if (std::filesystem::is_directory(dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.path().extension() == ".sdf") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    throw Error("dataset directory not found: " + dir.string());
  }
  if (files.empty()) throw Error("dataset is empty: " + dir.string());
  std::vector<SdfGrid> grids;
  for (const auto& f : files) grids.push_back(read_sdf(f));
  for (const auto& g : grids) {
    if (g.dims != grids[0].dims) throw Error("dataset grids have differing resolutions");
  }
  return grids;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace sdfgen
