#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sdfgen/gan/training.hpp"
#include "sdfgen/sdf_grid.hpp"
#include "sdfgen/spectral.hpp"
#include "sdfgen/surface.hpp"

namespace sdfgen {

/// clamp(f / tau, -1, 1).
SdfGrid truncate_field(const SdfGrid& raw, double tau);
/// tau * t; exact inverse of truncate_field wherever |t| < 1.
SdfGrid denormalize_field(const SdfGrid& truncated, double tau);

struct HfgPairs {
  std::vector<SdfGrid> low;
  std::vector<SdfGrid> high;
};

/// Band-splits each (already truncated) field at `cutoff`.
HfgPairs make_hfg_pairs(const std::vector<SdfGrid>& truncated, int cutoff);

enum class Axis { x, y, z };
Axis axis_from_string(const std::string& s);

SdfGrid reflect(const SdfGrid& grid, Axis axis);
/// (S + reflect(S)) / 2; a projection onto mirror-symmetric fields.
SdfGrid symmetrize(const SdfGrid& grid, Axis axis);

/// z ~ U[-1, 1]^dim from a 64-bit seed.
nn::Tensor latent_from_seed(std::uint64_t seed, std::size_t dim);

struct Generation {
  SdfGrid low;       // sigma(L(z))
  SdfGrid high;      // H(sigma(L(z)))
  SdfGrid composed;  // low + high, symmetrized if requested (truncated units)
  SdfGrid field;     // de-normalized composed field
  TriMesh mesh;
};

struct GenerateOptions {
  std::optional<Axis> symmetry;
  std::optional<int> cutoff;  // must match the HFG checkpoint when given
  IsoSurfaceConfig surface;
  bool extract_mesh = true;
};

/// Loaded LFG/HFG pair with compatibility checked once.
class ShapeGenerator {
 public:
  ShapeGenerator(gan::LoadedLfg lfg, gan::LoadedHfg hfg, std::optional<int> cutoff = std::nullopt);
  static ShapeGenerator load(const std::filesystem::path& lfg, const std::filesystem::path& hfg,
                             std::optional<int> cutoff = std::nullopt);

  Generation run(const nn::Tensor& z, const GenerateOptions& options);
  Generation run_seed(std::uint64_t seed, const GenerateOptions& options);
  /// z_t = (1 - t) z_a + t z_b for t = i / (steps - 1).
  std::vector<Generation> interpolate(std::uint64_t seed_a, std::uint64_t seed_b, std::size_t steps,
                                      const GenerateOptions& options);

  std::size_t latent_dim() const { return lfg_.meta.config.latent_dim; }
  std::size_t resolution() const { return lfg_.meta.config.output_resolution(); }
  int cutoff() const { return hfg_.meta.cutoff; }
  double tau() const { return lfg_.meta.tau; }
  gan::HighFrequencyGenerator& hfg() { return *hfg_.generator; }
  gan::LowFrequencyGenerator& lfg() { return *lfg_.generator; }

 private:
  gan::LoadedLfg lfg_;
  gan::LoadedHfg hfg_;
};

/// Reads manifest.jsonl from a dataset directory (or every *.sdf in name order
/// when there is no manifest).
std::vector<SdfGrid> load_dataset(const std::filesystem::path& dir);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace sdfgen
