#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "sdfgen/mesh.hpp"
#include "sdfgen/sdf_kernel.hpp"

namespace sdfgen {

// Closed, outward-oriented primitives.
TriMesh make_box(const Vec3& lo, const Vec3& hi);
/// Cylinder with its axis along y.
TriMesh make_cylinder(const Vec3& center, double radius, double half_height, int segments = 24);
TriMesh make_icosphere(double radius, int subdivisions, const Vec3& center = {});
/// Concatenation without welding.
TriMesh merge_meshes(const std::vector<TriMesh>& parts);

enum class SynthFamily { boxes, cylinders, chairs };

SynthFamily synth_family_from_string(const std::string& s);
std::string to_string(SynthFamily f);

struct Range {
  double lo;
  double hi;
};

/// Chair: seat slab on four legs with a back slab along the -z edge; y is up
/// and the legs stand on y = -0.45.
struct ChairRanges {
  Range seat_width{0.5, 0.7};
  Range seat_depth{0.5, 0.7};
  Range seat_thickness{0.14, 0.2};
  Range seat_height{0.25, 0.4};
  Range leg_thickness{0.1, 0.16};
  Range back_height{0.25, 0.4};
  Range back_thickness{0.1, 0.14};
};

struct SynthSpec {
  SynthFamily family = SynthFamily::chairs;
  std::size_t count = 20;
  std::uint64_t seed = 0;
  std::size_t resolution = 16;
  ChairRanges chair;

  void validate() const;
};

struct SynthShape {
  std::string name;
  TriMesh mesh;
  nlohmann::json params;
  Vec3 probe;  // a point inside the solid (centroid or seat center)
};

/// Deterministic in the spec's seed.
std::vector<SynthShape> synth_shapes(const SynthSpec& spec);

/// Writes <name>.obj, <name>.sdf, <name>.json per shape and manifest.jsonl.
/// Returns the manifest records.
std::vector<nlohmann::json> synth_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir,
                                          const SdfOptions& options = {});

}  // namespace sdfgen
