#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdfgen/geometry.hpp"

namespace sdfgen {

using Triangle = std::array<std::uint32_t, 3>;

/// Maps original coordinates to canonical ones: canonical = (p - center) * scale.
struct Normalization {
  Vec3 center;
  double scale = 1.0;

  Vec3 to_canonical(const Vec3& p) const { return (p - center) * scale; }
  Vec3 to_original(const Vec3& p) const { return p * (1.0 / scale) + center; }
};

/// Indexed triangle mesh.
///
/// Every coordinate is finite, every index is in range and no triangle repeats
/// a vertex. `validate()` checks all three.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::optional<Normalization> normalization;

  Box3 bounds() const;
  std::array<Vec3, 3> corners(std::size_t tri) const {
    const auto& t = triangles[tri];
    return {vertices[t[0]], vertices[t[1]], vertices[t[2]]};
  }
  void validate() const;
  /// Reverses the winding of every triangle.
  TriMesh flipped() const;
};

enum class MeshFormat { obj, stl };

struct LoadedMesh {
  TriMesh mesh;
  std::size_t degenerate_dropped = 0;
};

/// Picks the format from the file extension (.obj / .stl, case-insensitive).
MeshFormat format_from_path(const std::filesystem::path& path);

LoadedMesh load_mesh(const std::filesystem::path& path, MeshFormat format);
LoadedMesh load_mesh(const std::filesystem::path& path);

/// Parses an OBJ subset (`v` and `f` records; polygons are fan-triangulated).
LoadedMesh parse_obj(std::string_view text);
LoadedMesh parse_stl(std::span<const std::byte> bytes);

/// Canonical OBJ text: fixed 9 significant digits, one record per line.
std::string to_obj(const TriMesh& mesh);
void save_mesh(const TriMesh& mesh, const std::filesystem::path& path,
               MeshFormat format = MeshFormat::obj);

/// Centers the bounding box at the origin and scales uniformly so the largest
/// extent becomes 0.9. Repeated application composes the stored transform so
/// that `normalization` always maps from the very first input coordinates.
TriMesh normalize_mesh(const TriMesh& mesh);

inline constexpr double kCanonicalExtent = 0.9;

}  // namespace sdfgen
