#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sdfgen/geometry.hpp"

namespace sdfgen {

/// Scalar field sampled at the corners of a regular lattice.
///
/// Values are stored x-fastest: index = x + nx * (y + ny * z). The default sign
/// convention is positive inside the solid.
struct SdfGrid {
  std::array<std::size_t, 3> dims{0, 0, 0};
  Vec3 origin;
  double spacing = 1.0;
  bool positive_inside = true;
  std::vector<double> values;

  SdfGrid() = default;
  SdfGrid(std::array<std::size_t, 3> d, Vec3 o, double h, double fill = 0.0)
      : dims(d), origin(o), spacing(h), values(d[0] * d[1] * d[2], fill) {}

  /// n^3 lattice spanning [-0.5, 0.5]^3 inclusively (spacing 1/(n-1)).
  static SdfGrid canonical(std::size_t n, double fill = 0.0);

  std::size_t size() const { return values.size(); }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + dims[0] * (y + dims[1] * z);
  }
  double& at(std::size_t x, std::size_t y, std::size_t z) { return values[index(x, y, z)]; }
  double at(std::size_t x, std::size_t y, std::size_t z) const { return values[index(x, y, z)]; }
  Vec3 position(std::size_t x, std::size_t y, std::size_t z) const {
    return origin + Vec3{double(x), double(y), double(z)} * spacing;
  }
  bool same_lattice(const SdfGrid& o) const {
    return dims == o.dims && origin == o.origin && spacing == o.spacing;
  }

  /// Trilinear interpolation at a world point (clamped to the lattice).
  double trilinear(const Vec3& p) const;
};

/// Serializes to the "SDF1" layout: magic, u32 dims, f32 origin, f32 spacing,
/// u8 sign flag, 3 zero bytes, f32 values; all little-endian.
std::vector<std::byte> encode_sdf1(const SdfGrid& grid);
SdfGrid decode_sdf1(std::span<const std::byte> bytes);

void write_sdf(const SdfGrid& grid, const std::filesystem::path& path);
SdfGrid read_sdf(const std::filesystem::path& path);

/// `foo.sdf` -> `foo.json`.
std::filesystem::path sidecar_path(const std::filesystem::path& sdf_path);

}  // namespace sdfgen
