#pragma once

#include <cstddef>

#include "sdfgen/aabb_tree.hpp"
#include "sdfgen/sdf_grid.hpp"

namespace sdfgen {

/// Signed solid angle subtended by triangle (a, b, c) at p, in steradians.
/// Positive when p lies behind the face, i.e. on the side opposite the
/// right-handed normal (b - a) x (c - a).
double solid_angle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Generalized winding number: sum of signed solid angles over 4*pi.
/// About 1 inside and 0 outside a closed outward-oriented mesh; defined for
/// open meshes too.
double winding_number(const TriMesh& mesh, const Vec3& p);

inline constexpr double kDefaultWindingThreshold = 0.5;

struct SdfOptions {
  double threshold = kDefaultWindingThreshold;
  std::uint32_t leaf_capacity = AabbTree::kDefaultLeafCapacity;
  unsigned threads = 0;  // 0 = default_thread_count()
};

/// Samples the signed distance of `mesh` on the canonical n^3 lattice.
/// Magnitude comes from the tree distance query, sign from the winding number:
/// +d where w > threshold, -d otherwise.
SdfGrid mesh_to_sdf(const TriMesh& mesh, std::size_t resolution, const SdfOptions& options = {});

struct EikonalStats {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  double max = 0.0;
  std::size_t evaluated = 0;
  std::size_t excluded = 0;
};

/// Statistics of | |grad f| - 1 | by central differences over interior lattice
/// points. Points within 2h of a gradient-direction flip (adjacent gradients
/// with negative dot product, a proxy for the medial axis) are excluded.
EikonalStats eikonal_residual(const SdfGrid& grid);

struct LipschitzReport {
  double max_ratio = 0.0;      // max |f(p) - f(q)| / |p - q| over axis neighbours
  std::size_t violations = 0;  // pairs with ratio > 1 + tolerance / h
  std::size_t pairs = 0;
};

LipschitzReport lipschitz_check(const SdfGrid& grid, double tolerance = 1e-6);

}  // namespace sdfgen
