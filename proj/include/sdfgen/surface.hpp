#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sdfgen/mesh.hpp"
#include "sdfgen/sdf_grid.hpp"

namespace sdfgen {

struct IsoSurfaceConfig {
  double iso_value = 0.0;
  int smoothing_iterations = 5;
  double smoothing_lambda = 0.5;
};

/// Triangles (as triples of cube-edge ids) for one of the 256 corner sign
/// configurations. Bit c of the case index is set when corner c is inside
/// (value > iso). Corner c sits at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
using EdgeTriangles = std::vector<std::array<std::uint8_t, 3>>;
const std::array<EdgeTriangles, 256>& marching_cubes_table();

/// Cube edge e joins corners kCubeEdges[e][0] and kCubeEdges[e][1].
inline constexpr std::array<std::array<std::uint8_t, 2>, 12> kCubeEdges{{
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // along x
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // along y
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // along z
}};

/// Extracts the iso-surface of `grid`. Vertices lie on lattice edges at the
/// linearly interpolated crossing and are shared by exact edge key, so the
/// result is watertight wherever the surface does not leave the grid.
/// Triangles face toward decreasing values (outward for positive-inside fields).
TriMesh marching_cubes(const SdfGrid& grid, double iso = 0.0);

/// Explicit uniform-Laplacian smoothing: each iteration moves every vertex by
/// lambda * (neighbour centroid - vertex). Isolated vertices stay fixed.
TriMesh laplace_smooth(const TriMesh& mesh, int iterations, double lambda);

TriMesh extract_surface(const SdfGrid& grid, const IsoSurfaceConfig& config);

/// Mesh statistics used by checks and the CLI.
double surface_area(const TriMesh& mesh);
long euler_characteristic(const TriMesh& mesh);
/// True when every edge is shared by exactly two triangles with opposite
/// orientation.
bool is_closed_manifold(const TriMesh& mesh);

}  // namespace sdfgen
