#include "sdfgen/surface.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>

namespace sdfgen {

namespace {

struct CubeFace {
  std::array<std::uint8_t, 4> corners;  // cyclic order
  Vec3 normal;                          // outward
};

constexpr std::array<CubeFace, 6> kFaces{{
    {{0, 2, 6, 4}, {-1, 0, 0}},
    {{1, 3, 7, 5}, {1, 0, 0}},
    {{0, 1, 5, 4}, {0, -1, 0}},
    {{2, 3, 7, 6}, {0, 1, 0}},
    {{0, 1, 3, 2}, {0, 0, -1}},
    {{4, 5, 7, 6}, {0, 0, 1}},
}};

Vec3 corner_pos(int c) { return {double(c & 1), double((c >> 1) & 1), double((c >> 2) & 1)}; }

int edge_between(int a, int b) {
  for (int e = 0; e < 12; ++e) {
    if ((kCubeEdges[e][0] == a && kCubeEdges[e][1] == b) ||
        (kCubeEdges[e][0] == b && kCubeEdges[e][1] == a)) {
      return e;
    }
  }
  throw Error("marching cubes: corners are not adjacent");
}

Vec3 edge_mid(int e) { return (corner_pos(kCubeEdges[e][0]) + corner_pos(kCubeEdges[e][1])) * 0.5; }

// Orders the segment (p, q) on a face so that (q - p) x normal points toward
// the inside target; this makes every loop wind with its normal facing the
// outside corners.
std::pair<int, int> oriented(int p, int q, const Vec3& normal, const Vec3& target) {
  const Vec3 d = edge_mid(q) - edge_mid(p);
  const Vec3 mid = (edge_mid(p) + edge_mid(q)) * 0.5;
  if (dot(cross(d, normal), target - mid) < 0.0) return {q, p};
  return {p, q};
}

// Builds the triangulation of one corner configuration by walking the
// iso-contour across the six faces. Ambiguous faces (diagonal inside corners)
// always separate the inside corners; both cells sharing a face see the same
// corner signs, so neighbouring cells agree and the surface stays watertight.
EdgeTriangles triangulate_case(int cube_case) {
  auto inside = [&](int c) { return (cube_case >> c) & 1; };
  std::array<int, 12> next;
  next.fill(-1);
  auto link = [&](std::pair<int, int> seg) {
    if (next[seg.first] != -1) throw Error("marching cubes: inconsistent contour");
    next[seg.first] = seg.second;
  };

  for (const auto& face : kFaces) {
    std::vector<int> crossing;
    for (int i = 0; i < 4; ++i) {
      const int a = face.corners[i];
      const int b = face.corners[(i + 1) % 4];
      if (inside(a) != inside(b)) crossing.push_back(edge_between(a, b));
    }
    if (crossing.empty()) continue;
    if (crossing.size() == 2) {
      Vec3 target;
      int count = 0;
      for (int c : face.corners) {
        if (inside(c)) {
          target += corner_pos(c);
          ++count;
        }
      }
      target *= 1.0 / count;
      link(oriented(crossing[0], crossing[1], face.normal, target));
      continue;
    }
    // Four crossings: cut off each inside corner separately.
    for (int i = 0; i < 4; ++i) {
      const int c = face.corners[i];
      if (!inside(c)) continue;
      const int prev = face.corners[(i + 3) % 4];
      const int nxt = face.corners[(i + 1) % 4];
      link(oriented(edge_between(prev, c), edge_between(c, nxt), face.normal, corner_pos(c)));
    }
  }

  EdgeTriangles tris;
  std::array<bool, 12> visited{};
  for (int start = 0; start < 12; ++start) {
    if (next[start] == -1 || visited[start]) continue;
    std::vector<int> loop;
    for (int e = start; !visited[e]; e = next[e]) {
      if (next[e] == -1) throw Error("marching cubes: open contour");
      visited[e] = true;
      loop.push_back(e);
    }
    for (std::size_t k = 1; k + 1 < loop.size(); ++k) {
      tris.push_back({static_cast<std::uint8_t>(loop[0]), static_cast<std::uint8_t>(loop[k]),
                      static_cast<std::uint8_t>(loop[k + 1])});
    }
  }
  return tris;
}

std::array<EdgeTriangles, 256> build_table() {
  std::array<EdgeTriangles, 256> table;
  for (int c = 0; c < 256; ++c) table[c] = triangulate_case(c);
  return table;
}

}  // namespace

const std::array<EdgeTriangles, 256>& marching_cubes_table() {
  static const std::array<EdgeTriangles, 256> table = build_table();
  return table;
}

TriMesh marching_cubes(const SdfGrid& grid, double iso) {
  const auto [nx, ny, nz] = grid.dims;
  TriMesh mesh;
  if (nx < 2 || ny < 2 || nz < 2) return mesh;
  const auto& table = marching_cubes_table();
  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> edge_vertex(grid.size() * 3, kNone);
  const std::array<std::size_t, 3> stride{1, nx, nx * ny};

  auto vertex_on = [&](std::size_t p0, int axis) {
    std::uint32_t& slot = edge_vertex[p0 * 3 + static_cast<std::size_t>(axis)];
    if (slot != kNone) return slot;
    const std::size_t p1 = p0 + stride[axis];
    const double f0 = grid.values[p0];
    const double f1 = grid.values[p1];
    const double t = (iso - f0) / (f1 - f0);
    const std::size_t x = p0 % nx;
    const std::size_t y = (p0 / nx) % ny;
    const std::size_t z = p0 / (nx * ny);
    Vec3 pos = grid.position(x, y, z);
    pos[axis] += t * grid.spacing;
    slot = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.push_back(pos);
    return slot;
  };

  for (std::size_t z = 0; z + 1 < nz; ++z) {
    for (std::size_t y = 0; y + 1 < ny; ++y) {
      for (std::size_t x = 0; x + 1 < nx; ++x) {
        const std::size_t base = grid.index(x, y, z);
        int cube_case = 0;
        std::array<std::size_t, 8> corner_index{};
        for (int c = 0; c < 8; ++c) {
          corner_index[c] = base + (c & 1) * stride[0] + ((c >> 1) & 1) * stride[1] +
                            ((c >> 2) & 1) * stride[2];
          if (grid.values[corner_index[c]] > iso) cube_case |= 1 << c;
        }
        if (cube_case == 0 || cube_case == 255) continue;
        for (const auto& tri : table[cube_case]) {
          Triangle out{};
          for (int k = 0; k < 3; ++k) {
            const int e = tri[k];
            const int axis = e / 4;
            out[k] = vertex_on(corner_index[kCubeEdges[e][0]], axis);
          }
          mesh.triangles.push_back(out);
        }
      }
    }
  }
  if (!grid.positive_inside) {
    // Negative-inside fields: value > iso is the outside, so flip to keep
    // normals pointing out of the solid.
    for (auto& t : mesh.triangles) std::swap(t[1], t[2]);
  }
  return mesh;
}

TriMesh laplace_smooth(const TriMesh& mesh, int iterations, double lambda) {
  if (iterations < 0) throw Error("laplace_smooth: iterations must be non-negative");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw Error("laplace_smooth: lambda must be in (0, 1]");
  TriMesh out = mesh;
  if (iterations == 0) return out;

  std::vector<std::vector<std::uint32_t>> neighbours(mesh.vertices.size());
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      neighbours[t[k]].push_back(t[(k + 1) % 3]);
      neighbours[t[k]].push_back(t[(k + 2) % 3]);
    }
  }
  for (auto& n : neighbours) {
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }

  std::vector<Vec3> next(out.vertices.size());
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t v = 0; v < out.vertices.size(); ++v) {
      const auto& nb = neighbours[v];
      if (nb.empty()) {
        next[v] = out.vertices[v];
        continue;
      }
      Vec3 centroid;
      for (auto u : nb) centroid += out.vertices[u];
      centroid *= 1.0 / static_cast<double>(nb.size());
      next[v] = out.vertices[v] + (centroid - out.vertices[v]) * lambda;
    }
    out.vertices.swap(next);
  }
  return out;
}

TriMesh extract_surface(const SdfGrid& grid, const IsoSurfaceConfig& config) {
  TriMesh mesh = marching_cubes(grid, config.iso_value);
  if (config.smoothing_iterations > 0 && !mesh.triangles.empty()) {
    mesh = laplace_smooth(mesh, config.smoothing_iterations, config.smoothing_lambda);
  }
  return mesh;
}

double surface_area(const TriMesh& mesh) {
  double area = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto [a, b, c] = mesh.corners(t);
    area += 0.5 * norm(cross(b - a, c - a));
  }
  return area;
}

long euler_characteristic(const TriMesh& mesh) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  edges.reserve(mesh.triangles.size() * 3);
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const auto a = t[k];
      const auto b = t[(k + 1) % 3];
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  std::sort(edges.begin(), edges.end());
  const auto unique_edges = std::unique(edges.begin(), edges.end()) - edges.begin();
  return static_cast<long>(mesh.vertices.size()) - static_cast<long>(unique_edges) +
         static_cast<long>(mesh.triangles.size());
}

bool is_closed_manifold(const TriMesh& mesh) {
  if (mesh.triangles.empty()) return false;
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      if (++directed[{t[k], t[(k + 1) % 3]}] > 1) return false;
    }
  }
  for (const auto& [edge, count] : directed) {
    if (!directed.contains({edge.second, edge.first})) return false;
  }
  // Every vertex's incident triangles must form a single fan.
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> fans(mesh.vertices.size());
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) fans[t[k]].emplace_back(t[(k + 1) % 3], t[(k + 2) % 3]);
  }
  for (const auto& fan : fans) {
    if (fan.empty()) continue;
    std::map<std::uint32_t, std::uint32_t> succ(fan.begin(), fan.end());
    std::size_t steps = 0;
    std::uint32_t cur = fan.front().first;
    do {
      auto it = succ.find(cur);
      if (it == succ.end()) return false;
      cur = it->second;
      ++steps;
    } while (cur != fan.front().first && steps <= fan.size());
    if (steps != fan.size()) return false;
  }
  return true;
}

}  // namespace sdfgen
