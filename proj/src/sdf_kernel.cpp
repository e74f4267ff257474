#include "sdfgen/sdf_kernel.hpp"

#include <algorithm>
#include <numbers>

#include "sdfgen/parallel.hpp"

namespace sdfgen {

double solid_angle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Van Oosterom & Strackee: tan(omega / 2) = det / denominator.
  const Vec3 ra = a - p;
  const Vec3 rb = b - p;
  const Vec3 rc = c - p;
  const double la = norm(ra);
  const double lb = norm(rb);
  const double lc = norm(rc);
  const double det = dot(ra, cross(rb, rc));
  const double denom = la * lb * lc + dot(ra, rb) * lc + dot(ra, rc) * lb + dot(rb, rc) * la;
  return 2.0 * std::atan2(det, denom);
}

double winding_number(const TriMesh& mesh, const Vec3& p) {
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto [a, b, c] = mesh.corners(t);
    total += solid_angle(p, a, b, c);
  }
  return total / (4.0 * std::numbers::pi);
}

SdfGrid mesh_to_sdf(const TriMesh& mesh, std::size_t resolution, const SdfOptions& options) {
  if (resolution < 8) throw Error("mesh_to_sdf: resolution must be at least 8");
  if (mesh.triangles.empty()) throw Error("mesh_to_sdf: mesh has no triangles");

  const AabbTree tree(mesh, options.leaf_capacity);
  SdfGrid grid = SdfGrid::canonical(resolution);
  const std::size_t n = resolution;
  const std::size_t plane = n * n;
  // One z-slab per task; each grid value depends only on its own position.
  parallel_for(n, options.threads, [&](std::size_t z) {
    for (std::size_t i = z * plane; i < (z + 1) * plane; ++i) {
      const std::size_t x = i % n;
      const std::size_t y = (i / n) % n;
      const Vec3 p = grid.position(x, y, z);
      const double d = tree.unsigned_distance(p);
      if (d == 0.0) {
        grid.values[i] = 0.0;
        continue;
      }
      const double w = winding_number(tree.mesh(), p);
      grid.values[i] = w > options.threshold ? d : -d;
    }
  });
  return grid;
}

namespace {

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  // Nearest-rank quantile.
  auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  k = std::clamp<std::size_t>(k, 1, v.size()) - 1;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

}  // namespace

EikonalStats eikonal_residual(const SdfGrid& grid) {
  const auto [nx, ny, nz] = grid.dims;
  if (nx < 3 || ny < 3 || nz < 3) throw Error("eikonal_residual: need at least 3 samples per axis");
  const double inv2h = 1.0 / (2.0 * grid.spacing);

  std::vector<Vec3> grad(grid.size());
  std::vector<char> interior(grid.size(), 0);
  for (std::size_t z = 1; z + 1 < nz; ++z) {
    for (std::size_t y = 1; y + 1 < ny; ++y) {
      for (std::size_t x = 1; x + 1 < nx; ++x) {
        const std::size_t i = grid.index(x, y, z);
        interior[i] = 1;
        grad[i] = {(grid.at(x + 1, y, z) - grid.at(x - 1, y, z)) * inv2h,
                   (grid.at(x, y + 1, z) - grid.at(x, y - 1, z)) * inv2h,
                   (grid.at(x, y, z + 1) - grid.at(x, y, z - 1)) * inv2h};
      }
    }
  }

  // Flip detection between interior axis neighbours.
  std::vector<char> flip(grid.size(), 0);
  const std::array<std::size_t, 3> stride{1, nx, nx * ny};
  for (std::size_t z = 1; z + 1 < nz; ++z) {
    for (std::size_t y = 1; y + 1 < ny; ++y) {
      for (std::size_t x = 1; x + 1 < nx; ++x) {
        const std::size_t i = grid.index(x, y, z);
        const std::array<std::size_t, 3> coord{x, y, z};
        for (int a = 0; a < 3; ++a) {
          if (coord[a] + 2 >= grid.dims[a]) continue;
          const std::size_t j = i + stride[a];
          if (dot(grad[i], grad[j]) < 0.0) flip[i] = flip[j] = 1;
        }
      }
    }
  }

  // Dilate flips by a Euclidean radius of two lattice steps.
  std::vector<char> excluded(grid.size(), 0);
  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t y = 0; y < ny; ++y) {
      for (std::size_t x = 0; x < nx; ++x) {
        if (!flip[grid.index(x, y, z)]) continue;
        for (int dz = -2; dz <= 2; ++dz) {
          for (int dy = -2; dy <= 2; ++dy) {
            for (int dx = -2; dx <= 2; ++dx) {
              if (dx * dx + dy * dy + dz * dz > 4) continue;
              const long qx = long(x) + dx, qy = long(y) + dy, qz = long(z) + dz;
              if (qx < 0 || qy < 0 || qz < 0 || qx >= long(nx) || qy >= long(ny) || qz >= long(nz)) {
                continue;
              }
              excluded[grid.index(std::size_t(qx), std::size_t(qy), std::size_t(qz))] = 1;
            }
          }
        }
      }
    }
  }

  EikonalStats stats;
  std::vector<double> residuals;
  residuals.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!interior[i]) continue;
    if (excluded[i]) {
      ++stats.excluded;
      continue;
    }
    residuals.push_back(std::abs(norm(grad[i]) - 1.0));
  }
  stats.evaluated = residuals.size();
  if (residuals.empty()) return stats;
  double sum = 0.0;
  for (double r : residuals) {
    sum += r;
    stats.max = std::max(stats.max, r);
  }
  stats.mean = sum / static_cast<double>(residuals.size());
  stats.median = quantile(residuals, 0.5);
  stats.p95 = quantile(std::move(residuals), 0.95);
  return stats;
}

LipschitzReport lipschitz_check(const SdfGrid& grid, double tolerance) {
  LipschitzReport report;
  const auto [nx, ny, nz] = grid.dims;
  const double h = grid.spacing;
  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t y = 0; y < ny; ++y) {
      for (std::size_t x = 0; x < nx; ++x) {
        const double f = grid.at(x, y, z);
        const std::array<bool, 3> has{x + 1 < nx, y + 1 < ny, z + 1 < nz};
        for (int a = 0; a < 3; ++a) {
          if (!has[a]) continue;
          const double g = a == 0 ? grid.at(x + 1, y, z) : a == 1 ? grid.at(x, y + 1, z) : grid.at(x, y, z + 1);
          const double diff = std::abs(f - g);
          report.max_ratio = std::max(report.max_ratio, diff / h);
          if (diff > h + tolerance) ++report.violations;
          ++report.pairs;
        }
      }
    }
  }
  return report;
}

}  // namespace sdfgen
