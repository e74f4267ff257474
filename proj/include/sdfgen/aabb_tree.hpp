#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sdfgen/mesh.hpp"

namespace sdfgen {

struct ClosestPoint {
  double distance = 0.0;
  Vec3 point;
};

/// Exact closest point on the closed triangle (a, b, c) to p, by Voronoi-region
/// classification. Throws on a zero-area triangle.
ClosestPoint point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct MeshHit {
  double distance = 0.0;
  Vec3 point;
  std::uint32_t triangle = 0;
};

/// Bounding-volume hierarchy over the triangles of one mesh.
///
/// Built by median split on the longest axis of the triangle-centroid box, so
/// the tree depends only on the mesh. Immutable after construction; queries are
/// safe from any number of threads.
class AabbTree {
 public:
  struct Node {
    Box3 box;
    std::uint32_t left = 0;   // child indices, valid when count == 0
    std::uint32_t right = 0;
    std::uint32_t begin = 0;  // range into triangle_order(), valid when count > 0
    std::uint32_t count = 0;

    bool is_leaf() const { return count > 0; }
  };

  static constexpr std::uint32_t kDefaultLeafCapacity = 8;

  AabbTree(const TriMesh& mesh, std::uint32_t leaf_capacity = kDefaultLeafCapacity);

  /// Nearest surface point; exact (pruning never changes the result).
  MeshHit closest(const Vec3& p) const;
  double unsigned_distance(const Vec3& p) const { return closest(p).distance; }

  const TriMesh& mesh() const { return mesh_; }
  std::span<const Node> nodes() const { return nodes_; }
  std::span<const std::uint32_t> triangle_order() const { return order_; }
  std::uint32_t leaf_capacity() const { return leaf_capacity_; }

 private:
  std::uint32_t build(std::uint32_t begin, std::uint32_t end, const std::vector<Vec3>& centroids);

  TriMesh mesh_;
  std::uint32_t leaf_capacity_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
  std::vector<Box3> tri_boxes_;
};

/// Minimum over every triangle, no acceleration. Reference for the tree.
MeshHit brute_force_closest(const TriMesh& mesh, const Vec3& p);

}  // namespace sdfgen
