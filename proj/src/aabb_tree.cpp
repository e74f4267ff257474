#include "sdfgen/aabb_tree.hpp"

#include <algorithm>
#include <numeric>

namespace sdfgen {

ClosestPoint point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  if (squared_norm(cross(ab, ac)) == 0.0) throw Error("point_triangle_distance: degenerate triangle");

  auto result = [&](const Vec3& q) { return ClosestPoint{norm(p - q), q}; };

  const Vec3 ap = p - a;
  const double d1 = dot(ab, ap);
  const double d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) return result(a);

  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp);
  const double d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return result(b);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return result(a + ab * v);
  }

  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp);
  const double d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return result(c);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return result(a + ac * w);
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return result(b + (c - b) * w);
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return result(a + ab * v + ac * w);
}

AabbTree::AabbTree(const TriMesh& mesh, std::uint32_t leaf_capacity)
    : mesh_(mesh), leaf_capacity_(std::max<std::uint32_t>(1, leaf_capacity)) {
  if (mesh_.triangles.empty()) throw Error("AabbTree: mesh has no triangles");
  mesh_.validate();

  const auto n = static_cast<std::uint32_t>(mesh_.triangles.size());
  std::vector<Vec3> centroids(n);
  tri_boxes_.resize(n);
  for (std::uint32_t t = 0; t < n; ++t) {
    const auto [a, b, c] = mesh_.corners(t);
    centroids[t] = (a + b + c) * (1.0 / 3.0);
    tri_boxes_[t].expand(a);
    tri_boxes_[t].expand(b);
    tri_boxes_[t].expand(c);
  }
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0U);
  nodes_.reserve(2 * (n / leaf_capacity_ + 1));
  build(0, n, centroids);
}

std::uint32_t AabbTree::build(std::uint32_t begin, std::uint32_t end,
                              const std::vector<Vec3>& centroids) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Box3 box;
  Box3 centroid_box;
  for (std::uint32_t i = begin; i < end; ++i) {
    box.expand(tri_boxes_[order_[i]]);
    centroid_box.expand(centroids[order_[i]]);
  }
  nodes_[index].box = box;

  if (end - begin <= leaf_capacity_) {
    nodes_[index].begin = begin;
    nodes_[index].count = end - begin;
    return index;
  }

  const Vec3 ext = centroid_box.extent();
  int axis = 0;
  if (ext.y > ext[axis]) axis = 1;
  if (ext.z > ext[axis]) axis = 2;

  const std::uint32_t mid = begin + (end - begin) / 2;
  // Ties broken by triangle index so the split is a total order.
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t l, std::uint32_t r) {
                     const double cl = centroids[l][axis];
                     const double cr = centroids[r][axis];
                     return cl < cr || (cl == cr && l < r);
                   });
  const std::uint32_t left = build(begin, mid, centroids);
  const std::uint32_t right = build(mid, end, centroids);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

MeshHit AabbTree::closest(const Vec3& p) const {
  MeshHit best{HUGE_VAL, {}, 0};
  double best2 = HUGE_VAL;
  // Explicit stack; depth is logarithmic in triangle count.
  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.box.squared_distance(p) > best2) continue;
    if (node.is_leaf()) {
      for (std::uint32_t i = node.begin; i < node.begin + node.count; ++i) {
        const std::uint32_t t = order_[i];
        if (tri_boxes_[t].squared_distance(p) > best2) continue;
        const auto [a, b, c] = mesh_.corners(t);
        const ClosestPoint cp = point_triangle_distance(p, a, b, c);
        // Lowest triangle index wins ties, matching the brute-force scan.
        if (cp.distance < best.distance || (cp.distance == best.distance && t < best.triangle)) {
          best = {cp.distance, cp.point, t};
          best2 = cp.distance * cp.distance;
        }
      }
      continue;
    }
    const double dl = nodes_[node.left].box.squared_distance(p);
    const double dr = nodes_[node.right].box.squared_distance(p);
    // Push the farther child first so the nearer one is explored first.
    if (dl <= dr) {
      stack[top++] = node.right;
      stack[top++] = node.left;
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  return best;
}

MeshHit brute_force_closest(const TriMesh& mesh, const Vec3& p) {
  MeshHit best{HUGE_VAL, {}, 0};
  for (std::uint32_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto [a, b, c] = mesh.corners(t);
    const ClosestPoint cp = point_triangle_distance(p, a, b, c);
    if (cp.distance < best.distance) best = {cp.distance, cp.point, t};
  }
  return best;
}

}  // namespace sdfgen
