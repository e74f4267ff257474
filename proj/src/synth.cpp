#include "sdfgen/synth.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include "sdfgen/sdf_grid.hpp"

namespace sdfgen {

TriMesh make_box(const Vec3& lo, const Vec3& hi) {
  if (!(lo.x < hi.x && lo.y < hi.y && lo.z < hi.z)) throw Error("make_box: lo must be below hi on every axis");
  TriMesh m;
  for (int i = 0; i < 8; ++i) {
    m.vertices.push_back({(i & 1) ? hi.x : lo.x, (i & 2) ? hi.y : lo.y, (i & 4) ? hi.z : lo.z});
  }
  // Quads wound counter-clockwise seen from outside.
  const std::uint32_t quads[6][4] = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4},
                                     {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
  for (const auto& q : quads) {
    m.triangles.push_back({q[0], q[1], q[2]});
    m.triangles.push_back({q[0], q[2], q[3]});
  }
  return m;
}

TriMesh make_cylinder(const Vec3& center, double radius, double half_height, int segments) {
  if (!(radius > 0.0) || !(half_height > 0.0)) throw Error("make_cylinder: radius and height must be positive");
  if (segments < 3) throw Error("make_cylinder: need at least 3 segments");
  const auto n = static_cast<std::uint32_t>(segments);
  TriMesh m;
  for (int ring = 0; ring < 2; ++ring) {
    const double y = center.y + (ring == 0 ? -half_height : half_height);
    for (std::uint32_t i = 0; i < n; ++i) {
      const double a = 2.0 * std::numbers::pi * i / n;
      m.vertices.push_back({center.x + radius * std::cos(a), y, center.z + radius * std::sin(a)});
    }
  }
  const std::uint32_t bottom = 2 * n;
  const std::uint32_t top = 2 * n + 1;
  m.vertices.push_back({center.x, center.y - half_height, center.z});
  m.vertices.push_back({center.x, center.y + half_height, center.z});
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t j = (i + 1) % n;
    m.triangles.push_back({i, n + i, n + j});
    m.triangles.push_back({i, n + j, j});
    m.triangles.push_back({bottom, i, j});
    m.triangles.push_back({top, n + j, n + i});
  }
  return m;
}

TriMesh make_icosphere(double radius, int subdivisions, const Vec3& center) {
  if (!(radius > 0.0) || subdivisions < 0) throw Error("make_icosphere: bad radius or subdivision count");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p = p * (1.0 / norm(p));
  std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      const Vec3 p = (v[a] + v[b]) * 0.5;
      v.push_back(p * (1.0 / norm(p)));
      const auto id = static_cast<std::uint32_t>(v.size() - 1);
      mid.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(f.size() * 4);
    for (const auto& [a, b, c] : f) {
      const auto ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
      next.push_back({a, ab, ca});
      next.push_back({b, bc, ab});
      next.push_back({c, ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  TriMesh m;
  for (const auto& p : v) m.vertices.push_back(center + p * radius);
  for (auto tri : f) {
    const Vec3 a = v[tri[0]], b = v[tri[1]], c = v[tri[2]];
    if (dot(cross(b - a, c - a), a + b + c) < 0.0) std::swap(tri[1], tri[2]);
    m.triangles.push_back(tri);
  }
  return m;
}

TriMesh merge_meshes(const std::vector<TriMesh>& parts) {
  TriMesh out;
  for (const auto& part : parts) {
    const auto base = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), part.vertices.begin(), part.vertices.end());
    for (const auto& [a, b, c] : part.triangles) out.triangles.push_back({a + base, b + base, c + base});
  }
  return out;
}

SynthFamily synth_family_from_string(const std::string& s) {
  if (s == "boxes") return SynthFamily::boxes;
  if (s == "cylinders") return SynthFamily::cylinders;
  if (s == "chairs" || s == "chair") return SynthFamily::chairs;
  throw Error("unknown synth family '" + s + "' (expected boxes, cylinders or chairs)");
}

std::string to_string(SynthFamily f) {
  switch (f) {
    case SynthFamily::boxes: return "boxes";
    case SynthFamily::cylinders: return "cylinders";
    case SynthFamily::chairs: return "chairs";
  }
  return "?";
}

void SynthSpec::validate() const {
  if (count < 1) throw Error("synth: count must be at least 1");
  if (resolution < 8) throw Error("synth: resolution must be at least 8");
  for (const Range& r : {chair.seat_width, chair.seat_depth, chair.seat_thickness, chair.seat_height,
                         chair.leg_thickness, chair.back_height, chair.back_thickness}) {
    if (!(r.lo > 0.0 && r.lo <= r.hi)) throw Error("synth: chair ranges must satisfy 0 < lo <= hi");
  }
  if (chair.seat_width.hi > 0.9 || chair.seat_depth.hi > 0.9) throw Error("synth: seat exceeds the domain");
  if (2 * chair.leg_thickness.hi > chair.seat_width.lo || 2 * chair.leg_thickness.hi > chair.seat_depth.lo) {
    throw Error("synth: legs wider than half the seat");
  }
  if (chair.back_thickness.hi > chair.seat_depth.lo) throw Error("synth: back thicker than the seat depth");
  if (chair.seat_height.hi + chair.seat_thickness.hi >= 0.9) throw Error("synth: seat exceeds the domain");
}

namespace {

constexpr double kHalf = 0.45;  // shapes stay inside [-0.45, 0.45]^3

nlohmann::json vec_json(const Vec3& v) { return {v.x, v.y, v.z}; }

SynthShape make_boxes_sample(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> size(0.3, 0.9);
  const Vec3 ext{size(rng), size(rng), size(rng)};
  Vec3 c;
  for (int a = 0; a < 3; ++a) {
    const double slack = kHalf - ext[a] / 2;
    c[a] = std::uniform_real_distribution<double>(-slack, slack)(rng);
  }
  SynthShape s;
  s.mesh = make_box(c - ext * 0.5, c + ext * 0.5);
  s.params = {{"center", vec_json(c)}, {"extent", vec_json(ext)}};
  s.probe = c;
  return s;
}

SynthShape make_cylinder_sample(std::mt19937_64& rng) {
  const double r = std::uniform_real_distribution<double>(0.15, 0.4)(rng);
  const double hh = std::uniform_real_distribution<double>(0.15, 0.45)(rng);
  const double sx = kHalf - r, sy = kHalf - hh;
  const Vec3 c{std::uniform_real_distribution<double>(-sx, sx)(rng), std::uniform_real_distribution<double>(-sy, sy)(rng),
               std::uniform_real_distribution<double>(-sx, sx)(rng)};
  SynthShape s;
  s.mesh = make_cylinder(c, r, hh);
  s.params = {{"center", vec_json(c)}, {"radius", r}, {"half_height", hh}};
  s.probe = c;
  return s;
}

SynthShape make_chair_sample(const ChairRanges& ranges, std::mt19937_64& rng) {
  auto draw = [&](const Range& r) { return std::uniform_real_distribution<double>(r.lo, r.hi)(rng); };
  const double w = draw(ranges.seat_width);
  const double d = draw(ranges.seat_depth);
  const double st = draw(ranges.seat_thickness);
  const double sh = draw(ranges.seat_height);
  const double lt = draw(ranges.leg_thickness);
  const double bt = draw(ranges.back_thickness);
  const double bh = std::min(draw(ranges.back_height), 2 * kHalf - sh - st);

  const double floor = -kHalf;
  const double seat_lo = floor + sh;
  const double seat_hi = seat_lo + st;
  std::vector<TriMesh> parts;
  parts.push_back(make_box({-w / 2, seat_lo, -d / 2}, {w / 2, seat_hi, d / 2}));
  for (int sx : {-1, 1}) {
    for (int sz : {-1, 1}) {
      const double x0 = sx < 0 ? -w / 2 : w / 2 - lt;
      const double z0 = sz < 0 ? -d / 2 : d / 2 - lt;
      parts.push_back(make_box({x0, floor, z0}, {x0 + lt, seat_lo, z0 + lt}));
    }
  }
  parts.push_back(make_box({-w / 2, seat_hi, -d / 2}, {w / 2, seat_hi + bh, -d / 2 + bt}));

  SynthShape s;
  s.mesh = merge_meshes(parts);
  s.probe = {0.0, (seat_lo + seat_hi) / 2, 0.0};
  s.params = {{"seat_width", w},     {"seat_depth", d},    {"seat_thickness", st}, {"seat_height", sh},
              {"leg_thickness", lt}, {"back_height", bh}, {"back_thickness", bt}};
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace

std::vector<SynthShape> synth_shapes(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::vector<SynthShape> out;
  for (std::size_t i = 0; i < spec.count; ++i) {
    SynthShape s;
    switch (spec.family) {
      case SynthFamily::boxes: s = make_boxes_sample(rng); break;
      case SynthFamily::cylinders: s = make_cylinder_sample(rng); break;
      case SynthFamily::chairs: s = make_chair_sample(spec.chair, rng); break;
    }
    char name[32];
    std::snprintf(name, sizeof name, "%s_%04zu", to_string(spec.family).c_str(), i);
    s.name = name;
    s.params["probe"] = vec_json(s.probe);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<nlohmann::json> synth_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir,
                                          const SdfOptions& options) {
  const auto shapes = synth_shapes(spec);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw Error("cannot create output directory " + out_dir.string());
  }
  std::vector<nlohmann::json> manifest;
  std::string lines;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& s = shapes[i];
    const std::string obj = s.name + ".obj";
    const std::string sdf = s.name + ".sdf";
    save_mesh(s.mesh, out_dir / obj);
    const SdfGrid grid = mesh_to_sdf(s.mesh, spec.resolution, options);
    write_sdf(grid, out_dir / sdf);
    const nlohmann::json sidecar = {{"source", obj},
                                    {"resolution", spec.resolution},
                                    {"threshold", options.threshold},
                                    {"tool_version", SDFGEN_VERSION},
                                    {"family", to_string(spec.family)},
                                    {"params", s.params}};
    write_text(sidecar_path(out_dir / sdf), sidecar.dump(2) + "\n");
    nlohmann::json record = {{"index", i},  {"name", s.name},     {"family", to_string(spec.family)},
                             {"mesh", obj}, {"sdf", sdf},         {"resolution", spec.resolution},
                             {"seed", spec.seed}, {"params", s.params}};
    lines += record.dump() + "\n";
    manifest.push_back(std::move(record));
  }
  write_text(out_dir / "manifest.jsonl", lines);
  return manifest;
}

}  // namespace sdfgen
