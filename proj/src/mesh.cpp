#include "sdfgen/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sdfgen {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open mesh file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_degenerate(const Triangle& t) { return t[0] == t[1] || t[1] == t[2] || t[0] == t[2]; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

[[noreturn]] void obj_error(std::size_t line, const std::string& what) {
  throw Error("malformed OBJ record at line " + std::to_string(line) + ": " + what);
}

double parse_double(std::string_view tok, std::size_t line) {
  // strtod handles every OBJ float spelling; from_chars for double is not
  // available on all supported toolchains.
  std::string buf(tok);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size()) obj_error(line, "bad number '" + buf + "'");
  if (!std::isfinite(v)) obj_error(line, "non-finite coordinate");
  return v;
}

long parse_index(std::string_view tok, std::size_t line) {
  // Face tokens may be "i", "i/t", "i//n" or "i/t/n"; only the position index matters.
  const auto slash = tok.find('/');
  const auto head = tok.substr(0, slash);
  long v = 0;
  auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), v);
  if (ec != std::errc() || ptr != head.data() + head.size() || v == 0) {
    obj_error(line, "bad face index '" + std::string(tok) + "'");
  }
  return v;
}

void finish(LoadedMesh& out) {
  if (out.mesh.triangles.empty()) throw Error("mesh has zero usable triangles");
}

}  // namespace

Box3 TriMesh::bounds() const {
  Box3 b;
  for (const auto& v : vertices) b.expand(v);
  return b;
}

void TriMesh::validate() const {
  for (const auto& v : vertices) {
    if (!is_finite(v)) throw Error("mesh has a non-finite vertex coordinate");
  }
  for (const auto& t : triangles) {
    for (auto i : t) {
      if (i >= vertices.size()) throw Error("triangle index out of range");
    }
    if (is_degenerate(t)) throw Error("mesh contains a degenerate triangle");
  }
}

TriMesh TriMesh::flipped() const {
  TriMesh out = *this;
  for (auto& t : out.triangles) std::swap(t[1], t[2]);
  return out;
}

MeshFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".obj") return MeshFormat::obj;
  if (ext == ".stl") return MeshFormat::stl;
  throw Error("unrecognized mesh extension '" + ext + "' (expected .obj or .stl)");
}

LoadedMesh parse_obj(std::string_view text) {
  LoadedMesh out;
  std::size_t line_no = 0;
  std::vector<std::vector<long>> faces;
  std::vector<std::size_t> face_lines;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const auto toks = split_ws(line);
    if (toks[0] == "v") {
      if (toks.size() < 4) obj_error(line_no, "vertex needs 3 coordinates");
      out.mesh.vertices.push_back({parse_double(toks[1], line_no), parse_double(toks[2], line_no),
                                   parse_double(toks[3], line_no)});
    } else if (toks[0] == "f") {
      if (toks.size() < 4) obj_error(line_no, "face needs at least 3 vertices");
      std::vector<long> idx;
      for (std::size_t k = 1; k < toks.size(); ++k) idx.push_back(parse_index(toks[k], line_no));
      faces.push_back(std::move(idx));
      face_lines.push_back(line_no);
    }
    // Other record types (vn, vt, o, g, usemtl, s, ...) are ignored.
  }

  const long nv = static_cast<long>(out.mesh.vertices.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    std::vector<std::uint32_t> idx;
    for (long i : faces[f]) {
      const long resolved = i > 0 ? i - 1 : nv + i;  // negative indices are relative
      if (resolved < 0 || resolved >= nv) obj_error(face_lines[f], "face index out of range");
      idx.push_back(static_cast<std::uint32_t>(resolved));
    }
    for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
      Triangle t{idx[0], idx[k], idx[k + 1]};
      if (is_degenerate(t)) {
        ++out.degenerate_dropped;
      } else {
        out.mesh.triangles.push_back(t);
      }
    }
  }
  finish(out);
  return out;
}

LoadedMesh parse_stl(std::span<const std::byte> bytes) {
  constexpr std::size_t kHeader = 84;
  constexpr std::size_t kRecord = 50;
  if (bytes.size() < kHeader) throw Error("malformed STL: file shorter than 84-byte header");
  auto u32_at = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int b = 3; b >= 0; --b) v = (v << 8) | std::to_integer<std::uint32_t>(bytes[off + b]);
    return v;
  };
  auto f32_at = [&](std::size_t off) {
    const std::uint32_t bits = u32_at(off);
    float f;
    std::memcpy(&f, &bits, sizeof f);
    return static_cast<double>(f);
  };
  const std::uint32_t count = u32_at(80);
  if (bytes.size() < kHeader + static_cast<std::size_t>(count) * kRecord) {
    throw Error("malformed STL: truncated at byte offset " + std::to_string(bytes.size()) +
                ", expected " + std::to_string(kHeader + std::size_t{count} * kRecord));
  }

  // STL stores unshared corners; weld exactly-equal coordinates.
  LoadedMesh out;
  std::vector<std::pair<std::array<double, 3>, std::uint32_t>> keyed;
  keyed.reserve(std::size_t{count} * 3);
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::size_t base = kHeader + std::size_t{r} * kRecord + 12;  // skip normal
    for (int c = 0; c < 3; ++c) {
      const std::size_t off = base + static_cast<std::size_t>(c) * 12;
      std::array<double, 3> p{f32_at(off), f32_at(off + 4), f32_at(off + 8)};
      if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) {
        throw Error("malformed STL: non-finite coordinate at byte offset " + std::to_string(off));
      }
      keyed.emplace_back(p, r * 3 + static_cast<std::uint32_t>(c));
    }
  }
  std::vector<std::uint32_t> corner_to_vertex(keyed.size());
  std::sort(keyed.begin(), keyed.end());
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    if (i == 0 || keyed[i].first != keyed[i - 1].first) {
      const auto& p = keyed[i].first;
      out.mesh.vertices.push_back({p[0], p[1], p[2]});
    }
    corner_to_vertex[keyed[i].second] = static_cast<std::uint32_t>(out.mesh.vertices.size() - 1);
  }
  for (std::uint32_t r = 0; r < count; ++r) {
    Triangle t{corner_to_vertex[r * 3], corner_to_vertex[r * 3 + 1], corner_to_vertex[r * 3 + 2]};
    if (is_degenerate(t)) {
      ++out.degenerate_dropped;
    } else {
      out.mesh.triangles.push_back(t);
    }
  }
  finish(out);
  return out;
}

LoadedMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  const std::string data = read_file(path);
  try {
    if (format == MeshFormat::obj) return parse_obj(data);
    return parse_stl(std::as_bytes(std::span(data.data(), data.size())));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

LoadedMesh load_mesh(const std::filesystem::path& path) {
  return load_mesh(path, format_from_path(path));
}

std::string to_obj(const TriMesh& mesh) {
  std::string out;
  out.reserve(mesh.vertices.size() * 40 + mesh.triangles.size() * 24);
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
    out += buf;
  }
  for (const auto& t : mesh.triangles) {
    std::snprintf(buf, sizeof buf, "f %u %u %u\n", t[0] + 1, t[1] + 1, t[2] + 1);
    out += buf;
  }
  return out;
}

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path, MeshFormat format) {
  if (format != MeshFormat::obj) throw Error("only OBJ output is supported");
  if (mesh.triangles.empty()) throw Error("refusing to save a mesh with no triangles");
  mesh.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write mesh file: " + path.string());
  const std::string text = to_obj(mesh);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("failed writing mesh file: " + path.string());
}

TriMesh normalize_mesh(const TriMesh& mesh) {
  if (mesh.vertices.empty()) throw Error("cannot normalize an empty mesh");
  const Box3 box = mesh.bounds();
  const Vec3 ext = box.extent();
  const double longest = std::max({ext.x, ext.y, ext.z});
  if (!(longest > 0.0)) throw Error("cannot normalize: all vertices coincide");

  const Normalization step{box.center(), kCanonicalExtent / longest};
  TriMesh out;
  out.triangles = mesh.triangles;
  out.vertices.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) out.vertices.push_back(step.to_canonical(v));

  if (mesh.normalization) {
    const auto& prev = *mesh.normalization;
    out.normalization = Normalization{prev.center + step.center * (1.0 / prev.scale),
                                      prev.scale * step.scale};
  } else {
    out.normalization = step;
  }
  return out;
}

}  // namespace sdfgen
