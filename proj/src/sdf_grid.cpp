#include "sdfgen/sdf_grid.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace sdfgen {

namespace {

constexpr std::array<std::byte, 4> kMagic{std::byte{0x53}, std::byte{0x44}, std::byte{0x46},
                                          std::byte{0x31}};
constexpr std::size_t kHeaderBytes = 36;

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::byte>((v >> (8 * b)) & 0xFF));
}

void put_f32(std::vector<std::byte>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

std::uint32_t get_u32(std::span<const std::byte> in, std::size_t off) {
  std::uint32_t v = 0;
  for (int b = 3; b >= 0; --b) v = (v << 8) | std::to_integer<std::uint32_t>(in[off + b]);
  return v;
}

double get_f32(std::span<const std::byte> in, std::size_t off) {
  return static_cast<double>(std::bit_cast<float>(get_u32(in, off)));
}

}  // namespace

SdfGrid SdfGrid::canonical(std::size_t n, double fill) {
  if (n < 2) throw Error("canonical grid needs at least 2 samples per axis");
  return SdfGrid({n, n, n}, {-0.5, -0.5, -0.5}, 1.0 / static_cast<double>(n - 1), fill);
}

double SdfGrid::trilinear(const Vec3& p) const {
  std::array<std::size_t, 3> i0{};
  std::array<double, 3> t{};
  for (int a = 0; a < 3; ++a) {
    const double u = (p[a] - origin[a]) / spacing;
    const double maxu = static_cast<double>(dims[a] - 1);
    const double clamped = std::clamp(u, 0.0, maxu);
    auto cell = static_cast<std::size_t>(std::floor(clamped));
    if (cell + 1 >= dims[a]) cell = dims[a] >= 2 ? dims[a] - 2 : 0;
    i0[a] = cell;
    t[a] = clamped - static_cast<double>(cell);
  }
  double acc = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    const int bx = corner & 1;
    const int by = (corner >> 1) & 1;
    const int bz = (corner >> 2) & 1;
    const double w = (bx ? t[0] : 1.0 - t[0]) * (by ? t[1] : 1.0 - t[1]) * (bz ? t[2] : 1.0 - t[2]);
    if (w == 0.0) continue;
    acc += w * at(i0[0] + bx, i0[1] + by, i0[2] + bz);
  }
  return acc;
}

std::vector<std::byte> encode_sdf1(const SdfGrid& grid) {
  if (grid.values.size() != grid.dims[0] * grid.dims[1] * grid.dims[2]) {
    throw Error("SdfGrid value count does not match dims");
  }
  std::vector<std::byte> out;
  out.reserve(kHeaderBytes + grid.values.size() * 4);
  for (auto b : kMagic) out.push_back(b);
  for (auto d : grid.dims) put_u32(out, static_cast<std::uint32_t>(d));
  put_f32(out, grid.origin.x);
  put_f32(out, grid.origin.y);
  put_f32(out, grid.origin.z);
  put_f32(out, grid.spacing);
  out.push_back(std::byte{static_cast<unsigned char>(grid.positive_inside ? 1 : 0)});
  out.insert(out.end(), 3, std::byte{0});
  for (double v : grid.values) put_f32(out, v);
  return out;
}

SdfGrid decode_sdf1(std::span<const std::byte> bytes) {
  if (bytes.size() < kHeaderBytes) throw Error("SDF1: file shorter than header");
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) throw Error("SDF1: bad magic");
  SdfGrid g;
  for (int a = 0; a < 3; ++a) g.dims[a] = get_u32(bytes, 4 + 4 * a);
  g.origin = {get_f32(bytes, 16), get_f32(bytes, 20), get_f32(bytes, 24)};
  g.spacing = get_f32(bytes, 28);
  const auto sign = std::to_integer<unsigned>(bytes[32]);
  if (sign > 1) throw Error("SDF1: invalid sign-convention byte");
  g.positive_inside = sign == 1;
  for (int r = 33; r < 36; ++r) {
    if (bytes[r] != std::byte{0}) throw Error("SDF1: reserved bytes must be zero");
  }
  if (g.dims[0] == 0 || g.dims[1] == 0 || g.dims[2] == 0) throw Error("SDF1: zero dimension");
  if (!(g.spacing > 0.0)) throw Error("SDF1: spacing must be positive");
  const std::size_t count = g.dims[0] * g.dims[1] * g.dims[2];
  if (bytes.size() != kHeaderBytes + count * 4) {
    throw Error("SDF1: expected " + std::to_string(kHeaderBytes + count * 4) + " bytes, found " +
                std::to_string(bytes.size()));
  }
  g.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    g.values[i] = get_f32(bytes, kHeaderBytes + 4 * i);
    if (!std::isfinite(g.values[i])) throw Error("SDF1: non-finite value at index " + std::to_string(i));
  }
  return g;
}

void write_sdf(const SdfGrid& grid, const std::filesystem::path& path) {
  const auto bytes = encode_sdf1(grid);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write SDF file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing SDF file: " + path.string());
}

SdfGrid read_sdf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open SDF file: " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_sdf1(std::as_bytes(std::span(raw.data(), raw.size())));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& sdf_path) {
  auto p = sdf_path;
  p.replace_extension(".json");
  return p;
}

}  // namespace sdfgen
