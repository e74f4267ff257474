#include "sdfgen/spectral.hpp"

#include <bit>
#include <cmath>
#include <numbers>

namespace sdfgen {

namespace {

bool is_pow2(std::size_t n) { return n >= 1 && std::has_single_bit(n); }

void check_dims(std::array<std::size_t, 3> dims) {
  for (auto n : dims) {
    if (!is_pow2(n)) throw Error("spectral: dimensions must be powers of two, got " + std::to_string(n));
  }
}

std::size_t wrap(int k, std::size_t n) {
  const int ni = static_cast<int>(n);
  if (k < -ni / 2 || k >= ni / 2) throw Error("spectral: mode out of range");
  return static_cast<std::size_t>(k < 0 ? k + ni : k);
}

// Transforms every line along `axis` in place.
void transform_axis(std::vector<Complex>& data, std::array<std::size_t, 3> dims, int axis,
                    bool inverse) {
  const std::array<std::size_t, 3> stride{1, dims[0], dims[0] * dims[1]};
  const std::size_t n = dims[axis];
  if (n == 1) return;
  const int a1 = (axis + 1) % 3;
  const int a2 = (axis + 2) % 3;
  std::vector<Complex> line(n);
  for (std::size_t j = 0; j < dims[a2]; ++j) {
    for (std::size_t i = 0; i < dims[a1]; ++i) {
      const std::size_t base = i * stride[a1] + j * stride[a2];
      for (std::size_t k = 0; k < n; ++k) line[k] = data[base + k * stride[axis]];
      fft1(line, inverse);
      for (std::size_t k = 0; k < n; ++k) data[base + k * stride[axis]] = line[k];
    }
  }
}

std::vector<Complex> forward_raw(std::span<const double> values, std::array<std::size_t, 3> dims) {
  check_dims(dims);
  if (values.size() != dims[0] * dims[1] * dims[2]) throw Error("spectral: value count mismatch");
  std::vector<Complex> data(values.begin(), values.end());
  for (int axis = 0; axis < 3; ++axis) transform_axis(data, dims, axis, false);
  return data;
}

}  // namespace

Complex& SpectralField::mode(int kx, int ky, int kz) {
  return coefficients[index(wrap(kx, dims[0]), wrap(ky, dims[1]), wrap(kz, dims[2]))];
}

const Complex& SpectralField::mode(int kx, int ky, int kz) const {
  return coefficients[index(wrap(kx, dims[0]), wrap(ky, dims[1]), wrap(kz, dims[2]))];
}

void fft1(std::vector<Complex>& data, bool inverse) {
  const std::size_t n = data.size();
  if (!is_pow2(n)) throw Error("fft1: length must be a power of two");
  if (n == 1) return;

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }

  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        // Twiddles evaluated directly rather than by recurrence, for accuracy.
        const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) /
                             static_cast<double>(len);
        const Complex w(std::cos(angle), std::sin(angle));
        const Complex u = data[start + k];
        const Complex v = data[start + k + half] * w;
        data[start + k] = u + v;
        data[start + k + half] = u - v;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& c : data) c *= scale;
  }
}

SpectralField fft3(std::span<const double> values, std::array<std::size_t, 3> dims) {
  return SpectralField{dims, forward_raw(values, dims)};
}

SpectralField fft3(const SdfGrid& grid) { return fft3(grid.values, grid.dims); }

std::vector<Complex> ifft3(const SpectralField& field) {
  check_dims(field.dims);
  std::vector<Complex> data = field.coefficients;
  for (int axis = 0; axis < 3; ++axis) transform_axis(data, field.dims, axis, true);
  return data;
}

void check_filter(std::array<std::size_t, 3> dims, const FilterSpec& spec) {
  check_dims(dims);
  if (spec.cutoff < 0) throw Error("low_pass: cutoff must be non-negative");
  for (auto n : dims) {
    if (static_cast<std::size_t>(spec.cutoff) >= n / 2 && n > 1) {
      throw Error("low_pass: cutoff " + std::to_string(spec.cutoff) + " must be below n/2 = " +
                  std::to_string(n / 2));
    }
  }
}

void apply_mask(SpectralField& field, const FilterSpec& spec) {
  const auto [nx, ny, nz] = field.dims;
  for (std::size_t z = 0; z < nz; ++z) {
    const int kz = std::abs(mode_of(z, nz));
    for (std::size_t y = 0; y < ny; ++y) {
      const int ky = std::abs(mode_of(y, ny));
      for (std::size_t x = 0; x < nx; ++x) {
        const int kx = std::abs(mode_of(x, nx));
        if (std::max({kx, ky, kz}) > spec.cutoff) field.coefficients[field.index(x, y, z)] = 0.0;
      }
    }
  }
}

std::vector<double> low_pass(std::span<const double> values, std::array<std::size_t, 3> dims,
                             const FilterSpec& spec) {
  check_filter(dims, spec);
  SpectralField field = fft3(values, dims);
  apply_mask(field, spec);
  const std::vector<Complex> back = ifft3(field);

  // The mask is Hermitian-symmetric, so the result is real up to rounding.
  double peak = 0.0;
  double residue = 0.0;
  for (const auto& c : back) {
    peak = std::max(peak, std::abs(c.real()));
    residue = std::max(residue, std::abs(c.imag()));
  }
  if (residue > 1e-10 * std::max(1.0, peak)) {
    throw Error("low_pass: imaginary residue " + std::to_string(residue) + " exceeds tolerance");
  }
  std::vector<double> out(back.size());
  for (std::size_t i = 0; i < back.size(); ++i) out[i] = back[i].real();
  return out;
}

SdfGrid low_pass(const SdfGrid& grid, const FilterSpec& spec) {
  SdfGrid out = grid;
  out.values = low_pass(grid.values, grid.dims, spec);
  return out;
}

Bands split_bands(const SdfGrid& grid, const FilterSpec& spec) {
  Bands bands{low_pass(grid, spec), grid};
  for (std::size_t i = 0; i < grid.size(); ++i) bands.high.values[i] = grid.values[i] - bands.low.values[i];
  return bands;
}

}  // namespace sdfgen
