#pragma once

#include <array>
#include <complex>
#include <span>
#include <utility>
#include <vector>

#include "sdfgen/sdf_grid.hpp"

namespace sdfgen {

using Complex = std::complex<double>;

/// 3D DFT coefficients in standard layout: storage index i on an axis of
/// length n holds mode k = i for i < n/2 and k = i - n otherwise.
/// Unnormalized forward transform, 1/N on the inverse.
struct SpectralField {
  std::array<std::size_t, 3> dims{0, 0, 0};
  std::vector<Complex> coefficients;

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + dims[0] * (y + dims[1] * z);
  }
  /// Coefficient for integer mode k (each component in [-n/2, n/2)).
  Complex& mode(int kx, int ky, int kz);
  const Complex& mode(int kx, int ky, int kz) const;
};

/// Signed mode of storage index i on an axis of length n.
constexpr int mode_of(std::size_t i, std::size_t n) {
  return i < n / 2 ? static_cast<int>(i) : static_cast<int>(i) - static_cast<int>(n);
}

/// In-place radix-2 transform of a contiguous power-of-two sequence.
void fft1(std::vector<Complex>& data, bool inverse);

SpectralField fft3(const SdfGrid& grid);
SpectralField fft3(std::span<const double> values, std::array<std::size_t, 3> dims);
/// Inverse transform; returns the complex samples.
std::vector<Complex> ifft3(const SpectralField& field);

/// Ideal box low-pass: keeps modes with max(|kx|, |ky|, |kz|) <= cutoff.
struct FilterSpec {
  int cutoff = 8;
};

void apply_mask(SpectralField& field, const FilterSpec& spec);

/// Ideal low-pass, inverse(mask(forward(values))). Operates on a raw value
/// array so network tensors and grids share one code path.
std::vector<double> low_pass(std::span<const double> values, std::array<std::size_t, 3> dims,
                             const FilterSpec& spec);
SdfGrid low_pass(const SdfGrid& grid, const FilterSpec& spec);

struct Bands {
  SdfGrid low;
  SdfGrid high;
};

/// low = low_pass(grid), high = grid - low.
Bands split_bands(const SdfGrid& grid, const FilterSpec& spec);

/// Throws unless every axis is a power of two and cutoff < n/2 on each axis.
void check_filter(std::array<std::size_t, 3> dims, const FilterSpec& spec);

}  // namespace sdfgen
