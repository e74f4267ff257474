#include <random>

#include "doctest.h"
#include "sdfgen/spectral.hpp"
#include "support.hpp"

using namespace sdfgen;

namespace {

SdfGrid random_grid(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SdfGrid g = SdfGrid::canonical(n);
  for (auto& v : g.values) v = u(rng);
  return g;
}

double energy(const std::vector<double>& v) {
  double e = 0.0;
  for (double x : v) e += x * x;
  return e;
}

}  // namespace

TEST_CASE("1d fft matches the naive DFT") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::size_t n = 16;
  std::vector<Complex> data(n);
  for (auto& c : data) c = {u(rng), u(rng)};
  auto fast = data;
  fft1(fast, false);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += data[j] * std::polar(1.0, -2.0 * std::numbers::pi * double(j * k) / n);
    CHECK(std::abs(fast[k] - acc) < 1e-12);
  }
  std::vector<Complex> odd(12);
  CHECK_THROWS_AS(fft1(odd, false), Error);
}

TEST_CASE("3d fft agrees with the naive DFT on 8^3") {
  const SdfGrid g = random_grid(8, 2);
  const auto fast = fft3(g);
  const auto slow = support::naive_dft3(g.values, 8);
  double worst = 0.0;
  for (std::size_t i = 0; i < slow.size(); ++i) worst = std::max(worst, std::abs(fast.coefficients[i] - slow[i]));
  CHECK(worst < 1e-9);
}

TEST_CASE("inverse transform and Parseval") {
  const SdfGrid g = random_grid(16, 3);
  const auto spec = fft3(g);
  const auto back = ifft3(spec);
  double worst = 0.0, spectral_energy = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(back[i] - g.values[i]));
  for (const auto& c : spec.coefficients) spectral_energy += std::norm(c);
  CHECK(worst < 1e-12);
  const double e = energy(g.values);
  CHECK(std::abs(spectral_energy / double(g.size()) - e) < 1e-9 * e);
}

TEST_CASE("box low-pass keeps exactly the modes up to the cutoff") {
  const SdfGrid g = random_grid(16, 4);
  const FilterSpec spec{3};
  const SdfGrid low = low_pass(g, spec);
  const auto s = fft3(low);
  const auto orig = fft3(g);
  for (std::size_t z = 0; z < 16; ++z)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) {
        const int m = std::max({std::abs(mode_of(x, 16)), std::abs(mode_of(y, 16)), std::abs(mode_of(z, 16))});
        const std::size_t i = s.index(x, y, z);
        if (m > 3) CHECK(std::abs(s.coefficients[i]) < 1e-9);
        else CHECK(std::abs(s.coefficients[i] - orig.coefficients[i]) < 1e-9);
      }
}

TEST_CASE("split bands: complementarity, idempotence, orthogonality") {
  const SdfGrid g = random_grid(16, 5);
  const FilterSpec spec{4};
  const Bands b = split_bands(g, spec);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(b.low.values[i] + b.high.values[i] - g.values[i]));
  CHECK(worst < 1e-10);

  const SdfGrid twice = low_pass(b.low, spec);
  double drift = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) drift = std::max(drift, std::abs(twice.values[i] - b.low.values[i]));
  CHECK(drift < 1e-10);

  // Disjoint supports: the bands are orthogonal and their energies add.
  double cross = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) cross += b.low.values[i] * b.high.values[i];
  CHECK(std::abs(cross) < 1e-9 * energy(g.values));
  CHECK(energy(b.low.values) + energy(b.high.values) == doctest::Approx(energy(g.values)).epsilon(1e-12));
}

TEST_CASE("filter argument checks") {
  CHECK_THROWS_AS(low_pass(random_grid(12, 6), FilterSpec{2}), Error);
  CHECK_THROWS_AS(low_pass(random_grid(16, 6), FilterSpec{8}), Error);
  CHECK_THROWS_AS(low_pass(random_grid(16, 6), FilterSpec{-1}), Error);
  CHECK_NOTHROW(low_pass(random_grid(16, 6), FilterSpec{7}));
}

TEST_CASE("a pure mode above the cutoff vanishes, one below survives") {
  SdfGrid g = SdfGrid::canonical(16);
  for (std::size_t z = 0; z < 16; ++z)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x)
        g.at(x, y, z) = std::cos(2 * std::numbers::pi * 5 * x / 16.0) + std::sin(2 * std::numbers::pi * 2 * y / 16.0);
  const SdfGrid low = low_pass(g, FilterSpec{3});
  for (std::size_t y = 0; y < 16; ++y) {
    CHECK(low.at(3, y, 0) == doctest::Approx(std::sin(2 * std::numbers::pi * 2 * y / 16.0)));
  }
}
