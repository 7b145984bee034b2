#include "stf/box_basis.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "stf/errors.hpp"

namespace stf {

namespace {
constexpr double kPi = PhysicalConstants::pi;
}

double kinetic_unit(const Geometry& geometry, const Material& material) {
  const double L = geometry.side_length;
  return material.kinetic_prefactor() * kPi * kPi / (L * L);
}

std::vector<BoxOrbital> enumerate_orbitals(int n_max) {
  if (n_max < 1) throw InvalidArgument("n_max must be >= 1");
  std::vector<BoxOrbital> out;
  out.reserve(static_cast<std::size_t>(n_max) * n_max);
  for (int n = 1; n <= n_max; ++n)
    for (int m = 1; m <= n_max; ++m) out.push_back({n, m});
  std::sort(out.begin(), out.end(), [](const BoxOrbital& a, const BoxOrbital& b) {
    return std::tuple(a.weight(), a.n, a.m) < std::tuple(b.weight(), b.n, b.m);
  });
  return out;
}

double orbital_energy(BoxOrbital orb, const Geometry& geometry, const Material& material) {
  return kinetic_unit(geometry, material) * orb.weight();
}

double orbital_value(BoxOrbital orb, Point p, const Geometry& geometry) {
  if (!geometry.contains(p)) throw InvalidArgument("point lies outside the dot");
  const double L = geometry.side_length;
  // Walls are exact zeros; sin(nπ) in floating point is not.
  if (p.x == 0.0 || p.x == L || p.y == 0.0 || p.y == L) return 0.0;
  return 2.0 / L * std::sin(orb.n * kPi * p.x / L) * std::sin(orb.m * kPi * p.y / L);
}

double half_interval_overlap(int a, int b) {
  // 2 sin(aπs) sin(bπs) = cos((a-b)πs) - cos((a+b)πs)
  auto cos_integral = [](int k) {
    if (k == 0) return 0.5;
    return std::sin(k * kPi / 2.0) / (k * kPi);
  };
  return cos_integral(a - b) - cos_integral(a + b);
}

}  // namespace stf
