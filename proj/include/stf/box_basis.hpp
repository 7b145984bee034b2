#pragma once

#include <vector>

#include "stf/units.hpp"

namespace stf {

/// Hard-wall square-well eigenfunction (2/L) sin(nπx/L) sin(mπy/L).
struct BoxOrbital {
  int n = 1;
  int m = 1;

  int weight() const { return n * n + m * m; }
  friend bool operator==(const BoxOrbital&, const BoxOrbital&) = default;
};

/// K = ħ²π²/(2m*L²), the energy unit of the box spectrum.
double kinetic_unit(const Geometry& geometry, const Material& material);

/// All (n,m) in {1..n_max}², ascending in n²+m², ties broken lexicographically.
std::vector<BoxOrbital> enumerate_orbitals(int n_max);

double orbital_energy(BoxOrbital orb, const Geometry& geometry, const Material& material);

/// Amplitude in nm⁻¹. Throws InvalidArgument outside the dot.
double orbital_value(BoxOrbital orb, Point point, const Geometry& geometry);

/// 1D overlap 2∫₀^{1/2} sin(aπs) sin(bπs) ds on the lower half of the unit
/// interval. The upper half is δ_ab minus this.
double half_interval_overlap(int a, int b);

}  // namespace stf
