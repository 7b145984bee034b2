#pragma once

// Unit system: energies in meV, lengths in nm, times in ps. Every conversion
// factor lives in PhysicalConstants; nothing else in the library hard-codes
// a physical constant.

#include <array>

namespace stf {

struct PhysicalConstants {
  /// Reduced Planck constant, meV·ps.
  static constexpr double hbar = 0.6582119569;
  /// ħ²/(2 mₑ), meV·nm².
  static constexpr double hbar2_over_2me = 38.0998212;
  /// e²/(4πε₀), meV·nm.
  static constexpr double coulomb_vacuum = 1439.964;
  static constexpr double pi = 3.14159265358979323846;
};

struct Material {
  double effective_mass_ratio = 0.067;  // m*/mₑ
  double dielectric_constant = 12.9;    // ε_r

  static Material gaas() { return {}; }

  double hbar() const { return PhysicalConstants::hbar; }
  /// e²/(4πε₀ε_r) in meV·nm.
  double coulomb_prefactor() const { return PhysicalConstants::coulomb_vacuum / dielectric_constant; }
  /// ħ²/(2m*) in meV·nm².
  double kinetic_prefactor() const { return PhysicalConstants::hbar2_over_2me / effective_mass_ratio; }
  /// Effective Bohr radius 4πε₀ε_r ħ²/(m* e²), nm.
  double bohr_radius() const { return 2.0 * kinetic_prefactor() / coulomb_prefactor(); }

  void validate() const;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

enum class Corner { A = 0, B = 1, C = 2, D = 3 };

/// Hard-wall square dot [0,L]×[0,L] with the origin at the lower-left corner.
/// Corner labels run counterclockwise: a lower-left, b lower-right,
/// c upper-right, d upper-left. a/c and b/d are the two diagonals.
struct Geometry {
  double side_length = 100.0;  // nm
  /// Distance of the labeled density-peak points from the walls, as a fraction of L.
  double corner_inset = 0.2;

  std::array<Point, 4> corners() const;
  Point corner(Corner c) const { return corners()[static_cast<int>(c)]; }
  bool contains(Point p) const {
    return p.x >= 0.0 && p.x <= side_length && p.y >= 0.0 && p.y <= side_length;
  }

  void validate() const;
};

}  // namespace stf
