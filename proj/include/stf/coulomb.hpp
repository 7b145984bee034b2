#pragma once

#include <memory>

#include <Eigen/Dense>

#include "stf/box_basis.hpp"
#include "stf/kernels.hpp"
#include "stf/units.hpp"

namespace stf {

struct QuadSpec {
  /// Gauss-Legendre order per polar direction; 0 picks 6·n_max + 32.
  int order = 0;
  /// Maximum absolute change of any dimensionless base integral between
  /// `order` and `order + 16`.
  double tolerance = 1e-10;
};

/// Two-body Coulomb integrals of the unit square for unit prefactor.
///
/// A product of two box orbitals along one axis expands into cosines,
/// 2 sin(aπs) sin(cπs) = cos(|a-c|πs) - cos((a+c)πs), so every matrix element
/// is a signed sum of 16 base integrals
///
///   I(j₁,l₁,k₁,k₂) = ∫ cos(j₁πx₁) cos(l₁πx₂) cos(k₁πy₁) cos(k₂πy₂) / |r₁-r₂|
///
/// In relative coordinates (u,v) = r₁-r₂ each base integral becomes a 2D
/// integral of analytic correlation functions against 1/√(u²+v²). Polar
/// Gauss-Legendre on the two triangles of the first quadrant removes the
/// singularity (the Jacobian cancels 1/r) and the integrand is analytic on
/// each triangle, so convergence is exponential in the order.
class CoulombTable {
 public:
  static CoulombTable build(int n_max, QuadSpec spec = {}, Exec exec = Exec::Parallel);

  int n_max() const { return n_max_; }
  int order() const { return order_; }
  double achieved_error() const { return achieved_error_; }

  /// Dimensionless ⟨p(1) q(2)| 1/|r₁-r₂| |r(1) s(2)⟩ on the unit square.
  /// Multiply by e²/(4πε L) for meV.
  double element(BoxOrbital p, BoxOrbital q, BoxOrbital r, BoxOrbital s) const;

  double base(int jx1, int jx2, int jy1, int jy2) const {
    return table_(jx1 * dim_ + jx2, jy1 * dim_ + jy2);
  }

 private:
  int n_max_ = 0;
  int order_ = 0;
  int dim_ = 0;  // 2·n_max + 1 cosine frequencies per axis
  double achieved_error_ = 0.0;
  Eigen::MatrixXd table_;
};

/// Symmetrized correlation X_jl(u) + X_lj(u) for u in [0,1], where
/// X_jl(u) = ∫ cos(jπ(x+u)) cos(lπx) dx over x in [0, 1-u].
double cosine_correlation(int j, int l, double u);

/// Shared table for the given cutoff. Tables are cached per (n_max, spec).
std::shared_ptr<const CoulombTable> coulomb_table(int n_max, QuadSpec spec = {});

/// ⟨pq|e²/(4πε|r₁-r₂|)|rs⟩ in meV. Odd reflection parity along x or y
/// returns exactly zero.
double coulomb_element(BoxOrbital p, BoxOrbital q, BoxOrbital r, BoxOrbital s,
                       const Geometry& geometry, const Material& material, QuadSpec spec = {});

}  // namespace stf
