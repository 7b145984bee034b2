#pragma once

#include <Eigen/Dense>

#include "stf/ci_engine.hpp"
#include "stf/units.hpp"

namespace stf {

struct GridOracleOptions {
  bool coulomb = true;
  int max_iterations = 600;
  double tolerance = 1e-10;  // relative Ritz residual
  Exec exec = Exec::Parallel;
};

/// Lowest k eigenvalues (meV) of the finite-difference two-electron
/// Hamiltonian on G×G interior points per electron (h = L/(G+1), hard walls),
/// restricted to one exchange sector. The Coulomb kernel at coincident points
/// is the cell average 4·ln(1+√2)/h. Lanczos with full reorthogonalization;
/// the dimension is G⁴. Degenerate levels appear once (single start vector).
Eigen::VectorXd grid_oracle_spectrum(const Geometry& geometry, const Material& material, int G, int k,
                                     Sector sector = Sector::Symmetric, const GridOracleOptions& options = {});

/// Extrapolates E(h) = E₀ + a·h^p₁ + b·h^p₂ through three points. The
/// coincidence cutoff makes the leading error first order in h.
double richardson3(const double h[3], const double e[3], double p1 = 1.0, double p2 = 2.0);

}  // namespace stf
