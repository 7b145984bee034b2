#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stf/box_basis.hpp"
#include "stf/coulomb.hpp"
#include "stf/effective_model.hpp"
#include "stf/kernels.hpp"
#include "stf/units.hpp"

namespace stf {

/// Spatial exchange symmetry. Symmetric spatial states carry the spin
/// singlet, antisymmetric ones the spin triplet.
enum class Sector { Symmetric, Antisymmetric };

const char* to_string(Sector s);

/// Symmetrized two-electron product states (|pq⟩ ± |qp⟩)/√2 over a shared
/// single-particle list; diagonal pairs |pp⟩ only in the symmetric sector.
struct TwoElectronBasis {
  Sector sector = Sector::Symmetric;
  std::vector<BoxOrbital> orbitals;
  std::vector<std::pair<int, int>> pairs;  // indices into orbitals, first <= second
  double energy_cutoff = std::numeric_limits<double>::infinity();  // meV, on E_p + E_q

  std::size_t size() const { return pairs.size(); }
};

TwoElectronBasis make_basis(Sector sector, int n_max, const Geometry& geometry,
                            const Material& material,
                            double energy_cutoff = std::numeric_limits<double>::infinity());

/// Basis-dependent but size-independent Hamiltonian blocks:
/// H = K·kinetic + (e²/4πεL)·coulomb + V₀·gate, with K the box energy unit.
struct HamiltonianBlocks {
  Eigen::MatrixXd kinetic;  // diagonal, n²+m² sums
  Eigen::MatrixXd coulomb;  // unit-square integrals
  Eigen::MatrixXd gate;     // occupancy of the b and d quadrants
};

HamiltonianBlocks assemble_blocks(const TwoElectronBasis& basis, const CoulombTable& table,
                                  Exec exec = Exec::Parallel);

/// One-body matrix of the indicator of the b and d quadrants (x>L/2,y<L/2 and
/// x<L/2,y>L/2) in the orbital basis.
double bd_quadrant_element(BoxOrbital p, BoxOrbital r);

struct CiSettings {
  Geometry geometry;
  Material material;
  int n_max = 8;
  double pair_energy_cutoff = std::numeric_limits<double>::infinity();
  QuadSpec quad;
  bool coulomb = true;
  Exec exec = Exec::Parallel;
};

/// Eigenpairs of one sector, ascending.
struct CiSpectrum {
  Sector sector = Sector::Symmetric;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;  // columns over basis pairs
  std::size_t basis_size = 0;
  Eigen::VectorXd residuals;     // ‖Hv-λv‖ per pair
};

/// Lowest k eigenpairs of a symmetric matrix. Eigenvector signs are fixed so
/// the largest-magnitude component is positive.
CiSpectrum solve_spectrum(const Eigen::MatrixXd& H, int k, Sector sector = Sector::Symmetric);

/// Owns both sector bases and their dimensionless blocks for one
/// material/cutoff. Hamiltonians for any side length reuse the same blocks.
class CiModel {
 public:
  explicit CiModel(CiSettings settings);

  const CiSettings& settings() const { return settings_; }
  const TwoElectronBasis& basis(Sector s) const;
  const HamiltonianBlocks& blocks(Sector s) const;
  std::shared_ptr<const CoulombTable> coulomb_table() const { return table_; }

  double kinetic_unit() const;
  /// e²/(4πεL) in meV, zero when Coulomb is disabled.
  double coulomb_unit() const;

  /// Same blocks, different dot size.
  CiModel resized(double side_length) const;

  Eigen::MatrixXd hamiltonian(Sector s, std::optional<double> gate_step_meV = std::nullopt) const;
  CiSpectrum spectrum(Sector s, int k, std::optional<double> gate_step_meV = std::nullopt) const;

 private:
  CiModel() = default;
  CiSettings settings_;
  std::shared_ptr<const CoulombTable> table_;
  std::shared_ptr<const TwoElectronBasis> symmetric_, antisymmetric_;
  std::shared_ptr<const HamiltonianBlocks> symmetric_blocks_, antisymmetric_blocks_;
};

/// Standalone assembly from explicit inputs; equivalent to CiModel::hamiltonian.
Eigen::MatrixXd build_hamiltonian(const TwoElectronBasis& basis, const Geometry& geometry,
                                  const Material& material, const CoulombTable& table,
                                  std::optional<double> gate_step_meV = std::nullopt,
                                  Exec exec = Exec::Parallel);

/// Ground-manifold parameters from the two lowest singlets and the lowest
/// (degenerate) triplet pair. Throws ManifoldInvalid when the triplets split
/// by more than 10% of Δ or do not lie between the singlets.
EffectiveParams extract_effective_params(const CiSpectrum& singlet, const CiSpectrum& triplet);

/// Spatial parts of the localized manifold states in the CI bases:
/// Φ₁ (ac diagonal) and Φ₂ (bd diagonal) for both exchange sectors.
struct ManifoldOrbitals {
  Eigen::VectorXd phi1_symmetric, phi2_symmetric;
  Eigen::VectorXd phi1_antisymmetric, phi2_antisymmetric;
};

/// |1⟩,|2⟩ = (S₁ ± S₂)/√2 with the sign of S₂ chosen so |1⟩ sits on ac; the
/// degenerate triplet pair is rotated to diagonalize the bd-quadrant
/// occupancy, lower occupancy first.
ManifoldOrbitals localize_manifold(const CiModel& model, const CiSpectrum& singlet,
                                   const CiSpectrum& triplet);

struct DensityGrid {
  int resolution = 0;
  double side_length = 0.0;
  Eigen::MatrixXd values;  // values(i, j) at x = (i+½)h, y = (j+½)h, nm⁻²
  double total = 0.0;      // midpoint-rule integral, 2 for a normalized state

  double cell() const { return side_length / resolution; }
};

/// One-body density 2∫|Ψ(r,r')|²dr' of a CI state given by its coefficients.
DensityGrid charge_density(const TwoElectronBasis& basis, const Eigen::VectorXd& coefficients,
                           double side_length, int resolution);
DensityGrid charge_density(const CiModel& model, const CiSpectrum& spectrum, int state_index,
                           int resolution);

/// Fraction of the charge within L/4 of any of the four walls' corners.
double corner_fraction(const DensityGrid& grid);

/// Strict local maxima (8-neighbour) of the grid, as points in nm.
std::vector<Point> local_maxima(const DensityGrid& grid);

/// Fraction of the charge in the a and c quadrants.
double ac_quadrant_fraction(const DensityGrid& grid);

/// Gate step in meV for a gate voltage and lever arm.
inline double gate_step_meV(double gate_voltage_V, double lever_arm) {
  return gate_voltage_V * 1000.0 * lever_arm;
}

/// Initial state prepared by raising the b and d quadrants by `gate_step`:
/// (|S̃⟩|ψ⁻⟩ + |T̃⟩|ψ⁺⟩)/√2 from the gated sector ground states, projected on
/// the ungated |1⟩, |2⟩ and on the ideal (|1⟩+|3⟩)/√2.
GatedInitialState gated_initial_state(const CiModel& model, double gate_step,
                                      const ManifoldOrbitals& ungated);

/// Convenience bundle used by the CLI and the acceptance suite.
struct DotAnalysis {
  CiSpectrum singlet;
  CiSpectrum triplet;
  EffectiveParams params;
  bool manifold_valid = true;
  std::string manifold_error;
  /// Relative change of the ground energy and of Δ against a run with
  /// n_max - 1. `converged` when both are below the thresholds.
  double ground_energy_change = 0.0;
  double delta_change = 0.0;
  bool converged = false;
};

struct ConvergenceThresholds {
  double ground_energy = 1e-3;
  double delta = 0.05;
};

DotAnalysis analyze_dot(const CiModel& model, int states = 10, bool check_convergence = true,
                        ConvergenceThresholds thresholds = {});

}  // namespace stf
