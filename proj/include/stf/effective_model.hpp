#pragma once

#include <array>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>

#include <Eigen/Dense>

namespace stf {

using cplx = std::complex<double>;
using ManifoldVector = Eigen::Matrix<cplx, 8, 1>;
using ManifoldMatrix = Eigen::Matrix<cplx, 8, 8>;

/// Parameters of the ground-manifold Hamiltonian (meV).
///   E_S1 = E0 - J - Δ,  triplets at E0,  E_S2 = E0 - J + Δ
/// so Δ = (Δ₁+Δ₂)/2 and J = (Δ₁-Δ₂)/2 with Δ₁ = E0 - E_S1, Δ₂ = E_S2 - E0.
struct EffectiveParams {
  double E0 = 0.0;
  double Delta1 = 0.0;
  double Delta2 = 0.0;
  double J = 0.0;
  double Delta = 0.0;
  /// (E₉ - E_S1)/(E_S2 - E_S1); infinite when not computed from a spectrum.
  double gap_ratio = std::numeric_limits<double>::infinity();

  static EffectiveParams from_delta_j(double E0, double Delta, double J);
};

/// Gate-prepared initial state: α = ⟨1|ψ̃(0)⟩, β = ⟨2|ψ̃(0)⟩ and ⟨ψ̃(0)|ψ(0)⟩.
/// α and β are real under the a/c phase alignment.
struct GatedInitialState {
  double gate_potential = 0.0;  // meV
  cplx alpha{std::numbers::sqrt2 / 2.0, 0.0};
  cplx beta{0.0, 0.0};
  double overlap_ideal = 1.0;
};

// Manifold basis, 0-based: index = 2·spinor + charge.
//   charge 0: Φ₁ (electrons on a,c)   charge 1: Φ₂ (electrons on b,d)
//   spinor 0: ψ⁻  1: ψ⁺  2: ↑↑  3: ↓↓
// so |1⟩..|8⟩ map to 0..7 in the order of the singlet/triplet labeling.
enum class ChargeState { AC = 0, BD = 1 };
enum class Spinor { Singlet = 0, TripletZero = 1, TripletUp = 2, TripletDown = 3 };

constexpr int manifold_index(ChargeState c, Spinor s) {
  return 2 * static_cast<int>(s) + static_cast<int>(c);
}

/// Normalized 8-component amplitude vector.
struct ManifoldState {
  ManifoldVector amplitudes = ManifoldVector::Zero();

  /// |label⟩ for label in 1..8.
  static ManifoldState basis(int label);
  /// (|1⟩+|3⟩)/√2: spin up at a, spin down at c.
  static ManifoldState injected();
  double norm() const { return amplitudes.norm(); }
  double probability(int label) const { return std::norm(amplitudes(label - 1)); }
  ManifoldMatrix density() const { return amplitudes * amplitudes.adjoint(); }
};

/// E0·I - Δ(|1⟩⟨2|+|2⟩⟨1|) + J(s₁·s₂ - ¼).
ManifoldMatrix hamiltonian_matrix(const EffectiveParams& params);

/// Closed-form evolution under hamiltonian_matrix for t in ps.
ManifoldState evolve_ideal(const ManifoldState& initial, const EffectiveParams& params, double t);

/// ½ sin²(Δt/ħ): probability of |2⟩ starting from the injected state.
double p_singlet(double t, const EffectiveParams& params);

/// (1 + cos²(Δt/ħ) + 2 cos(Jt/ħ) cos(Δt/ħ))/4.
double p_initial(double t, const EffectiveParams& params);

/// (α sin(Δt/ħ))² - 2αβ sin(Jt/ħ) sin(Δt/ħ) + β², real α and β.
double p_singlet_gated(double t, const GatedInitialState& gated, const EffectiveParams& params);

/// πħ/(2Δ) in ps. Throws InvalidParams when Δ <= 0.
double t_star(const EffectiveParams& params);

/// Projector onto the b,d charge state: |2⟩,|4⟩,|6⟩,|8⟩.
ManifoldMatrix charge_at_b_projector();

struct PureOutcome {
  bool detected_charge_at_b = false;
  double probability = 0.0;
  std::optional<ManifoldState> post;

  /// Renormalized post-measurement state; throws UndefinedPostState for a
  /// zero-probability branch.
  const ManifoldState& post_state() const;
};

struct MixedOutcome {
  bool detected_charge_at_b = false;
  double probability = 0.0;
  std::optional<ManifoldMatrix> post;

  const ManifoldMatrix& post_state() const;
};

/// Branches [0] charge at b, [1] no charge at b.
std::array<PureOutcome, 2> measure_charge_at_b(const ManifoldState& state);
std::array<MixedOutcome, 2> measure_charge_at_b(const ManifoldMatrix& rho);

}  // namespace stf
