#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "stf/effective_model.hpp"
#include "stf/kernels.hpp"
#include "stf/rng.hpp"

namespace stf {

/// How E_hf maps to the field components multiplying σ on each electron.
///   RmsMagnitude        components ~ N(0, E_hf/√3), ⟨|b|²⟩ = E_hf²
///   PerComponent        components ~ N(0, E_hf)
///   ZeemanPerComponent  components ~ N(0, E_hf/2): E_hf is the per-component
///                       spread of the Zeeman energy gμ_B·B, H = (gμ_B B/2)·σ
enum class FieldConvention { RmsMagnitude, PerComponent, ZeemanPerComponent };

/// Lindblad generator for charge dephasing, acting on the singlet pair |1⟩,|2⟩.
///   Energy  L = |1⟩⟨2| + |2⟩⟨1|, dephases the S₁/S₂ eigenbasis
///   Charge  L = |1⟩⟨1| - |2⟩⟨2|, dephases the localized charge basis
enum class DephasingBasis { Energy, Charge };

/// Integrator for Monte Carlo shots. Auto uses exact spectral propagation
/// when the dephasing rate is zero and RK4 otherwise.
enum class ShotIntegrator { Auto, RK4 };

struct NoiseConfig {
  double E_hf = 0.0;           // µeV
  double dephasing_rate = 0.0;  // ps⁻¹
  FieldConvention convention = FieldConvention::ZeemanPerComponent;
  DephasingBasis dephasing = DephasingBasis::Energy;
  ShotIntegrator integrator = ShotIntegrator::Auto;
  int samples = 1000;
  std::uint64_t seed = 0;
  Exec exec = Exec::Parallel;

  void validate() const;
  /// Standard deviation of each σ-coefficient component, meV.
  double component_sigma_meV() const;
};

/// Quasi-static σ-coefficients (meV) on electron 1 and electron 2.
struct OverhauserFields {
  Eigen::Vector3d electron1 = Eigen::Vector3d::Zero();
  Eigen::Vector3d electron2 = Eigen::Vector3d::Zero();
};

OverhauserFields sample_overhauser(const NoiseConfig& config, StreamRng& rng);

/// Two-spin operator b₁·σ⊗1 + 1⊗b₂·σ in the spinor order ψ⁻, ψ⁺, ↑↑, ↓↓.
Eigen::Matrix4cd spin_field_operator(const OverhauserFields& fields);

/// hamiltonian_matrix(params) + spin_field_operator(fields) ⊗ 1_charge.
ManifoldMatrix build_noisy_hamiltonian(const EffectiveParams& params, const OverhauserFields& fields);

ManifoldMatrix dephasing_operator(DephasingBasis basis);

struct LindbladOptions {
  DephasingBasis dephasing = DephasingBasis::Energy;
  /// Max-norm difference between the n- and 2n-step results accepted.
  double tolerance = 1e-10;
  int max_refinements = 14;
};

/// Largest step accepted by evolve_lindblad: 0.05·ħ/ω with ω the largest of
/// Δ, |J| and |b₁|+|b₂|.
double max_lindblad_step(const EffectiveParams& params, const OverhauserFields& fields = {});

/// Integrates dρ/dt = -(i/ħ)[H,ρ] + γ(LρL† - ½{L†L,ρ}) over [0, t] with RK4.
/// `dt` is the coarsest step; the step is further limited by the dephasing
/// rate and halved until two successive refinements agree to the tolerance.
ManifoldMatrix evolve_lindblad(const ManifoldMatrix& rho, const EffectiveParams& params,
                               const OverhauserFields& fields, double dephasing_rate, double t,
                               double dt, const LindbladOptions& options = {});

/// Trace, Hermiticity and positivity check; throws IntegratorFailure.
void check_density_matrix(const ManifoldMatrix& rho, double trace_tol = 1e-10,
                          double hermitian_tol = 1e-12, double positivity_tol = 1e-9);

struct FilterCurve {
  std::vector<double> t;       // ps
  std::vector<double> mean;    // p(charge at b)
  std::vector<double> std_error;
};

/// Ensemble average of p(charge at b)(t) from the injected state.
/// `t_grid` must be ascending and non-negative.
FilterCurve ensemble_filter_curve(const EffectiveParams& params, const NoiseConfig& config,
                                  const std::vector<double>& t_grid);

struct CoherenceCurve {
  std::vector<double> t;
  /// Re Σ_c E[ρ_c3] ρ̄ᶦᵈ_c3 / Σ_c |ρᶦᵈ_c3|², c over the two charge states of
  /// the singlet: the ensemble singlet-T₀ coherence relative to noise-free
  /// evolution. 1 at t = 0.
  std::vector<double> value;
};

CoherenceCurve ensemble_coherence(const EffectiveParams& params, const NoiseConfig& config,
                                  const std::vector<double>& t_grid);

struct CoherenceFit {
  double omega = 0.0;  // ps⁻¹ in C(t) = exp(-ω²t²/2)
  double t_1e = 0.0;   // √2/ω, ps
  double t_2pi = 0.0;  // 2π/ω, ps
  int points = 0;
};

/// Least-squares fit of ln C = -ω²t²/2 over points with C ≥ floor and t > 0.
CoherenceFit fit_gaussian_decay(const CoherenceCurve& curve, double floor = 0.8);

enum class RusInput { Injected, Singlet, Triplet };

struct RusRecord {
  std::vector<double> detection;        // conditional p(detect) per round
  std::vector<double> cumulative_miss;  // undetected singlet weight / initial
  std::vector<double> survival;         // p(no detection so far)
};

/// Rounds of evolve-for-t*, measure at b, continue on the no-charge branch.
RusRecord repeat_until_success(const EffectiveParams& params, const NoiseConfig& config,
                               RusInput input, int max_rounds);

/// Detection statistics of one dot measurement at t*, used as a two-outcome
/// POVM by the chain simulator: P(report singlet | singlet) and
/// P(report singlet | triplet).
struct PovmSummary {
  double p_detect_singlet = 1.0;
  double p_detect_triplet = 0.0;
};

PovmSummary povm_summary(const EffectiveParams& params, const NoiseConfig& config);

}  // namespace stf
