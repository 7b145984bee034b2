#include "stf/effective_model.hpp"

#include <cmath>

#include "stf/errors.hpp"
#include "stf/units.hpp"

namespace stf {

namespace {

constexpr double kProbabilityFloor = 1e-300;

constexpr int kOne = manifold_index(ChargeState::AC, Spinor::Singlet);
constexpr int kTwo = manifold_index(ChargeState::BD, Spinor::Singlet);

}  // namespace

EffectiveParams EffectiveParams::from_delta_j(double E0, double Delta, double J) {
  EffectiveParams p;
  p.E0 = E0;
  p.Delta = Delta;
  p.J = J;
  p.Delta1 = Delta + J;
  p.Delta2 = Delta - J;
  return p;
}

ManifoldState ManifoldState::basis(int label) {
  if (label < 1 || label > 8) throw InvalidArgument("manifold labels run from 1 to 8");
  ManifoldState s;
  s.amplitudes(label - 1) = 1.0;
  return s;
}

ManifoldState ManifoldState::injected() {
  ManifoldState s;
  s.amplitudes(kOne) = 1.0 / std::sqrt(2.0);
  s.amplitudes(manifold_index(ChargeState::AC, Spinor::TripletZero)) = 1.0 / std::sqrt(2.0);
  return s;
}

ManifoldMatrix hamiltonian_matrix(const EffectiveParams& params) {
  ManifoldMatrix h = ManifoldMatrix::Identity() * params.E0;
  // s₁·s₂ - ¼ is -1 on the singlet spinor and 0 on the triplets.
  h(kOne, kOne) -= params.J;
  h(kTwo, kTwo) -= params.J;
  h(kOne, kTwo) = -params.Delta;
  h(kTwo, kOne) = -params.Delta;
  return h;
}

ManifoldState evolve_ideal(const ManifoldState& initial, const EffectiveParams& params, double t) {
  const double hbar = PhysicalConstants::hbar;
  const cplx triplet_phase = std::polar(1.0, -params.E0 * t / hbar);
  const cplx singlet_phase = std::polar(1.0, -(params.E0 - params.J) * t / hbar);
  const double c = std::cos(params.Delta * t / hbar);
  const double s = std::sin(params.Delta * t / hbar);
  const cplx i(0.0, 1.0);

  ManifoldState out;
  out.amplitudes = initial.amplitudes * triplet_phase;
  const cplx a1 = initial.amplitudes(kOne);
  const cplx a2 = initial.amplitudes(kTwo);
  out.amplitudes(kOne) = singlet_phase * (c * a1 + i * s * a2);
  out.amplitudes(kTwo) = singlet_phase * (i * s * a1 + c * a2);
  return out;
}

double p_singlet(double t, const EffectiveParams& params) {
  const double s = std::sin(params.Delta * t / PhysicalConstants::hbar);
  return 0.5 * s * s;
}

double p_initial(double t, const EffectiveParams& params) {
  const double hbar = PhysicalConstants::hbar;
  const double c = std::cos(params.Delta * t / hbar);
  const double cj = std::cos(params.J * t / hbar);
  return (1.0 + c * c + 2.0 * cj * c) / 4.0;
}

double p_singlet_gated(double t, const GatedInitialState& gated, const EffectiveParams& params) {
  const double hbar = PhysicalConstants::hbar;
  const double alpha = gated.alpha.real();
  const double beta = gated.beta.real();
  const double sd = std::sin(params.Delta * t / hbar);
  const double sj = std::sin(params.J * t / hbar);
  const double a = alpha * sd;
  return a * a - 2.0 * alpha * beta * sj * sd + beta * beta;
}

double t_star(const EffectiveParams& params) {
  if (!(params.Delta > 0.0)) throw InvalidParams("t* requires Delta > 0");
  return PhysicalConstants::pi * PhysicalConstants::hbar / (2.0 * params.Delta);
}

ManifoldMatrix charge_at_b_projector() {
  ManifoldMatrix p = ManifoldMatrix::Zero();
  for (int s = 0; s < 4; ++s) {
    const int k = manifold_index(ChargeState::BD, static_cast<Spinor>(s));
    p(k, k) = 1.0;
  }
  return p;
}

const ManifoldState& PureOutcome::post_state() const {
  if (!post) throw UndefinedPostState("measurement branch has zero probability");
  return *post;
}

const ManifoldMatrix& MixedOutcome::post_state() const {
  if (!post) throw UndefinedPostState("measurement branch has zero probability");
  return *post;
}

std::array<PureOutcome, 2> measure_charge_at_b(const ManifoldState& state) {
  const ManifoldMatrix pb = charge_at_b_projector();
  const ManifoldMatrix pn = ManifoldMatrix::Identity() - pb;
  std::array<PureOutcome, 2> out;
  const ManifoldMatrix* proj[2] = {&pb, &pn};
  const double total = state.amplitudes.squaredNorm();
  for (int k = 0; k < 2; ++k) {
    const ManifoldVector v = *proj[k] * state.amplitudes;
    out[k].detected_charge_at_b = (k == 0);
    out[k].probability = v.squaredNorm() / total;
    if (out[k].probability > kProbabilityFloor) out[k].post = ManifoldState{v / v.norm()};
  }
  return out;
}

std::array<MixedOutcome, 2> measure_charge_at_b(const ManifoldMatrix& rho) {
  const ManifoldMatrix pb = charge_at_b_projector();
  const ManifoldMatrix pn = ManifoldMatrix::Identity() - pb;
  std::array<MixedOutcome, 2> out;
  const ManifoldMatrix* proj[2] = {&pb, &pn};
  const double total = rho.trace().real();
  for (int k = 0; k < 2; ++k) {
    const ManifoldMatrix branch = *proj[k] * rho * *proj[k];
    const double p = branch.trace().real();
    out[k].detected_charge_at_b = (k == 0);
    out[k].probability = p / total;
    if (out[k].probability > kProbabilityFloor) out[k].post = ManifoldMatrix(branch / p);
  }
  return out;
}

}  // namespace stf
