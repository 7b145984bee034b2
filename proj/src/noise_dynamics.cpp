#include "stf/noise_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "stf/errors.hpp"
#include "stf/units.hpp"

namespace stf {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kUeV = 1e-3;  // µeV → meV
const cplx kI(0.0, 1.0);

constexpr int kOne = manifold_index(ChargeState::AC, Spinor::Singlet);
constexpr int kTwo = manifold_index(ChargeState::BD, Spinor::Singlet);
constexpr int kThree = manifold_index(ChargeState::AC, Spinor::TripletZero);

ManifoldMatrix singlet_projector() {
  ManifoldMatrix p = ManifoldMatrix::Zero();
  p(kOne, kOne) = 1.0;
  p(kTwo, kTwo) = 1.0;
  return p;
}

double at_b(const ManifoldMatrix& rho) {
  double p = 0.0;
  for (int s = 0; s < 4; ++s) {
    const int k = manifold_index(ChargeState::BD, static_cast<Spinor>(s));
    p += rho(k, k).real();
  }
  return p;
}

double at_b(const ManifoldVector& psi) {
  double p = 0.0;
  for (int s = 0; s < 4; ++s) p += std::norm(psi(manifold_index(ChargeState::BD, static_cast<Spinor>(s))));
  return p;
}

void check_grid(const std::vector<double>& t_grid) {
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    if (!(t_grid[k] >= 0.0)) throw InvalidArgument("time grid must be non-negative");
    if (k > 0 && t_grid[k] < t_grid[k - 1]) throw InvalidArgument("time grid must be ascending");
  }
}

ManifoldMatrix rhs(const ManifoldMatrix& rho, const ManifoldMatrix& H, const ManifoldMatrix& L,
                   const ManifoldMatrix& LdL, double gamma) {
  ManifoldMatrix d = (-kI / PhysicalConstants::hbar) * (H * rho - rho * H);
  if (gamma > 0.0) d += gamma * (L * rho * L.adjoint() - 0.5 * (LdL * rho + rho * LdL));
  return d;
}

ManifoldMatrix rk4(ManifoldMatrix rho, const ManifoldMatrix& H, const ManifoldMatrix& L, double gamma, double t,
                   long steps) {
  const ManifoldMatrix LdL = L.adjoint() * L;
  const double h = t / static_cast<double>(steps);
  for (long s = 0; s < steps; ++s) {
    const ManifoldMatrix k1 = rhs(rho, H, L, LdL, gamma);
    const ManifoldMatrix k2 = rhs(rho + 0.5 * h * k1, H, L, LdL, gamma);
    const ManifoldMatrix k3 = rhs(rho + 0.5 * h * k2, H, L, LdL, gamma);
    const ManifoldMatrix k4 = rhs(rho + h * k3, H, L, LdL, gamma);
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  // Restore exact Hermiticity lost to rounding.
  return 0.5 * (rho + rho.adjoint());
}

// Per-shot propagation along a time grid, either spectral (closed system) or
// RK4 on the density matrix.
class ShotPropagator {
 public:
  ShotPropagator(const EffectiveParams& params, const OverhauserFields& fields, const NoiseConfig& config)
      : params_(params), fields_(fields), gamma_(config.dephasing_rate), H_(build_noisy_hamiltonian(params, fields)) {
    spectral_ = config.integrator == ShotIntegrator::Auto && gamma_ == 0.0;
    options_.dephasing = config.dephasing;
    if (spectral_) {
      Eigen::SelfAdjointEigenSolver<ManifoldMatrix> eig(H_);
      V_ = eig.eigenvectors();
      E_ = eig.eigenvalues();
    }
  }

  bool spectral() const { return spectral_; }

  ManifoldVector advance(const ManifoldVector& psi, double dt) const {
    ManifoldVector c = V_.adjoint() * psi;
    for (int k = 0; k < 8; ++k) c(k) *= std::polar(1.0, -E_(k) * dt / PhysicalConstants::hbar);
    return V_ * c;
  }

  ManifoldMatrix advance(const ManifoldMatrix& rho, double dt) const {
    if (dt == 0.0) return rho;
    if (spectral_) {
      ManifoldMatrix U = V_;
      for (int k = 0; k < 8; ++k) U.col(k) *= std::polar(1.0, -E_(k) * dt / PhysicalConstants::hbar);
      U = U * V_.adjoint();
      return U * rho * U.adjoint();
    }
    const double weight = rho.trace().real();
    if (weight <= 0.0) return rho;
    const double step = std::min(dt, max_lindblad_step(params_, fields_));
    return weight * evolve_lindblad(rho / weight, params_, fields_, gamma_, dt, step, options_);
  }

 private:
  EffectiveParams params_;
  OverhauserFields fields_;
  double gamma_;
  ManifoldMatrix H_;
  bool spectral_ = false;
  LindbladOptions options_;
  ManifoldMatrix V_;
  Eigen::Matrix<double, 8, 1> E_;
};

int shot_count(const NoiseConfig& config) {
  // Without hyperfine noise every shot is identical.
  return config.E_hf == 0.0 ? 1 : config.samples;
}

// Runs `body(shot, fields)` for each shot with its own counter-based stream.
void for_each_shot(const NoiseConfig& config, const std::function<void(int, const OverhauserFields&)>& body) {
  const int shots = shot_count(config);
  for_each_index_static(config.exec, static_cast<std::size_t>(shots), [&](std::size_t s) {
    StreamRng rng(config.seed, s);
    body(static_cast<int>(s), sample_overhauser(config, rng));
  });
}

}  // namespace

void NoiseConfig::validate() const {
  if (!(E_hf >= 0.0)) throw InvalidParams("E_hf must be >= 0");
  if (!(dephasing_rate >= 0.0)) throw InvalidParams("dephasing rate must be >= 0");
  if (samples < 1) throw InvalidParams("samples must be >= 1");
}

double NoiseConfig::component_sigma_meV() const {
  const double e = E_hf * kUeV;
  switch (convention) {
    case FieldConvention::RmsMagnitude: return e / std::sqrt(3.0);
    case FieldConvention::PerComponent: return e;
    case FieldConvention::ZeemanPerComponent: return 0.5 * e;
  }
  return e;
}

OverhauserFields sample_overhauser(const NoiseConfig& config, StreamRng& rng) {
  OverhauserFields f;
  const double sigma = config.component_sigma_meV();
  if (sigma == 0.0) return f;
  std::normal_distribution<double> normal(0.0, sigma);
  for (int k = 0; k < 3; ++k) f.electron1(k) = normal(rng);
  for (int k = 0; k < 3; ++k) f.electron2(k) = normal(rng);
  return f;
}

Eigen::Matrix4cd spin_field_operator(const OverhauserFields& fields) {
  Eigen::Matrix2cd sx, sy, sz;
  sx << 0, 1, 1, 0;
  sy << 0, -kI, kI, 0;
  sz << 1, 0, 0, -1;
  auto dot = [&](const Eigen::Vector3d& b) -> Eigen::Matrix2cd { return b(0) * sx + b(1) * sy + b(2) * sz; };
  const Eigen::Matrix2cd one = Eigen::Matrix2cd::Identity();
  const Eigen::Matrix2cd b1 = dot(fields.electron1), b2 = dot(fields.electron2);

  // Product basis |s₁s₂⟩, index 2s₁+s₂ with ↑ = 0.
  Eigen::Matrix4cd product;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) product(2 * a + b, 2 * c + d) = b1(a, c) * one(b, d) + one(a, c) * b2(b, d);

  Eigen::Matrix4cd U = Eigen::Matrix4cd::Zero();
  U(1, 0) = kInvSqrt2;
  U(2, 0) = -kInvSqrt2;  // ψ⁻
  U(1, 1) = kInvSqrt2;
  U(2, 1) = kInvSqrt2;  // ψ⁺
  U(0, 2) = 1.0;        // ↑↑
  U(3, 3) = 1.0;        // ↓↓
  return U.adjoint() * product * U;
}

ManifoldMatrix build_noisy_hamiltonian(const EffectiveParams& params, const OverhauserFields& fields) {
  ManifoldMatrix h = hamiltonian_matrix(params);
  const Eigen::Matrix4cd spin = spin_field_operator(fields);
  for (int s = 0; s < 4; ++s)
    for (int t = 0; t < 4; ++t)
      for (int c = 0; c < 2; ++c) h(2 * s + c, 2 * t + c) += spin(s, t);
  return h;
}

ManifoldMatrix dephasing_operator(DephasingBasis basis) {
  ManifoldMatrix L = ManifoldMatrix::Zero();
  if (basis == DephasingBasis::Energy) {
    L(kOne, kTwo) = 1.0;
    L(kTwo, kOne) = 1.0;
  } else {
    L(kOne, kOne) = 1.0;
    L(kTwo, kTwo) = -1.0;
  }
  return L;
}

double max_lindblad_step(const EffectiveParams& params, const OverhauserFields& fields) {
  const double omega = std::max({std::abs(params.Delta), std::abs(params.J),
                                 fields.electron1.norm() + fields.electron2.norm()});
  if (omega == 0.0) return std::numeric_limits<double>::infinity();
  return 0.05 * PhysicalConstants::hbar / omega;
}

void check_density_matrix(const ManifoldMatrix& rho, double trace_tol, double hermitian_tol,
                          double positivity_tol) {
  const cplx tr = rho.trace();
  if (std::abs(tr - 1.0) > trace_tol) throw IntegratorFailure("trace drifted to " + std::to_string(tr.real()));
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > hermitian_tol)
    throw IntegratorFailure("density matrix lost Hermiticity");
  Eigen::SelfAdjointEigenSolver<ManifoldMatrix> eig(rho, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -positivity_tol)
    throw IntegratorFailure("negative eigenvalue " + std::to_string(eig.eigenvalues().minCoeff()));
}

ManifoldMatrix evolve_lindblad(const ManifoldMatrix& rho, const EffectiveParams& params,
                               const OverhauserFields& fields, double dephasing_rate, double t, double dt,
                               const LindbladOptions& options) {
  if (!(t >= 0.0)) throw InvalidArgument("evolution time must be >= 0");
  if (!(dephasing_rate >= 0.0)) throw InvalidArgument("dephasing rate must be >= 0");
  if (t == 0.0) return rho;
  if (!(dt > 0.0)) throw InvalidArgument("time step must be > 0");
  const double limit = max_lindblad_step(params, fields);
  if (dt > limit * (1.0 + 1e-12))
    throw InvalidArgument("time step " + std::to_string(dt) + " ps exceeds the resolution limit " +
                          std::to_string(limit) + " ps");

  const ManifoldMatrix H = build_noisy_hamiltonian(params, fields);
  const ManifoldMatrix L = dephasing_operator(options.dephasing);
  double h = std::min(dt, t);
  if (dephasing_rate > 0.0) h = std::min(h, 0.05 / dephasing_rate);
  long steps = static_cast<long>(std::ceil(t / h - 1e-9));

  ManifoldMatrix coarse = rk4(rho, H, L, dephasing_rate, t, steps);
  for (int r = 0; r < options.max_refinements; ++r) {
    steps *= 2;
    ManifoldMatrix fine = rk4(rho, H, L, dephasing_rate, t, steps);
    const double err = (fine - coarse).cwiseAbs().maxCoeff();
    if (err <= options.tolerance) {
      check_density_matrix(fine);
      return fine;
    }
    coarse = std::move(fine);
  }
  throw IntegratorFailure("step halving did not reach tolerance " + std::to_string(options.tolerance));
}

FilterCurve ensemble_filter_curve(const EffectiveParams& params, const NoiseConfig& config,
                                  const std::vector<double>& t_grid) {
  config.validate();
  check_grid(t_grid);
  const int shots = shot_count(config);
  const std::size_t T = t_grid.size();
  std::vector<double> p(static_cast<std::size_t>(shots) * T);

  const ManifoldVector psi0 = ManifoldState::injected().amplitudes;
  for_each_shot(config, [&](int s, const OverhauserFields& fields) {
    ShotPropagator prop(params, fields, config);
    double* row = p.data() + static_cast<std::size_t>(s) * T;
    if (prop.spectral()) {
      for (std::size_t k = 0; k < T; ++k) row[k] = at_b(prop.advance(psi0, t_grid[k]));
    } else {
      ManifoldMatrix rho = psi0 * psi0.adjoint();
      double t = 0.0;
      for (std::size_t k = 0; k < T; ++k) {
        rho = prop.advance(rho, t_grid[k] - t);
        t = t_grid[k];
        row[k] = at_b(rho);
      }
    }
  });

  FilterCurve out;
  out.t = t_grid;
  out.mean.assign(T, 0.0);
  out.std_error.assign(T, 0.0);
  for (std::size_t k = 0; k < T; ++k) {
    double sum = 0.0;
    for (int s = 0; s < shots; ++s) sum += p[static_cast<std::size_t>(s) * T + k];
    const double mean = sum / shots;
    double var = 0.0;
    for (int s = 0; s < shots; ++s) {
      const double d = p[static_cast<std::size_t>(s) * T + k] - mean;
      var += d * d;
    }
    out.mean[k] = mean;
    out.std_error[k] = shots > 1 ? std::sqrt(var / (shots - 1) / shots) : 0.0;
  }
  return out;
}

CoherenceCurve ensemble_coherence(const EffectiveParams& params, const NoiseConfig& config,
                                  const std::vector<double>& t_grid) {
  config.validate();
  check_grid(t_grid);
  const int shots = shot_count(config);
  const std::size_t T = t_grid.size();
  // ρ_13 and ρ_23 per shot and time.
  std::vector<cplx> c(static_cast<std::size_t>(shots) * T * 2);

  const ManifoldVector psi0 = ManifoldState::injected().amplitudes;
  for_each_shot(config, [&](int s, const OverhauserFields& fields) {
    ShotPropagator prop(params, fields, config);
    cplx* row = c.data() + static_cast<std::size_t>(s) * T * 2;
    if (prop.spectral()) {
      for (std::size_t k = 0; k < T; ++k) {
        const ManifoldVector psi = prop.advance(psi0, t_grid[k]);
        row[2 * k] = psi(kOne) * std::conj(psi(kThree));
        row[2 * k + 1] = psi(kTwo) * std::conj(psi(kThree));
      }
    } else {
      ManifoldMatrix rho = psi0 * psi0.adjoint();
      double t = 0.0;
      for (std::size_t k = 0; k < T; ++k) {
        rho = prop.advance(rho, t_grid[k] - t);
        t = t_grid[k];
        row[2 * k] = rho(kOne, kThree);
        row[2 * k + 1] = rho(kTwo, kThree);
      }
    }
  });

  CoherenceCurve out;
  out.t = t_grid;
  out.value.assign(T, 0.0);
  const ManifoldState initial = ManifoldState::injected();
  for (std::size_t k = 0; k < T; ++k) {
    cplx m1 = 0.0, m2 = 0.0;
    for (int s = 0; s < shots; ++s) {
      m1 += c[(static_cast<std::size_t>(s) * T + k) * 2];
      m2 += c[(static_cast<std::size_t>(s) * T + k) * 2 + 1];
    }
    m1 /= static_cast<double>(shots);
    m2 /= static_cast<double>(shots);
    const ManifoldVector ideal = evolve_ideal(initial, params, t_grid[k]).amplitudes;
    const cplx i1 = ideal(kOne) * std::conj(ideal(kThree));
    const cplx i2 = ideal(kTwo) * std::conj(ideal(kThree));
    out.value[k] = std::real(m1 * std::conj(i1) + m2 * std::conj(i2)) / (std::norm(i1) + std::norm(i2));
  }
  return out;
}

CoherenceFit fit_gaussian_decay(const CoherenceCurve& curve, double floor) {
  double num = 0.0, den = 0.0, lowest = 1.0;
  CoherenceFit fit;
  for (std::size_t k = 0; k < curve.t.size(); ++k) {
    const double t = curve.t[k], v = curve.value[k];
    if (t <= 0.0 || v < floor) continue;
    const double t2 = t * t;
    num += t2 * std::log(v);
    lowest = std::min(lowest, v);
    den += t2 * t2;
    ++fit.points;
  }
  // Round-off wiggle on a flat curve is not a decay.
  if (fit.points == 0 || num >= 0.0 || lowest > 1.0 - 1e-9) throw ConvergenceFailure("no decaying points above the fit floor", 0.0);
  fit.omega = std::sqrt(-2.0 * num / den);
  fit.t_1e = std::sqrt(2.0) / fit.omega;
  fit.t_2pi = 2.0 * PhysicalConstants::pi / fit.omega;
  return fit;
}

RusRecord repeat_until_success(const EffectiveParams& params, const NoiseConfig& config, RusInput input,
                               int max_rounds) {
  config.validate();
  if (max_rounds < 1) throw InvalidArgument("max_rounds must be >= 1");
  const double tstar = t_star(params);
  ManifoldState start;
  switch (input) {
    case RusInput::Injected: start = ManifoldState::injected(); break;
    case RusInput::Singlet: start = ManifoldState::basis(1); break;
    case RusInput::Triplet: start = ManifoldState::basis(3); break;
  }
  const ManifoldMatrix rho0 = start.density();
  const ManifoldMatrix pb = charge_at_b_projector();
  const ManifoldMatrix pn = ManifoldMatrix::Identity() - pb;
  const ManifoldMatrix ps = singlet_projector();
  const double singlet0 = (ps * rho0).trace().real();

  const int shots = shot_count(config);
  const auto R = static_cast<std::size_t>(max_rounds);
  // Per shot and round: detection, survival, remaining singlet weight.
  std::vector<double> acc(static_cast<std::size_t>(shots) * R * 3);
  for_each_shot(config, [&](int s, const OverhauserFields& fields) {
    ShotPropagator prop(params, fields, config);
    ManifoldMatrix rho = rho0;  // unnormalized no-detection branch
    double* row = acc.data() + static_cast<std::size_t>(s) * R * 3;
    for (std::size_t r = 0; r < R; ++r) {
      rho = prop.advance(rho, tstar);
      row[3 * r] = (pb * rho).trace().real();
      rho = pn * rho * pn;
      row[3 * r + 1] = rho.trace().real();
      row[3 * r + 2] = (ps * rho).trace().real();
    }
  });

  RusRecord out;
  double survive_prev = 1.0;
  for (std::size_t r = 0; r < R; ++r) {
    double d = 0.0, surv = 0.0, sing = 0.0;
    for (int s = 0; s < shots; ++s) {
      const double* row = acc.data() + static_cast<std::size_t>(s) * R * 3;
      d += row[3 * r];
      surv += row[3 * r + 1];
      sing += row[3 * r + 2];
    }
    d /= shots;
    surv /= shots;
    sing /= shots;
    out.detection.push_back(survive_prev > 0.0 ? d / survive_prev : 0.0);
    out.survival.push_back(surv);
    out.cumulative_miss.push_back(singlet0 > 0.0 ? sing / singlet0 : 0.0);
    survive_prev = surv;
  }
  return out;
}

PovmSummary povm_summary(const EffectiveParams& params, const NoiseConfig& config) {
  config.validate();
  const double tstar = t_star(params);
  const int shots = shot_count(config);
  std::vector<double> hits(static_cast<std::size_t>(shots) * 2);
  const ManifoldMatrix singlet = ManifoldState::basis(1).density();
  const ManifoldMatrix triplet = ManifoldState::basis(3).density();
  for_each_shot(config, [&](int s, const OverhauserFields& fields) {
    ShotPropagator prop(params, fields, config);
    hits[2 * static_cast<std::size_t>(s)] = at_b(prop.advance(singlet, tstar));
    hits[2 * static_cast<std::size_t>(s) + 1] = at_b(prop.advance(triplet, tstar));
  });
  PovmSummary out{0.0, 0.0};
  for (int s = 0; s < shots; ++s) {
    out.p_detect_singlet += hits[2 * static_cast<std::size_t>(s)];
    out.p_detect_triplet += hits[2 * static_cast<std::size_t>(s) + 1];
  }
  out.p_detect_singlet /= shots;
  out.p_detect_triplet /= shots;
  return out;
}

}  // namespace stf
