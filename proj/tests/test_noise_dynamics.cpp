#include <doctest.h>

#include <cmath>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "stf/errors.hpp"
#include "stf/noise_dynamics.hpp"
#include "stf/units.hpp"

using namespace stf;

namespace {

const EffectiveParams kL400 = EffectiveParams::from_delta_j(0.0, 2.11e-2, -5.05e-3);

// b₁·σ⊗1 + 1⊗b₂·σ in |↑↑⟩,|↑↓⟩,|↓↑⟩,|↓↓⟩, rotated to ψ⁻, ψ⁺, ↑↑, ↓↓.
Eigen::Matrix4cd brute_force_field(const Eigen::Vector3d& b1, const Eigen::Vector3d& b2) {
  Eigen::Matrix2cd sx, sy, sz, id = Eigen::Matrix2cd::Identity();
  sx << 0, 1, 1, 0;
  sy << 0, cplx(0, -1), cplx(0, 1), 0;
  sz << 1, 0, 0, -1;
  const Eigen::Matrix2cd s1 = b1.x() * sx + b1.y() * sy + b1.z() * sz;
  const Eigen::Matrix2cd s2 = b2.x() * sx + b2.y() * sy + b2.z() * sz;
  const Eigen::Matrix4cd h = Eigen::kroneckerProduct(s1, id).eval() + Eigen::kroneckerProduct(id, s2).eval();
  const double r = 1.0 / std::sqrt(2.0);
  Eigen::Matrix4cd u = Eigen::Matrix4cd::Zero();
  u(1, 0) = r;
  u(2, 0) = -r;
  u(1, 1) = r;
  u(2, 1) = r;
  u(0, 2) = 1.0;
  u(3, 3) = 1.0;
  return u.adjoint() * h * u;
}

std::vector<double> grid(double t_max, int n) {
  std::vector<double> t(n);
  for (int k = 0; k < n; ++k) t[k] = t_max * k / (n - 1);
  return t;
}

}  // namespace

TEST_CASE("field component spreads per convention") {
  NoiseConfig c;
  c.E_hf = 0.6;
  c.convention = FieldConvention::RmsMagnitude;
  CHECK(c.component_sigma_meV() == doctest::Approx(0.6e-3 / std::sqrt(3.0)));
  c.convention = FieldConvention::PerComponent;
  CHECK(c.component_sigma_meV() == doctest::Approx(0.6e-3));
  c.convention = FieldConvention::ZeemanPerComponent;
  CHECK(c.component_sigma_meV() == doctest::Approx(0.3e-3));
}

TEST_CASE("Overhauser sampling") {
  NoiseConfig c;
  StreamRng rng(1, 0);
  const auto zero = sample_overhauser(c, rng);
  CHECK(zero.electron1.norm() == 0.0);
  CHECK(zero.electron2.norm() == 0.0);

  c.E_hf = 0.388;
  c.convention = FieldConvention::RmsMagnitude;
  double sum = 0.0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    StreamRng r(42, static_cast<std::uint64_t>(k));
    sum += sample_overhauser(c, r).electron1.squaredNorm();
  }
  CHECK(sum / n == doctest::Approx(0.388e-3 * 0.388e-3).epsilon(0.02));

  StreamRng a(9, 3), b(9, 3);
  const auto fa = sample_overhauser(c, a), fb = sample_overhauser(c, b);
  CHECK(fa.electron1 == fb.electron1);
  CHECK(fa.electron2 == fb.electron2);
  CHECK_FALSE(fa.electron1 == fa.electron2);
}

TEST_CASE("spin field operator against the product-basis construction") {
  const Eigen::Vector3d b1(0.3, -0.2, 0.7), b2(-0.1, 0.5, 0.2);
  OverhauserFields f{b1, b2};
  CHECK((spin_field_operator(f) - brute_force_field(b1, b2)).norm() < 1e-14);

  OverhauserFields uniform{{0, 0, 0.4}, {0, 0, 0.4}};
  const auto hu = spin_field_operator(uniform);
  CHECK(std::abs(hu(0, 1)) < 1e-15);
  CHECK(hu(2, 2).real() == doctest::Approx(0.8));
  CHECK(hu(3, 3).real() == doctest::Approx(-0.8));

  OverhauserFields opposite{{0, 0, 0.25}, {0, 0, -0.25}};
  const auto ho = spin_field_operator(opposite);
  CHECK(ho(0, 1).real() == doctest::Approx(0.5));
  CHECK(std::abs(ho(0, 0)) < 1e-15);
}

TEST_CASE("noisy Hamiltonian reduces to the ideal one without fields") {
  const auto h = build_noisy_hamiltonian(kL400, {});
  CHECK((h - hamiltonian_matrix(kL400)).norm() == 0.0);
  OverhauserFields f{{0.01, 0.0, 0.02}, {0.0, -0.03, 0.0}};
  const auto hn = build_noisy_hamiltonian(kL400, f);
  CHECK((hn - hn.adjoint()).norm() < 1e-15);
  // Spin fields do not move charge.
  const ManifoldMatrix pb = charge_at_b_projector();
  CHECK(((hn - hamiltonian_matrix(kL400)) * pb - pb * (hn - hamiltonian_matrix(kL400))).norm() < 1e-15);
}

TEST_CASE("closed-system Lindblad matches the analytic evolution") {
  const double ts = t_star(kL400);
  const double dt = max_lindblad_step(kL400);
  const ManifoldMatrix rho0 = ManifoldState::injected().density();
  for (double t : {0.0, 0.3 * ts, ts, 2.5 * ts, 4.0 * ts}) {
    const auto rho = evolve_lindblad(rho0, kL400, {}, 0.0, t, dt);
    const auto ideal = evolve_ideal(ManifoldState::injected(), kL400, t).density();
    CHECK((rho - ideal).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::abs(rho(1, 1).real() - p_singlet(t, kL400)) < 1e-8);
  }
}

TEST_CASE("dephasing drives the charge signal to one quarter") {
  const double ts = t_star(kL400);
  const ManifoldMatrix rho0 = ManifoldState::injected().density();
  const ManifoldMatrix pb = charge_at_b_projector();
  double previous = 1.0;
  for (double g : {0.0, 0.1, 1.0, 5.0, 50.0}) {
    const double gamma = g / ts;
    const auto rho = evolve_lindblad(rho0, kL400, {}, gamma, ts, max_lindblad_step(kL400));
    const double p = (pb * rho).trace().real();
    CHECK(p <= previous + 1e-12);
    previous = p;
    check_density_matrix(rho);
  }
  CHECK(previous == doctest::Approx(0.25).epsilon(0.01 / 0.25));
}

TEST_CASE("charge-basis dephasing freezes tunneling") {
  const double ts = t_star(kL400);
  LindbladOptions opt;
  opt.dephasing = DephasingBasis::Charge;
  const auto rho = evolve_lindblad(ManifoldState::injected().density(), kL400, {}, 50.0 / ts, ts,
                                   max_lindblad_step(kL400), opt);
  CHECK((charge_at_b_projector() * rho).trace().real() < 0.05);
}

TEST_CASE("Lindblad error paths") {
  const ManifoldMatrix rho0 = ManifoldState::injected().density();
  CHECK_THROWS_AS(evolve_lindblad(rho0, kL400, {}, 0.0, 10.0, 1e3), InvalidArgument);
  CHECK_THROWS_AS(evolve_lindblad(rho0, kL400, {}, 0.0, -1.0, 0.1), InvalidArgument);
  CHECK_THROWS_AS(evolve_lindblad(rho0, kL400, {}, -1.0, 1.0, 0.1), InvalidArgument);
  CHECK_THROWS_AS(check_density_matrix(2.0 * rho0), IntegratorFailure);
  ManifoldMatrix bad = ManifoldMatrix::Zero();
  bad(0, 0) = 1.5;
  bad(1, 1) = -0.5;
  CHECK_THROWS_AS(check_density_matrix(bad), IntegratorFailure);
  NoiseConfig c;
  c.samples = 0;
  CHECK_THROWS_AS(c.validate(), InvalidParams);
  c.samples = 10;
  c.E_hf = -1.0;
  CHECK_THROWS_AS(c.validate(), InvalidParams);
}

TEST_CASE("noise-free ensemble reproduces the analytic curve") {
  NoiseConfig c;
  const auto t = grid(4.0 * t_star(kL400), 41);
  const auto curve = ensemble_filter_curve(kL400, c, t);
  for (std::size_t k = 0; k < t.size(); ++k) {
    CHECK(curve.mean[k] == doctest::Approx(p_singlet(t[k], kL400)).epsilon(1e-12).scale(1.0));
    CHECK(curve.std_error[k] == 0.0);
  }
  c.integrator = ShotIntegrator::RK4;
  const auto rk = ensemble_filter_curve(kL400, c, t);
  for (std::size_t k = 0; k < t.size(); ++k)
    CHECK(rk.mean[k] == doctest::Approx(p_singlet(t[k], kL400)).epsilon(1e-8).scale(1.0));
  CHECK_THROWS_AS(ensemble_filter_curve(kL400, c, {1.0, 0.5}), InvalidArgument);
}

TEST_CASE("ensemble runs are reproducible and schedule independent") {
  NoiseConfig c;
  c.E_hf = 0.388;
  c.samples = 200;
  c.seed = 17;
  const auto t = grid(3000.0, 16);
  c.exec = Exec::Serial;
  const auto a = ensemble_filter_curve(kL400, c, t);
  c.exec = Exec::Parallel;
  const auto b = ensemble_filter_curve(kL400, c, t);
  CHECK(a.mean == b.mean);
  CHECK(a.std_error == b.std_error);
  c.seed = 18;
  const auto d = ensemble_filter_curve(kL400, c, t);
  CHECK(a.mean != d.mean);
}

TEST_CASE("hyperfine coherence decays on the nuclear timescale") {
  NoiseConfig c;
  c.E_hf = 0.388;
  c.samples = 2000;
  c.seed = 5;
  const auto curve = ensemble_coherence(kL400, c, grid(6000.0, 31));
  CHECK(curve.value[0] == doctest::Approx(1.0).epsilon(1e-12));
  const auto fit = fit_gaussian_decay(curve);
  const double reference = 2.0 * PhysicalConstants::pi * PhysicalConstants::hbar / 0.388e-3;
  CHECK(fit.t_2pi == doctest::Approx(reference).epsilon(0.1));
  CHECK(fit.points > 3);

  NoiseConfig quiet;
  const auto flat = ensemble_coherence(kL400, quiet, grid(6000.0, 11));
  for (double v : flat.value) CHECK(v == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_THROWS_AS(fit_gaussian_decay(flat), ConvergenceFailure);
}

TEST_CASE("repeat until success") {
  NoiseConfig c;
  SUBCASE("ideal dot detects the singlet in one round") {
    const auto r = repeat_until_success(kL400, c, RusInput::Injected, 4);
    CHECK(r.detection[0] == doctest::Approx(0.5).epsilon(1e-12));
    for (double m : r.cumulative_miss) CHECK(m == doctest::Approx(0.0).scale(1.0));
    CHECK(r.survival[0] == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("triplet is never detected") {
    const auto r = repeat_until_success(kL400, c, RusInput::Triplet, 3);
    for (double d : r.detection) CHECK(d == doctest::Approx(0.0).scale(1.0));
    for (double s : r.survival) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("strong dephasing halves the miss every round") {
    c.dephasing_rate = 50.0 / t_star(kL400);
    const auto r = repeat_until_success(kL400, c, RusInput::Singlet, 5);
    for (std::size_t k = 0; k < 5; ++k)
      CHECK(r.cumulative_miss[k] == doctest::Approx(std::pow(0.5, k + 1)).epsilon(0.02));
    for (std::size_t k = 1; k < 5; ++k) CHECK(r.cumulative_miss[k] < r.cumulative_miss[k - 1]);
  }
  CHECK_THROWS_AS(repeat_until_success(kL400, c, RusInput::Injected, 0), InvalidArgument);
}

TEST_CASE("POVM summary") {
  NoiseConfig c;
  const auto ideal = povm_summary(kL400, c);
  CHECK(ideal.p_detect_singlet == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ideal.p_detect_triplet == doctest::Approx(0.0).scale(1.0));
  c.dephasing_rate = 50.0 / t_star(kL400);
  const auto noisy = povm_summary(kL400, c);
  CHECK(noisy.p_detect_singlet == doctest::Approx(0.5).epsilon(0.02));
  CHECK(noisy.p_detect_triplet == doctest::Approx(0.0).scale(1.0));
}
