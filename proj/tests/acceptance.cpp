// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "stf/ci_engine.hpp"
#include "stf/effective_model.hpp"
#include "stf/errors.hpp"
#include "stf/grid_oracle.hpp"
#include "stf/noise_dynamics.hpp"
#include "stf/protocol_sim.hpp"

using namespace stf;
namespace fs = std::filesystem;

namespace {

constexpr double kHbar = PhysicalConstants::hbar;
constexpr double kPi = PhysicalConstants::pi;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string format(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> linspace(double hi, int n) {
  std::vector<double> t(n);
  for (int k = 0; k < n; ++k) t[k] = hi * k / (n - 1);
  return t;
}

struct Row {
  double L, E_hf, Delta, J, alpha2, beta2;
};

std::vector<Row> table_rows() {
  std::vector<Row> rows;
  const cli::json config = cli::default_config();
  for (const auto& r : config["table"]["rows"])
    rows.push_back({r["L_nm"].get<double>(), r["E_hf_ueV"].get<double>(), r["Delta_meV"].get<double>(),
                    r["J_meV"].get<double>(), r["alpha2"].get<double>(), r["beta2"].get<double>()});
  if (rows.size() != 5) throw InvalidArgument("expected five table rows");
  return rows;
}

EffectiveParams row_params(const Row& r) { return EffectiveParams::from_delta_j(0.0, r.Delta, r.J); }

const Row& row_at(double L) {
  static const auto rows = table_rows();
  for (const auto& r : rows)
    if (r.L == L) return r;
  throw InvalidArgument("no table row for L");
}

// --- 1-4: analytic dynamics ----------------------------------------------------

Verdict analytic_dynamics() {
  double worst = 0.0;
  for (const Row& r : table_rows()) {
    const auto p = row_params(r);
    const double ts = t_star(p);
    const double dt = max_lindblad_step(p);
    ManifoldMatrix rho = ManifoldState::injected().density();
    double t = 0.0;
    for (double tk : linspace(4.0 * ts, 81)) {
      rho = evolve_lindblad(rho, p, {}, 0.0, tk - t, dt);
      t = tk;
      const double pb = (charge_at_b_projector() * rho).trace().real();
      worst = std::max(worst, std::abs(pb - p_singlet(tk, p)));
    }
  }
  return {worst <= 1e-8, format("max |p_lindblad - p_singlet| = %.3e over 5 rows (tol 1e-8)", worst)};
}

Verdict j_independence() {
  double worst = 0.0;
  for (const Row& r : table_rows()) {
    const auto a = EffectiveParams::from_delta_j(0.0, r.Delta, r.J);
    const auto b = EffectiveParams::from_delta_j(0.0, r.Delta, 10.0 * r.J);
    const double ts = t_star(a);
    for (double t : linspace(8.0 * ts, 1001)) {
      worst = std::max(worst, std::abs(p_singlet(t, a) - p_singlet(t, b)));
      const auto sa = evolve_ideal(ManifoldState::injected(), a, t);
      const auto sb = evolve_ideal(ManifoldState::injected(), b, t);
      worst = std::max(worst, std::abs(sa.probability(2) - sb.probability(2)));
    }
  }
  return {worst <= 1e-12, format("max |p(J) - p(10J)| = %.3e (tol 1e-12)", worst)};
}

Verdict revival_identities() {
  double worst = 0.0;
  for (const Row& r : table_rows()) {
    const auto p = row_params(r);
    worst = std::max(worst, std::abs(p_initial(0.0, p) - 1.0));
    for (double J : {r.J, 0.0, 3.7 * r.Delta, -11.0 * r.Delta})
      worst = std::max(worst, std::abs(p_initial(t_star(p), EffectiveParams::from_delta_j(0.0, r.Delta, J)) - 0.25));
    const auto j0 = EffectiveParams::from_delta_j(0.0, r.Delta, 0.0);
    worst = std::max(worst, std::abs(p_initial(2.0 * kPi * kHbar / r.Delta, j0) - 1.0));
  }
  return {worst <= 1e-12, format("max deviation = %.3e (tol 1e-12)", worst)};
}

Verdict gate_error() {
  const Row& r = row_at(200);
  const auto p = EffectiveParams::from_delta_j(0.0, r.Delta, -0.30096 * r.Delta);
  const double ts = t_star(p);
  double first = 0.0, global = 0.0;
  for (double sign : {1.0, -1.0}) {
    GatedInitialState g;
    g.alpha = std::sqrt(r.alpha2);
    g.beta = sign * std::sqrt(r.beta2);
    for (double t : linspace(2.0 * ts, 20001)) first = std::max(first, p_singlet_gated(t, g, p));
    for (double t : linspace(40.0 * ts, 200001)) global = std::max(global, p_singlet_gated(t, g, p));
  }
  const bool pass = std::abs(first - 0.445) <= 0.005;
  return {pass, format("max P2e over [0,2t*] = %.5f (target 0.445 +- 0.005); over [0,40t*] = %.5f", first, global)};
}

// --- 5-6: noise ---------------------------------------------------------------

Verdict hyperfine_timescale() {
  const Row& r = row_at(400);
  const auto p = row_params(r);
  NoiseConfig c;
  c.E_hf = r.E_hf;
  c.samples = 10000;
  c.seed = 2024;
  const double reference = 2.0 * kPi * kHbar / (r.E_hf * 1e-3);
  const auto coh = ensemble_coherence(p, c, linspace(0.5 * reference, 201));
  const auto fit = fit_gaussian_decay(coh);
  const double ts = t_star(p);
  const auto curve = ensemble_filter_curve(p, c, linspace(2.0 * ts, 201));
  double first = 0.0;
  for (double v : curve.mean) first = std::max(first, v);
  const double rel = std::abs(fit.t_2pi - reference) / reference;
  const bool pass = rel <= 0.05 && first >= 0.45 && ts < 0.01 * reference;
  return {pass, format("t_2pi = %.1f ps vs 2*pi*hbar/E_hf = %.1f ps (rel %.3f, tol 0.05); t* = %.2f ps; "
                       "first maximum %.4f (>= 0.45)",
                       fit.t_2pi, reference, rel, ts, first)};
}

Verdict dephasing_limit() {
  const auto p = row_params(row_at(400));
  const double ts = t_star(p);
  NoiseConfig c;
  c.dephasing_rate = 50.0 / ts;
  const ManifoldMatrix rho = evolve_lindblad(ManifoldState::injected().density(), p, {}, c.dephasing_rate, ts,
                                             max_lindblad_step(p));
  const double pb = (charge_at_b_projector() * rho).trace().real();
  const auto rus = repeat_until_success(p, c, RusInput::Injected, 5);
  const auto& m = rus.cumulative_miss;
  bool geometric = m[0] > 0.0;
  std::vector<double> ratio;
  for (std::size_t k = 1; k < m.size(); ++k) ratio.push_back(m[k] / m[k - 1]);
  for (double q : ratio) geometric = geometric && q < 1.0 && std::abs(q - ratio[0]) <= 0.05 * ratio[0];
  const bool pass = std::abs(pb - 0.25) <= 0.01 && geometric;
  return {pass, format("p(b) at t* = %.5f (0.25 +- 0.01); miss = %.4g %.4g %.4g %.4g %.4g", pb, m[0], m[1], m[2],
                       m[3], m[4])};
}

// --- 7-8: protocol ------------------------------------------------------------

Verdict protocol_statistics() {
  bool pass = true;
  std::string detail;
  double worst_fid = 0.0;
  for (ChainMode mode : {ChainMode::Swap, ChainMode::Aklt}) {
    for (int n = 1; n <= 3; ++n) {
      ChainConfig c;
      c.n_dots = n;
      c.mode = mode;
      c.trials = 100000;
      c.seed = 31 + n;
      const double q = mode == ChainMode::Swap ? std::pow(0.25, n) : std::pow(0.75, n);
      ChainStatistics s;
      if (mode == ChainMode::Swap) {
        s = run_swap_chain(c);
        worst_fid = std::max({worst_fid, std::abs(1.0 - s.mean_fidelity), std::abs(1.0 - s.min_fidelity)});
      } else {
        s = run_aklt_chain(c).statistics;
      }
      const double sigma = std::sqrt(q * (1.0 - q) / c.trials);
      const double z = (s.rate - q) / sigma;
      pass = pass && std::abs(z) <= 3.0;
      detail += format("%s N=%d %.5f (z=%+.2f) ", mode == ChainMode::Swap ? "swap" : "aklt", n, s.rate, z);
    }
  }
  pass = pass && worst_fid <= 1e-10;
  return {pass, detail + format("| 1-F = %.2e", worst_fid)};
}

Verdict aklt_verification() {
  double worst = 0.0, min_random = INFINITY;
  for (int n = 1; n <= 4; ++n) {
    worst = std::max(worst, std::abs(aklt_energy(aklt_branch(n).state, n)));
    StreamRng rng(99, static_cast<std::uint64_t>(n));
    std::normal_distribution<double> nd;
    StateVector r(Eigen::Index{1} << (2 * n + 2));
    for (auto& x : r) x = nd(rng);
    min_random = std::min(min_random, aklt_energy(r, n));
  }
  return {worst < 1e-10 && min_random > 0.05,
          format("max branch energy = %.2e (< 1e-10); min random-state energy = %.3f (> 0.05)", worst, min_random)};
}

// --- 9-10: CI ---------------------------------------------------------------

CiSettings default_ci(double L) {
  const auto cfg = cli::default_config();
  CiSettings s;
  s.geometry.side_length = L;
  s.n_max = cfg["basis"]["n_max"].get<int>();
  return s;
}

Verdict ci_noninteracting() {
  CiSettings s = default_ci(100.0);
  s.coulomb = false;
  const CiModel model(s);
  const double K = model.kinetic_unit();
  double worst = 0.0;
  for (Sector sec : {Sector::Symmetric, Sector::Antisymmetric}) {
    const auto& basis = model.basis(sec);
    std::vector<double> exact;
    for (const auto& [p, q] : basis.pairs) exact.push_back(K * (basis.orbitals[p].weight() + basis.orbitals[q].weight()));
    std::sort(exact.begin(), exact.end());
    const auto spec = model.spectrum(sec, 20);
    for (int i = 0; i < 20; ++i) worst = std::max(worst, std::abs(spec.eigenvalues(i) - exact[i]) / exact[i]);
  }
  return {worst <= 1e-10, format("max relative deviation from box sums = %.2e (tol 1e-10)", worst)};
}

Verdict ci_grid_oracle(const CiModel& model100) {
  Geometry g;
  g.side_length = 50.0;
  const double ci = model100.resized(50.0).spectrum(Sector::Symmetric, 1).eigenvalues(0);
  const int G[3] = {12, 16, 20};
  double h[3], e[3];
  for (int i = 0; i < 3; ++i) {
    h[i] = 50.0 / (G[i] + 1);
    e[i] = grid_oracle_spectrum(g, Material::gaas(), G[i], 1)(0);
  }
  const double extrap = richardson3(h, e);
  const double rel = std::abs(ci - extrap) / extrap;
  return {rel <= 0.01, format("CI %.5f meV vs extrapolated grid %.5f meV (G=12,16,20: %.4f %.4f %.4f); rel %.4f (tol 0.01)",
                              ci, extrap, e[0], e[1], e[2], rel)};
}

Verdict ci_variational_scaling(const CiModel& model100) {
  bool monotone = true;
  std::string energies;
  double previous = INFINITY;
  const int top = model100.settings().n_max;
  for (int n = 3; n <= top; ++n) {
    const double e = n == top ? model100.spectrum(Sector::Symmetric, 1).eigenvalues(0)
                              : CiModel([&] {
                                  auto s = model100.settings();
                                  s.n_max = n;
                                  return s;
                                }()).spectrum(Sector::Symmetric, 1).eigenvalues(0);
    monotone = monotone && e <= previous + 1e-12;
    energies += format("%.6f ", e);
    previous = e;
  }
  // H(L) = (100/L)²·T(100) + (100/L)·V(100) for the kinetic and Coulomb parts at L = 100.
  const Eigen::MatrixXd t100 = model100.kinetic_unit() * model100.blocks(Sector::Symmetric).kinetic;
  const Eigen::MatrixXd v100 = model100.coulomb_unit() * model100.blocks(Sector::Symmetric).coulomb;
  double worst = 0.0;
  for (double L : {50.0, 200.0, 400.0}) {
    const double s = 100.0 / L;
    const Eigen::MatrixXd h = model100.resized(L).hamiltonian(Sector::Symmetric);
    worst = std::max(worst, (h - s * s * t100 - s * v100).cwiseAbs().maxCoeff() / h.cwiseAbs().maxCoeff());
  }
  return {monotone && worst <= 1e-12,
          format("ground energy vs n_max 3..%d: %s; scaling residual %.2e (tol 1e-12)", top, energies.c_str(), worst)};
}

struct SizeRun {
  double L;
  DotAnalysis analysis;
  double triplet_split = 0.0;
  double corner = 0.0;
  std::vector<Point> maxima;
};

Verdict ci_trends(const std::vector<SizeRun>& runs) {
  bool pass = true;
  std::string detail;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& p = runs[i].analysis.params;
    const double rel_split = runs[i].triplet_split / p.Delta;
    pass = pass && runs[i].analysis.manifold_valid && rel_split <= 1e-3;
    if (i > 0) {
      const auto& q = runs[i - 1].analysis.params;
      pass = pass && p.Delta < q.Delta && std::abs(p.J) < std::abs(q.J);
    }
    detail += format("L=%g: Delta=%.4g J=%.4g split/Delta=%.1e%s; ", runs[i].L, p.Delta, p.J, rel_split,
                     runs[i].analysis.converged ? "" : " (not converged)");
  }
  return {pass, detail};
}

Verdict wigner_trend(const std::vector<SizeRun>& runs) {
  bool increasing = true;
  std::string detail;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (i > 0) increasing = increasing && runs[i].corner > runs[i - 1].corner;
    detail += format("L=%g corner %.4f; ", runs[i].L, runs[i].corner);
  }
  const SizeRun* largest = nullptr;
  for (const auto& r : runs)
    if (r.analysis.converged) largest = &r;
  bool four = false;
  if (largest) {
    int quadrants[4] = {0, 0, 0, 0};
    const double half = largest->L / 2.0;
    for (const auto& m : largest->maxima) ++quadrants[(m.x > half ? 1 : 0) + (m.y > half ? 2 : 0)];
    four = largest->maxima.size() == 4 && quadrants[0] == 1 && quadrants[1] == 1 && quadrants[2] == 1 &&
           quadrants[3] == 1;
    detail += format("largest converged L=%g has %zu maxima", largest->L, largest->maxima.size());
  } else {
    detail += "no converged L";
  }
  return {increasing && four, detail};
}

// --- 11: determinism ----------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "stfilter");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

Verdict determinism() {
  const std::string params = "params={\"Delta_meV\":0.0211,\"J_meV\":-0.00505,\"alpha2\":0.42,\"beta2\":0.00121}";
  const std::vector<std::vector<std::string>> commands = {
      {"spectrum", "--n-max", "5", "--L", "200"},
      {"density", "--n-max", "5", "--L", "200", "--set", "density.resolution=32"},
      {"dynamics", "--set", params},
      {"noise", "--set", params, "--set", "noise.samples=100", "--set", "noise.points=51", "--set",
       "noise.coherence_points=51"},
      {"noise", "--set", params, "--set", "noise.samples=4", "--set", "noise.points=11", "--set",
       "noise.dephasing_rate_per_ps=0.01", "--set", "noise.coherence_t_max_ps=200", "--set",
       "noise.coherence_points=11", "--set", "noise.rounds=2"},
      {"protocol", "--set", "protocol.mode=\"both\"", "--set", "protocol.trials=2000", "--set", "protocol.povm=\"noise\"",
       "--set", params, "--set", "noise.samples=50"},
      {"table", "--n-max", "4", "--set", "table.compute_max_L_nm=200"},
  };
  const fs::path root = "acceptance_determinism";
  fs::remove_all(root);
  std::size_t files = 0;
  std::string mismatch;
  for (const auto& cmd : commands) {
    for (const char* fmt : {"csv", "json"}) {
      std::vector<fs::path> dirs;
      for (int rep = 0; rep < 2; ++rep) {
        const fs::path dir =
            root / (cmd[0] + "_" + std::to_string(&cmd - commands.data()) + "_" + fmt + "_" + std::to_string(rep));
        auto args = cmd;
        args.insert(args.end(), {"--out", dir.string(), "--seed", "11", "--format", fmt});
        if (run_cli(args) != 0) return {false, "command '" + cmd[0] + "' failed"};
        dirs.push_back(dir);
      }
      for (const auto& entry : fs::directory_iterator(dirs[0])) {
        const fs::path other = dirs[1] / entry.path().filename();
        ++files;
        if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) mismatch += entry.path().string() + " ";
      }
    }
  }
  return {mismatch.empty(), format("%zu output files compared across %zu runs x 2 formats", files, commands.size()) +
                                (mismatch.empty() ? "" : "; differing: " + mismatch)};
}

}  // namespace

// Optional arguments select criterion numbers; default runs all.
int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  auto selected = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  int failures = 0;
  // budget in seconds, 0 when the criterion states none
  auto report = [&](int id, const char* name, const std::function<Verdict()>& body, double budget = 0.0) {
    if (!selected(id)) return;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = body();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budget > 0.0 && secs > budget) {
      v.pass = false;
      v.detail += format(" [over budget %.0f s]", budget);
    }
    if (!v.pass) ++failures;
    std::printf("[%s] %2d %s: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report(1, "analytic dynamics vs Lindblad", analytic_dynamics, 10.0);
  report(2, "J independence", j_independence);
  report(3, "revival and decay identities", revival_identities);
  report(4, "gate-error formula", gate_error, 1.0);
  report(5, "hyperfine timescale", hyperfine_timescale, 300.0);
  report(6, "dephasing limit", dephasing_limit);
  report(7, "protocol statistics", protocol_statistics, 120.0);
  report(8, "AKLT verification", aklt_verification, 60.0);

  const auto ci_start = std::chrono::steady_clock::now();
  std::optional<CiModel> model;
  std::vector<SizeRun> runs;
  std::string setup_error;
  try {
    if (!selected(9) && !selected(10)) throw std::runtime_error("skipped");
    model.emplace(default_ci(100.0));
    for (double L : {100.0, 200.0, 400.0}) {
      SizeRun r;
      r.L = L;
      const CiModel m = model->resized(L);
      r.analysis = analyze_dot(m, 10, true);
      r.triplet_split = r.analysis.triplet.eigenvalues(1) - r.analysis.triplet.eigenvalues(0);
      const auto grid = charge_density(m, r.analysis.singlet, 0, 64);
      r.corner = corner_fraction(grid);
      r.maxima = local_maxima(grid);
      runs.push_back(std::move(r));
    }
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  auto with_model = [&](auto fn) -> std::function<Verdict()> {
    return [&, fn]() -> Verdict {
      if (!setup_error.empty()) return {false, "CI setup failed: " + setup_error};
      return fn();
    };
  };
  report(9, "CI (a) noninteracting box spectrum", ci_noninteracting);
  report(9, "CI (b) ground energy vs grid oracle at L=50", with_model([&] { return ci_grid_oracle(*model); }));
  report(9, "CI (c) variational and scaling", with_model([&] { return ci_variational_scaling(*model); }));
  report(9, "CI (d) Delta, |J| trends and triplet degeneracy", with_model([&] { return ci_trends(runs); }));
  report(10, "Wigner-molecule trend", with_model([&] { return wigner_trend(runs); }));
  const double ci_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - ci_start).count();
  const bool ci_in_budget = ci_secs <= 900.0;
  if (!ci_in_budget) ++failures;
  if (selected(9) || selected(10))
    std::printf("[%s]  9 CI runtime: criteria 9-10 took %.1f s (budget 900 s)\n", ci_in_budget ? "PASS" : "FAIL",
              ci_secs);

  report(11, "determinism", determinism);

  std::printf("%s: %d failing\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
