#include "stf/ci_engine.hpp"

#include <algorithm>
#include <cmath>

#include <lapacke.h>

#include "stf/errors.hpp"

namespace stf {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

double pair_norm(const std::pair<int, int>& p) { return p.first == p.second ? kInvSqrt2 : 1.0; }

double sector_sign(Sector s) { return s == Sector::Symmetric ? 1.0 : -1.0; }

Eigen::MatrixXd one_body_bd(const std::vector<BoxOrbital>& orbitals) {
  const auto n = static_cast<Eigen::Index>(orbitals.size());
  Eigen::MatrixXd u(n, n);
  for (Eigen::Index p = 0; p < n; ++p)
    for (Eigen::Index r = 0; r < n; ++r) u(p, r) = bd_quadrant_element(orbitals[p], orbitals[r]);
  return u;
}

// Coefficient matrix C with Ψ(r₁,r₂) = Σ C_pq φ_p(r₁) φ_q(r₂).
Eigen::MatrixXd coefficient_matrix(const TwoElectronBasis& basis, const Eigen::VectorXd& c) {
  const auto n = static_cast<Eigen::Index>(basis.orbitals.size());
  const double sign = sector_sign(basis.sector);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < basis.pairs.size(); ++k) {
    const auto [p, q] = basis.pairs[k];
    const double v = c(static_cast<Eigen::Index>(k));
    if (p == q) {
      m(p, p) += v;
    } else {
      m(p, q) += v * kInvSqrt2;
      m(q, p) += sign * v * kInvSqrt2;
    }
  }
  return m;
}

Eigen::VectorXd orbital_values(const std::vector<BoxOrbital>& orbitals, Point r, double L) {
  Geometry g;
  g.side_length = L;
  Eigen::VectorXd v(static_cast<Eigen::Index>(orbitals.size()));
  for (std::size_t k = 0; k < orbitals.size(); ++k) v(static_cast<Eigen::Index>(k)) = orbital_value(orbitals[k], r, g);
  return v;
}

double pair_amplitude(const TwoElectronBasis& basis, const Eigen::VectorXd& c, Point r1, Point r2, double L) {
  const Eigen::MatrixXd m = coefficient_matrix(basis, c);
  return orbital_values(basis.orbitals, r1, L).dot(m * orbital_values(basis.orbitals, r2, L));
}

}  // namespace

const char* to_string(Sector s) {
  return s == Sector::Symmetric ? "singlet" : "triplet";
}

TwoElectronBasis make_basis(Sector sector, int n_max, const Geometry& geometry, const Material& material,
                            double energy_cutoff) {
  geometry.validate();
  material.validate();
  TwoElectronBasis basis;
  basis.sector = sector;
  basis.orbitals = enumerate_orbitals(n_max);
  basis.energy_cutoff = energy_cutoff;
  const int n = static_cast<int>(basis.orbitals.size());
  for (int p = 0; p < n; ++p) {
    for (int q = (sector == Sector::Symmetric ? p : p + 1); q < n; ++q) {
      const double e = orbital_energy(basis.orbitals[p], geometry, material) +
                       orbital_energy(basis.orbitals[q], geometry, material);
      if (e <= energy_cutoff) basis.pairs.emplace_back(p, q);
    }
  }
  if (basis.pairs.empty()) throw InvalidArgument("energy cutoff leaves an empty two-electron basis");
  return basis;
}

double bd_quadrant_element(BoxOrbital p, BoxOrbital r) {
  const double x_lo = half_interval_overlap(p.n, r.n);
  const double y_lo = half_interval_overlap(p.m, r.m);
  const double x_hi = (p.n == r.n ? 1.0 : 0.0) - x_lo;
  const double y_hi = (p.m == r.m ? 1.0 : 0.0) - y_lo;
  // b: x > L/2, y < L/2;  d: x < L/2, y > L/2
  return x_hi * y_lo + x_lo * y_hi;
}

HamiltonianBlocks assemble_blocks(const TwoElectronBasis& basis, const CoulombTable& table, Exec exec) {
  const auto n = static_cast<Eigen::Index>(basis.size());
  const auto& orb = basis.orbitals;
  const double sign = sector_sign(basis.sector);
  const Eigen::MatrixXd u = one_body_bd(orb);

  HamiltonianBlocks b;
  b.kinetic = Eigen::MatrixXd::Zero(n, n);
  b.coulomb.resize(n, n);
  b.gate.resize(n, n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [p, q] = basis.pairs[static_cast<std::size_t>(i)];
    b.kinetic(i, i) = orb[p].weight() + orb[q].weight();
  }

  auto one_body = [&](int p, int q, int r, int s) {
    return (q == s ? u(p, r) : 0.0) + (p == r ? u(q, s) : 0.0);
  };

  for_each_index(exec, static_cast<std::size_t>(n), [&](std::size_t row) {
    const auto i = static_cast<Eigen::Index>(row);
    const auto& P = basis.pairs[row];
    const auto [p, q] = P;
    for (Eigen::Index j = i; j < n; ++j) {
      const auto& R = basis.pairs[static_cast<std::size_t>(j)];
      const auto [r, s] = R;
      const double norm = pair_norm(P) * pair_norm(R);
      const double v = norm * (table.element(orb[p], orb[q], orb[r], orb[s]) +
                               sign * table.element(orb[p], orb[q], orb[s], orb[r]));
      const double g = norm * (one_body(p, q, r, s) + sign * one_body(p, q, s, r));
      b.coulomb(i, j) = b.coulomb(j, i) = v;
      b.gate(i, j) = b.gate(j, i) = g;
    }
  });
  return b;
}

CiSpectrum solve_spectrum(const Eigen::MatrixXd& H, int k, Sector sector) {
  const auto n = static_cast<lapack_int>(H.rows());
  if (H.rows() != H.cols() || n == 0) throw InvalidArgument("Hamiltonian must be square and nonempty");
  if (k < 1 || k > n) throw InvalidArgument("requested eigenpair count must lie in [1, dim(H)]");

  Eigen::MatrixXd work = H;
  Eigen::VectorXd w(n);
  Eigen::MatrixXd z(n, k);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(k));
  lapack_int found = 0;
  const double abstol = 2.0 * LAPACKE_dlamch('S');
  const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'U', n, work.data(), n, 0.0, 0.0, 1, k,
                                         abstol, &found, w.data(), z.data(), n, support.data());
  if (info != 0 || found != k)
    throw SolverFailure("dsyevr failed with info " + std::to_string(info), std::nan(""));

  CiSpectrum out;
  out.sector = sector;
  out.basis_size = static_cast<std::size_t>(n);
  out.eigenvalues = w.head(k);
  out.eigenvectors = z;
  out.residuals.resize(k);
  const double scale = H.norm();
  for (int c = 0; c < k; ++c) {
    auto v = out.eigenvectors.col(c);
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    if (v(big) < 0.0) v = -v;
    out.residuals(c) = (H * v - out.eigenvalues(c) * v).norm();
    if (out.residuals(c) > 1e-8 * scale)
      throw SolverFailure("eigenpair " + std::to_string(c) + " failed the residual check", out.residuals(c));
  }
  return out;
}

CiModel::CiModel(CiSettings settings) : settings_(std::move(settings)) {
  const auto& g = settings_.geometry;
  const auto& m = settings_.material;
  symmetric_ = std::make_shared<const TwoElectronBasis>(
      make_basis(Sector::Symmetric, settings_.n_max, g, m, settings_.pair_energy_cutoff));
  antisymmetric_ = std::make_shared<const TwoElectronBasis>(
      make_basis(Sector::Antisymmetric, settings_.n_max, g, m, settings_.pair_energy_cutoff));
  table_ = stf::coulomb_table(settings_.n_max, settings_.quad);
  symmetric_blocks_ = std::make_shared<const HamiltonianBlocks>(assemble_blocks(*symmetric_, *table_, settings_.exec));
  antisymmetric_blocks_ =
      std::make_shared<const HamiltonianBlocks>(assemble_blocks(*antisymmetric_, *table_, settings_.exec));
}

const TwoElectronBasis& CiModel::basis(Sector s) const {
  return s == Sector::Symmetric ? *symmetric_ : *antisymmetric_;
}

const HamiltonianBlocks& CiModel::blocks(Sector s) const {
  return s == Sector::Symmetric ? *symmetric_blocks_ : *antisymmetric_blocks_;
}

double CiModel::kinetic_unit() const { return stf::kinetic_unit(settings_.geometry, settings_.material); }

double CiModel::coulomb_unit() const {
  if (!settings_.coulomb) return 0.0;
  return settings_.material.coulomb_prefactor() / settings_.geometry.side_length;
}

CiModel CiModel::resized(double side_length) const {
  CiModel copy = *this;
  copy.settings_.geometry.side_length = side_length;
  copy.settings_.geometry.validate();
  return copy;
}

Eigen::MatrixXd CiModel::hamiltonian(Sector s, std::optional<double> gate_step_meV) const {
  const auto& b = blocks(s);
  Eigen::MatrixXd h = kinetic_unit() * b.kinetic;
  if (settings_.coulomb) h += coulomb_unit() * b.coulomb;
  if (gate_step_meV && *gate_step_meV != 0.0) h += *gate_step_meV * b.gate;
  return h;
}

CiSpectrum CiModel::spectrum(Sector s, int k, std::optional<double> gate_step_meV) const {
  const int dim = static_cast<int>(basis(s).size());
  return solve_spectrum(hamiltonian(s, gate_step_meV), std::min(k, dim), s);
}

Eigen::MatrixXd build_hamiltonian(const TwoElectronBasis& basis, const Geometry& geometry, const Material& material,
                                  const CoulombTable& table, std::optional<double> gate_step_meV, Exec exec) {
  const HamiltonianBlocks b = assemble_blocks(basis, table, exec);
  Eigen::MatrixXd h = kinetic_unit(geometry, material) * b.kinetic;
  h += material.coulomb_prefactor() / geometry.side_length * b.coulomb;
  if (gate_step_meV && *gate_step_meV != 0.0) h += *gate_step_meV * b.gate;
  return h;
}

EffectiveParams extract_effective_params(const CiSpectrum& singlet, const CiSpectrum& triplet) {
  if (singlet.eigenvalues.size() < 2 || triplet.eigenvalues.size() < 2)
    throw InvalidArgument("need at least two singlet and two triplet eigenvalues");
  const double s1 = singlet.eigenvalues(0);
  const double s2 = singlet.eigenvalues(1);
  const double t1 = triplet.eigenvalues(0);
  const double t2 = triplet.eigenvalues(1);

  EffectiveParams p;
  p.E0 = 0.5 * (t1 + t2);
  p.Delta1 = p.E0 - s1;
  p.Delta2 = s2 - p.E0;
  p.Delta = 0.5 * (p.Delta1 + p.Delta2);
  p.J = 0.5 * (p.Delta1 - p.Delta2);

  double e9 = std::numeric_limits<double>::infinity();
  if (singlet.eigenvalues.size() > 2) e9 = std::min(e9, singlet.eigenvalues(2));
  if (triplet.eigenvalues.size() > 2) e9 = std::min(e9, triplet.eigenvalues(2));
  p.gap_ratio = (e9 - s1) / (s2 - s1);

  if (!(p.Delta1 > 0.0 && p.Delta2 > 0.0))
    throw ManifoldInvalid("lowest triplets do not lie between the two lowest singlets");
  if (std::abs(t2 - t1) > 0.1 * p.Delta)
    throw ManifoldInvalid("lowest triplet pair split by " + std::to_string(t2 - t1) + " meV");
  return p;
}

ManifoldOrbitals localize_manifold(const CiModel& model, const CiSpectrum& singlet, const CiSpectrum& triplet) {
  if (singlet.eigenvectors.cols() < 2 || triplet.eigenvectors.cols() < 2)
    throw InvalidArgument("need the two lowest states of each sector");
  const double L = model.settings().geometry.side_length;
  const auto corners = model.settings().geometry.corners();
  const Point a = corners[0], b = corners[1], c = corners[2], d = corners[3];

  const Eigen::MatrixXd& ws = model.blocks(Sector::Symmetric).gate;
  const Eigen::VectorXd s1 = singlet.eigenvectors.col(0);
  Eigen::VectorXd s2 = singlet.eigenvectors.col(1);
  const double coupling = s1.dot(ws * s2);
  if (std::abs(coupling) < 1e-12) throw AlignmentFailure("the two lowest singlets do not localize on a diagonal");
  if (coupling > 0.0) s2 = -s2;

  ManifoldOrbitals out;
  out.phi1_symmetric = (s1 + s2) * kInvSqrt2;
  out.phi2_symmetric = (s1 - s2) * kInvSqrt2;
  const auto& sym = model.basis(Sector::Symmetric);
  if (pair_amplitude(sym, out.phi1_symmetric, a, c, L) < 0.0) {
    out.phi1_symmetric = -out.phi1_symmetric;
    out.phi2_symmetric = -out.phi2_symmetric;
  }

  const Eigen::MatrixXd& wa = model.blocks(Sector::Antisymmetric).gate;
  const Eigen::MatrixXd pair = triplet.eigenvectors.leftCols(2);
  const Eigen::Matrix2d occupancy = pair.transpose() * wa * pair;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> rot(occupancy);
  out.phi1_antisymmetric = pair * rot.eigenvectors().col(0);
  out.phi2_antisymmetric = pair * rot.eigenvectors().col(1);
  const auto& anti = model.basis(Sector::Antisymmetric);
  if (pair_amplitude(anti, out.phi1_antisymmetric, a, c, L) < 0.0) out.phi1_antisymmetric *= -1.0;
  if (pair_amplitude(anti, out.phi2_antisymmetric, b, d, L) < 0.0) out.phi2_antisymmetric *= -1.0;
  return out;
}

DensityGrid charge_density(const TwoElectronBasis& basis, const Eigen::VectorXd& coefficients, double side_length,
                           int resolution) {
  if (resolution < 2) throw InvalidArgument("density resolution must be >= 2");
  if (coefficients.size() != static_cast<Eigen::Index>(basis.size()))
    throw InvalidArgument("coefficient vector does not match the basis");
  const Eigen::MatrixXd c = coefficient_matrix(basis, coefficients);
  const Eigen::MatrixXd reduced = c * c.transpose();

  const int G = resolution;
  const double h = side_length / G;
  const auto n_orb = static_cast<Eigen::Index>(basis.orbitals.size());
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(G) * G, n_orb);
  Geometry geometry;
  geometry.side_length = side_length;
  for (int i = 0; i < G; ++i)
    for (int j = 0; j < G; ++j)
      for (Eigen::Index k = 0; k < n_orb; ++k)
        phi(i * G + j, k) = orbital_value(basis.orbitals[static_cast<std::size_t>(k)],
                                          Point{(i + 0.5) * h, (j + 0.5) * h}, geometry);
  const Eigen::VectorXd rho = 2.0 * ((phi * reduced).array() * phi.array()).rowwise().sum();

  DensityGrid grid;
  grid.resolution = G;
  grid.side_length = side_length;
  grid.values.resize(G, G);
  for (int i = 0; i < G; ++i)
    for (int j = 0; j < G; ++j) grid.values(i, j) = std::max(0.0, rho(i * G + j));
  grid.total = grid.values.sum() * h * h;
  return grid;
}

DensityGrid charge_density(const CiModel& model, const CiSpectrum& spectrum, int state_index, int resolution) {
  if (state_index < 0 || state_index >= spectrum.eigenvectors.cols())
    throw InvalidArgument("state index outside the computed spectrum");
  return charge_density(model.basis(spectrum.sector), spectrum.eigenvectors.col(state_index),
                        model.settings().geometry.side_length, resolution);
}

double corner_fraction(const DensityGrid& grid) {
  const int G = grid.resolution;
  const double L = grid.side_length;
  const double h = grid.cell();
  const double radius = L / 4.0;
  const Point corners[4] = {{0, 0}, {L, 0}, {L, L}, {0, L}};
  double inside = 0.0;
  for (int i = 0; i < G; ++i) {
    for (int j = 0; j < G; ++j) {
      const Point p{(i + 0.5) * h, (j + 0.5) * h};
      for (const auto& c : corners) {
        if (std::hypot(p.x - c.x, p.y - c.y) < radius) {
          inside += grid.values(i, j);
          break;
        }
      }
    }
  }
  return inside * h * h / grid.total;
}

std::vector<Point> local_maxima(const DensityGrid& grid) {
  const int G = grid.resolution;
  const double h = grid.cell();
  std::vector<Point> out;
  for (int i = 0; i < G; ++i) {
    for (int j = 0; j < G; ++j) {
      const double v = grid.values(i, j);
      bool peak = v > 0.0;
      for (int di = -1; di <= 1 && peak; ++di)
        for (int dj = -1; dj <= 1 && peak; ++dj) {
          if (di == 0 && dj == 0) continue;
          const int a = i + di, b = j + dj;
          if (a < 0 || b < 0 || a >= G || b >= G) continue;
          if (grid.values(a, b) >= v) peak = false;
        }
      if (peak) out.push_back({(i + 0.5) * h, (j + 0.5) * h});
    }
  }
  return out;
}

double ac_quadrant_fraction(const DensityGrid& grid) {
  const int G = grid.resolution;
  const double half = grid.side_length / 2.0;
  const double h = grid.cell();
  double ac = 0.0;
  for (int i = 0; i < G; ++i)
    for (int j = 0; j < G; ++j) {
      const double x = (i + 0.5) * h, y = (j + 0.5) * h;
      if ((x < half) == (y < half)) ac += grid.values(i, j);
    }
  return ac * h * h / grid.total;
}

GatedInitialState gated_initial_state(const CiModel& model, double gate_step, const ManifoldOrbitals& ungated) {
  Eigen::VectorXd s = model.spectrum(Sector::Symmetric, 1, gate_step).eigenvectors.col(0);
  Eigen::VectorXd t = model.spectrum(Sector::Antisymmetric, 1, gate_step).eigenvectors.col(0);
  double proj_s = ungated.phi1_symmetric.dot(s);
  double proj_t = ungated.phi1_antisymmetric.dot(t);
  constexpr double kAmbiguous = 1e-6;
  if (std::abs(proj_s) < kAmbiguous || std::abs(proj_t) < kAmbiguous)
    throw AlignmentFailure("gated ground states have no overlap with the a,c-localized manifold states");
  if (proj_s < 0.0) {
    s = -s;
    proj_s = -proj_s;
  }
  if (proj_t < 0.0) {
    t = -t;
    proj_t = -proj_t;
  }
  GatedInitialState out;
  out.gate_potential = gate_step;
  out.alpha = proj_s * kInvSqrt2;
  out.beta = ungated.phi2_symmetric.dot(s) * kInvSqrt2;
  out.overlap_ideal = 0.5 * (proj_s + proj_t);
  return out;
}

namespace {

// Rows/columns of `basis` whose orbitals both fit in {1..n_max}².
std::vector<Eigen::Index> truncated_rows(const TwoElectronBasis& basis, int n_max) {
  std::vector<Eigen::Index> rows;
  for (std::size_t k = 0; k < basis.pairs.size(); ++k) {
    const auto& p = basis.orbitals[basis.pairs[k].first];
    const auto& q = basis.orbitals[basis.pairs[k].second];
    if (std::max({p.n, p.m, q.n, q.m}) <= n_max) rows.push_back(static_cast<Eigen::Index>(k));
  }
  return rows;
}

CiSpectrum truncated_spectrum(const CiModel& model, Sector s, int n_max, int k) {
  const auto rows = truncated_rows(model.basis(s), n_max);
  const Eigen::MatrixXd h = model.hamiltonian(s);
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd sub(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) sub(i, j) = h(rows[i], rows[j]);
  return solve_spectrum(sub, std::min<int>(k, static_cast<int>(n)), s);
}

}  // namespace

DotAnalysis analyze_dot(const CiModel& model, int states, bool check_convergence, ConvergenceThresholds thresholds) {
  DotAnalysis out;
  out.singlet = model.spectrum(Sector::Symmetric, states);
  out.triplet = model.spectrum(Sector::Antisymmetric, states);
  auto raw_params = [](const CiSpectrum& s, const CiSpectrum& t) {
    try {
      return std::make_pair(extract_effective_params(s, t), std::string());
    } catch (const ManifoldInvalid& e) {
      EffectiveParams p;
      p.E0 = 0.5 * (t.eigenvalues(0) + t.eigenvalues(1));
      p.Delta1 = p.E0 - s.eigenvalues(0);
      p.Delta2 = s.eigenvalues(1) - p.E0;
      p.Delta = 0.5 * (p.Delta1 + p.Delta2);
      p.J = 0.5 * (p.Delta1 - p.Delta2);
      return std::make_pair(p, std::string(e.what()));
    }
  };
  auto [params, error] = raw_params(out.singlet, out.triplet);
  out.params = params;
  out.manifold_valid = error.empty();
  out.manifold_error = error;

  const int n_max = model.settings().n_max;
  if (check_convergence && n_max > 1) {
    const auto s = truncated_spectrum(model, Sector::Symmetric, n_max - 1, 3);
    const auto t = truncated_spectrum(model, Sector::Antisymmetric, n_max - 1, 3);
    const auto coarse = raw_params(s, t).first;
    out.ground_energy_change =
        std::abs(s.eigenvalues(0) - out.singlet.eigenvalues(0)) / std::abs(out.singlet.eigenvalues(0));
    out.delta_change = std::abs(coarse.Delta - out.params.Delta) / std::abs(out.params.Delta);
    out.converged = out.ground_energy_change < thresholds.ground_energy && out.delta_change < thresholds.delta;
  }
  return out;
}

}  // namespace stf
