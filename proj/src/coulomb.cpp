#include "stf/coulomb.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "stf/errors.hpp"
#include "stf/quadrature.hpp"

namespace stf {

namespace {

constexpr double kPi = PhysicalConstants::pi;

// X_jl(u) for u >= 0: ∫₀^{1-u} cos(jπ(x+u)) cos(lπx) dx.
double correlation(int j, int l, double u) {
  const double hi = 1.0 - u;
  const double phase = j * kPi * u;
  double sum = 0.0;
  for (const int a : {j + l, j - l}) {
    if (a == 0) {
      sum += 0.5 * hi * std::cos(phase);
    } else {
      const double alpha = a * kPi;
      sum += 0.5 * (std::sin(alpha * hi + phase) - std::sin(phase)) / alpha;
    }
  }
  return sum;
}

struct PolarNodes {
  std::vector<double> u, v, w;
};

// First quadrant of the relative-coordinate square, split along the diagonal
// into two triangles with a vertex at the origin.
PolarNodes first_quadrant_nodes(int order) {
  const GaussRule theta = gauss_legendre(order, 0.0, kPi / 4.0);
  const GaussRule unit = gauss_legendre(order, 0.0, 1.0);
  PolarNodes nodes;
  const std::size_t count = 2 * static_cast<std::size_t>(order) * order;
  nodes.u.reserve(count);
  nodes.v.reserve(count);
  nodes.w.reserve(count);
  for (int a = 0; a < order; ++a) {
    const double t = theta.nodes[a];
    const double rmax = 1.0 / std::cos(t);
    for (int b = 0; b < order; ++b) {
      const double r = unit.nodes[b] * rmax;
      const double w = theta.weights[a] * unit.weights[b] * rmax;
      const double x = r * std::cos(t);
      const double y = r * std::sin(t);
      nodes.u.push_back(x);
      nodes.v.push_back(y);
      nodes.w.push_back(w);
      nodes.u.push_back(y);
      nodes.v.push_back(x);
      nodes.w.push_back(w);
    }
  }
  return nodes;
}

Eigen::MatrixXd base_integrals(int n_max, int order, Exec exec) {
  const int dim = 2 * n_max + 1;
  const PolarNodes nodes = first_quadrant_nodes(order);
  const auto count = static_cast<Eigen::Index>(nodes.w.size());
  Eigen::MatrixXd at_u(dim * dim, count);
  Eigen::MatrixXd at_v(dim * dim, count);
  for_each_index_static(exec, static_cast<std::size_t>(count), [&](std::size_t k) {
    const auto c = static_cast<Eigen::Index>(k);
    const double sw = std::sqrt(nodes.w[k]);
    for (int j = 0; j < dim; ++j) {
      for (int l = j; l < dim; ++l) {
        double xu = 0.0, xv = 0.0;
        if ((j + l) % 2 == 0) {
          xu = cosine_correlation(j, l, nodes.u[k]) * sw;
          xv = cosine_correlation(j, l, nodes.v[k]) * sw;
        }
        at_u(j * dim + l, c) = at_u(l * dim + j, c) = xu;
        at_v(j * dim + l, c) = at_v(l * dim + j, c) = xv;
      }
    }
  });
  Eigen::MatrixXd table = at_u * at_v.transpose();
  return table;
}

}  // namespace

double cosine_correlation(int j, int l, double u) {
  return correlation(j, l, u) + correlation(l, j, u);
}

CoulombTable CoulombTable::build(int n_max, QuadSpec spec, Exec exec) {
  if (n_max < 1) throw InvalidArgument("n_max must be >= 1");
  if (spec.order < 0) throw InvalidArgument("quadrature order must be >= 0");
  const int order = spec.order > 0 ? spec.order : 6 * n_max + 32;
  CoulombTable t;
  t.n_max_ = n_max;
  t.dim_ = 2 * n_max + 1;
  t.order_ = order + 16;
  const Eigen::MatrixXd coarse = base_integrals(n_max, order, exec);
  t.table_ = base_integrals(n_max, order + 16, exec);
  t.achieved_error_ = (t.table_ - coarse).cwiseAbs().maxCoeff();
  if (!(t.achieved_error_ <= spec.tolerance))
    throw ConvergenceFailure("Coulomb base integrals did not converge at order " + std::to_string(order),
                             t.achieved_error_);
  return t;
}

double CoulombTable::element(BoxOrbital p, BoxOrbital q, BoxOrbital r, BoxOrbital s) const {
  if (std::max({p.n, p.m, q.n, q.m, r.n, r.m, s.n, s.m}) > n_max_)
    throw InvalidArgument("orbital exceeds the Coulomb table cutoff");
  // Reflection x -> 1-x (or y -> 1-y) flips the sign of odd-parity integrands.
  if ((p.n + r.n + q.n + s.n) % 2 != 0 || (p.m + r.m + q.m + s.m) % 2 != 0) return 0.0;
  const int x1[2] = {std::abs(p.n - r.n), p.n + r.n};
  const int x2[2] = {std::abs(q.n - s.n), q.n + s.n};
  const int y1[2] = {std::abs(p.m - r.m), p.m + r.m};
  const int y2[2] = {std::abs(q.m - s.m), q.m + s.m};
  constexpr double sign[2] = {1.0, -1.0};
  double sum = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d)
          sum += sign[a] * sign[b] * sign[c] * sign[d] * base(x1[a], x2[b], y1[c], y2[d]);
  return sum;
}

std::shared_ptr<const CoulombTable> coulomb_table(int n_max, QuadSpec spec) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, double>, std::shared_ptr<const CoulombTable>> cache;
  const auto key = std::make_tuple(n_max, spec.order, spec.tolerance);
  std::lock_guard lock(mutex);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  auto table = std::make_shared<const CoulombTable>(CoulombTable::build(n_max, spec));
  cache.emplace(key, table);
  return table;
}

double coulomb_element(BoxOrbital p, BoxOrbital q, BoxOrbital r, BoxOrbital s,
                       const Geometry& geometry, const Material& material, QuadSpec spec) {
  geometry.validate();
  material.validate();
  const int n_max = std::max({p.n, p.m, q.n, q.m, r.n, r.m, s.n, s.m});
  if (std::min({p.n, p.m, q.n, q.m, r.n, r.m, s.n, s.m}) < 1)
    throw InvalidArgument("quantum numbers must be positive");
  const auto table = coulomb_table(n_max, spec);
  return material.coulomb_prefactor() / geometry.side_length * table->element(p, q, r, s);
}

}  // namespace stf
