#include "stf/grid_oracle.hpp"

#include <cmath>
#include <vector>

#include "stf/errors.hpp"
#include "stf/rng.hpp"

namespace stf {

namespace {

class GridHamiltonian {
 public:
  GridHamiltonian(const Geometry& geometry, const Material& material, int G, bool coulomb, Exec exec)
      : G_(G), exec_(exec) {
    const double h = geometry.side_length / (G + 1);
    hop_ = material.kinetic_prefactor() / (h * h);
    // Kernel indexed by |Δi|, |Δj|.
    kernel_.assign(static_cast<std::size_t>(G) * G, 0.0);
    if (coulomb) {
      const double c = material.coulomb_prefactor();
      for (int di = 0; di < G; ++di)
        for (int dj = 0; dj < G; ++dj)
          kernel_[static_cast<std::size_t>(di) * G + dj] =
              (di == 0 && dj == 0) ? c * 4.0 * std::log(1.0 + std::sqrt(2.0)) / h : c / (h * std::hypot(di, dj));
    }
  }

  std::size_t dim() const { return static_cast<std::size_t>(G_) * G_ * G_ * G_; }

  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    const int G = G_;
    const std::size_t G3 = static_cast<std::size_t>(G) * G * G;
    for_each_index_static(exec_, static_cast<std::size_t>(G) * G, [&](std::size_t outer) {
      const int i1 = static_cast<int>(outer / G), j1 = static_cast<int>(outer % G);
      for (int i2 = 0; i2 < G; ++i2) {
        for (int j2 = 0; j2 < G; ++j2) {
          const std::size_t idx = outer * G * G + static_cast<std::size_t>(i2) * G + j2;
          double v = (8.0 * hop_ + kernel_[static_cast<std::size_t>(std::abs(i1 - i2)) * G + std::abs(j1 - j2)]) *
                     x(static_cast<Eigen::Index>(idx));
          double nb = 0.0;
          if (i1 > 0) nb += x(static_cast<Eigen::Index>(idx - G3));
          if (i1 < G - 1) nb += x(static_cast<Eigen::Index>(idx + G3));
          if (j1 > 0) nb += x(static_cast<Eigen::Index>(idx - static_cast<std::size_t>(G) * G));
          if (j1 < G - 1) nb += x(static_cast<Eigen::Index>(idx + static_cast<std::size_t>(G) * G));
          if (i2 > 0) nb += x(static_cast<Eigen::Index>(idx - G));
          if (i2 < G - 1) nb += x(static_cast<Eigen::Index>(idx + G));
          if (j2 > 0) nb += x(static_cast<Eigen::Index>(idx - 1));
          if (j2 < G - 1) nb += x(static_cast<Eigen::Index>(idx + 1));
          y(static_cast<Eigen::Index>(idx)) = v - hop_ * nb;
        }
      }
    });
  }

  /// ½(x ± swap x), swap exchanging (i1,j1) with (i2,j2).
  void project(Eigen::VectorXd& x, double sign) const {
    const std::size_t G2 = static_cast<std::size_t>(G_) * G_;
    for (std::size_t a = 0; a < G2; ++a) {
      for (std::size_t b = a; b < G2; ++b) {
        const auto ab = static_cast<Eigen::Index>(a * G2 + b);
        const auto ba = static_cast<Eigen::Index>(b * G2 + a);
        const double s = 0.5 * (x(ab) + sign * x(ba));
        x(ab) = s;
        x(ba) = sign * s;
      }
    }
  }

 private:
  int G_;
  Exec exec_;
  double hop_ = 0.0;
  std::vector<double> kernel_;
};

}  // namespace

Eigen::VectorXd grid_oracle_spectrum(const Geometry& geometry, const Material& material, int G, int k,
                                     Sector sector, const GridOracleOptions& options) {
  geometry.validate();
  material.validate();
  if (G < 2) throw InvalidArgument("grid oracle needs G >= 2");
  if (G > 24) throw ResourceLimit("grid oracle limited to G <= 24 (G^4 amplitudes)");
  if (k < 1) throw InvalidArgument("k must be >= 1");

  const GridHamiltonian H(geometry, material, G, options.coulomb, options.exec);
  const double sign = sector == Sector::Symmetric ? 1.0 : -1.0;
  const auto n = static_cast<Eigen::Index>(H.dim());
  const int m_max = std::min<int>(options.max_iterations, static_cast<int>(n));

  Eigen::MatrixXd Q(n, m_max + 1);
  std::vector<double> alpha, beta;
  Eigen::VectorXd q(n);
  StreamRng rng(0x6f7261636c65ULL, static_cast<std::uint64_t>(G));
  for (Eigen::Index i = 0; i < n; ++i) q(i) = rng.uniform() - 0.5;
  H.project(q, sign);
  q.normalize();
  Q.col(0) = q;

  Eigen::VectorXd w(n);
  Eigen::VectorXd ritz;
  for (int j = 0; j < m_max; ++j) {
    H.apply(Q.col(j), w);
    H.project(w, sign);
    const double a = Q.col(j).dot(w);
    alpha.push_back(a);
    // Full reorthogonalization, applied twice.
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd c = Q.leftCols(j + 1).transpose() * w;
      w.noalias() -= Q.leftCols(j + 1) * c;
    }
    const double b = w.norm();

    const int m = j + 1;
    if (m >= k && (m % 10 == 0 || m == m_max || b < 1e-14)) {
      Eigen::VectorXd d = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
      Eigen::VectorXd e = m > 1 ? Eigen::Map<Eigen::VectorXd>(beta.data(), m - 1) : Eigen::VectorXd();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
      tri.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
      ritz = tri.eigenvalues().head(k);
      bool done = b < 1e-14;
      if (!done) {
        done = true;
        for (int i = 0; i < k; ++i)
          if (std::abs(b * tri.eigenvectors()(m - 1, i)) > options.tolerance * std::abs(ritz(i))) done = false;
      }
      if (done) return ritz;
    }
    if (b < 1e-14) break;
    beta.push_back(b);
    Q.col(j + 1) = w / b;
  }
  throw ConvergenceFailure("Lanczos did not converge within " + std::to_string(m_max) + " iterations",
                           std::nan(""));
}

double richardson3(const double h[3], const double e[3], double p1, double p2) {
  Eigen::Matrix3d A;
  Eigen::Vector3d b;
  for (int i = 0; i < 3; ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = std::pow(h[i], p1);
    A(i, 2) = std::pow(h[i], p2);
    b(i) = e[i];
  }
  return A.colPivHouseholderQr().solve(b)(0);
}

}  // namespace stf
