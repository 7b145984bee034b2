#include "stf/protocol_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "stf/errors.hpp"

namespace stf {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

int qubit_count(int n_dots) { return 2 * n_dots + 2; }

void check_dots(int n_dots) {
  if (n_dots < 1) throw InvalidArgument("a chain needs at least one dot");
  if (n_dots > kMaxDots)
    throw ResourceLimit("a chain of " + std::to_string(n_dots) + " dots needs 2^" +
                        std::to_string(qubit_count(n_dots)) + " amplitudes; the limit is " +
                        std::to_string(kMaxDots) + " dots");
}

// Σ over configurations of the other qubits of ⟨v|op|v⟩, v the local
// amplitudes on `qubits` (local bit t ↔ qubits[t]).
double local_expectation(const StateVector& psi, const std::vector<int>& qubits, const Eigen::MatrixXd& op) {
  const int m = static_cast<int>(qubits.size());
  const Eigen::Index local_dim = Eigen::Index{1} << m;
  std::size_t mask = 0;
  for (int q : qubits) mask |= std::size_t{1} << q;
  Eigen::VectorXd v(local_dim);
  double total = 0.0;
  const auto dim = static_cast<std::size_t>(psi.size());
  for (std::size_t rest = 0; rest < dim; ++rest) {
    if (rest & mask) continue;
    for (Eigen::Index l = 0; l < local_dim; ++l) {
      std::size_t idx = rest;
      for (int t = 0; t < m; ++t)
        if (l & (Eigen::Index{1} << t)) idx |= std::size_t{1} << qubits[t];
      v(l) = psi(static_cast<Eigen::Index>(idx));
    }
    total += v.dot(op * v);
  }
  return total;
}

StateVector normalized(StateVector v) {
  const double n = v.norm();
  if (n == 0.0) throw UndefinedPostState("projected branch has zero norm");
  return v / n;
}

struct TrialRecord {
  bool success = false;
  double fidelity = 0.0;
};

ChainStatistics reduce(const std::vector<TrialRecord>& records) {
  ChainStatistics s;
  s.trials = static_cast<long>(records.size());
  double fsum = 0.0;
  double fmin = 1.0;
  for (const auto& r : records) {
    if (!r.success) continue;
    ++s.successes;
    fsum += r.fidelity;
    fmin = std::min(fmin, r.fidelity);
  }
  s.rate = s.trials > 0 ? static_cast<double>(s.successes) / static_cast<double>(s.trials) : 0.0;
  s.mean_fidelity = s.successes > 0 ? fsum / static_cast<double>(s.successes) : 0.0;
  s.min_fidelity = s.successes > 0 ? fmin : 0.0;
  return s;
}

std::vector<TrialRecord> run_trials(const ChainConfig& config, const StateVector* target) {
  std::vector<TrialRecord> records(static_cast<std::size_t>(config.trials));
  const DotResult wanted = config.mode == ChainMode::Swap ? DotResult::Singlet : DotResult::Triplet;
  for_each_index_static(config.exec, records.size(), [&](std::size_t t) {
    StreamRng rng(config.seed, t);
    const ChainOutcome o = run_trial(config.n_dots, config.povm, rng);
    TrialRecord& r = records[t];
    r.success = std::all_of(o.outcomes.begin(), o.outcomes.end(), [&](DotResult d) { return d == wanted; });
    if (!r.success) return;
    if (target) {
      const double overlap = target->dot(o.post_state);
      r.fidelity = overlap * overlap;
    } else {
      r.fidelity = o.fidelity;
    }
  });
  return records;
}

}  // namespace

void ChainConfig::validate() const {
  check_dots(n_dots);
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidArgument("confidence must lie in (0, 1)");
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(povm.p_detect_singlet) || !prob(povm.p_detect_triplet))
    throw InvalidArgument("POVM detection probabilities must lie in [0, 1]");
}

StateVector singlet_chain(int n_dots) {
  check_dots(n_dots);
  const int pairs = n_dots + 1;
  const std::size_t dim = std::size_t{1} << qubit_count(n_dots);
  StateVector psi = StateVector::Zero(static_cast<Eigen::Index>(dim));
  const double amp = std::pow(kInvSqrt2, pairs);
  for (std::size_t idx = 0; idx < dim; ++idx) {
    double sign = 1.0;
    bool valid = true;
    for (int p = 0; p < pairs && valid; ++p) {
      const bool lo = (idx >> (2 * p)) & 1U;
      const bool hi = (idx >> (2 * p + 1)) & 1U;
      if (lo == hi) valid = false;
      else if (lo) sign = -sign;  // (|01⟩ - |10⟩)/√2, first qubit of the pair = low bit
    }
    if (valid) psi(static_cast<Eigen::Index>(idx)) = sign * amp;
  }
  return psi;
}

StateVector apply_singlet_projector(const StateVector& psi, int i, int j) {
  if (i == j) throw InvalidArgument("singlet projector needs two distinct qubits");
  const std::size_t bi = std::size_t{1} << i, bj = std::size_t{1} << j;
  const auto dim = static_cast<std::size_t>(psi.size());
  if (std::max(bi, bj) >= dim) throw InvalidArgument("qubit index outside the state");
  StateVector out = StateVector::Zero(psi.size());
  for (std::size_t idx = 0; idx < dim; ++idx) {
    if ((idx & bi) || !(idx & bj)) continue;  // visit each |0_i 1_j⟩ once
    const std::size_t partner = idx ^ bi ^ bj;
    const double s = 0.5 * (psi(static_cast<Eigen::Index>(idx)) - psi(static_cast<Eigen::Index>(partner)));
    out(static_cast<Eigen::Index>(idx)) = s;
    out(static_cast<Eigen::Index>(partner)) = -s;
  }
  return out;
}

StateVector apply_triplet_projector(const StateVector& psi, int i, int j) {
  return psi - apply_singlet_projector(psi, i, j);
}

double singlet_weight(const StateVector& psi, int i, int j) {
  return apply_singlet_projector(psi, i, j).squaredNorm();
}

Eigen::Matrix4d reduced_pair(const StateVector& psi, int i, int j) {
  const std::size_t bi = std::size_t{1} << i, bj = std::size_t{1} << j;
  Eigen::Matrix4d rho = Eigen::Matrix4d::Zero();
  const auto dim = static_cast<std::size_t>(psi.size());
  for (std::size_t rest = 0; rest < dim; ++rest) {
    if (rest & (bi | bj)) continue;
    Eigen::Vector4d v;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        v(2 * a + b) = psi(static_cast<Eigen::Index>(rest | (a ? bi : 0) | (b ? bj : 0)));
    rho += v * v.transpose();
  }
  return rho;
}

ChainOutcome run_trial(int n_dots, const PovmSummary& povm, StreamRng& rng) {
  ChainOutcome out;
  StateVector psi = singlet_chain(n_dots);
  for (int k = 1; k <= n_dots; ++k) {
    const int i = 2 * k - 1, j = 2 * k;
    StateVector singlet = apply_singlet_projector(psi, i, j);
    const double ws = singlet.squaredNorm();
    const bool true_singlet = rng.uniform() < ws;
    psi = normalized(true_singlet ? std::move(singlet) : StateVector(psi - singlet));
    const double p_report = true_singlet ? povm.p_detect_singlet : povm.p_detect_triplet;
    out.outcomes.push_back(rng.uniform() < p_report ? DotResult::Singlet : DotResult::Triplet);
  }
  const int last = 2 * n_dots + 1;
  out.success = std::all_of(out.outcomes.begin(), out.outcomes.end(),
                            [](DotResult d) { return d == DotResult::Singlet; });
  out.terminal_pair = reduced_pair(psi, 0, last);
  out.fidelity = std::clamp(singlet_weight(psi, 0, last), 0.0, 1.0);
  out.post_state = std::move(psi);
  return out;
}

ChainOutcome swap_once(const PovmSummary& povm, StreamRng& rng) { return run_trial(1, povm, rng); }

ChainStatistics run_swap_chain(const ChainConfig& config) {
  config.validate();
  ChainConfig swap = config;
  swap.mode = ChainMode::Swap;
  return reduce(run_trials(swap, nullptr));
}

AkltBranch aklt_branch(int n_dots) {
  StateVector psi = singlet_chain(n_dots);
  for (int k = 1; k <= n_dots; ++k) psi = apply_triplet_projector(psi, 2 * k - 1, 2 * k);
  AkltBranch b;
  b.probability = psi.squaredNorm();
  b.state = normalized(std::move(psi));
  return b;
}

AkltResult run_aklt_chain(const ChainConfig& config) {
  config.validate();
  AkltResult out;
  out.branch = aklt_branch(config.n_dots);
  ChainConfig aklt = config;
  aklt.mode = ChainMode::Aklt;
  out.statistics = reduce(run_trials(aklt, &out.branch.state));
  out.energy = aklt_energy(out.branch.state, config.n_dots);
  return out;
}

Eigen::MatrixXd symmetric_projector(int m) {
  if (m < 1 || m > 8) throw InvalidArgument("symmetric projector supports 1..8 qubits");
  const Eigen::Index dim = Eigen::Index{1} << m;
  std::vector<int> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(dim, dim);
  long count = 0;
  do {
    for (Eigen::Index l = 0; l < dim; ++l) {
      Eigen::Index image = 0;
      for (int t = 0; t < m; ++t)
        if (l & (Eigen::Index{1} << t)) image |= Eigen::Index{1} << perm[static_cast<std::size_t>(t)];
      p(image, l) += 1.0;
    }
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return p / static_cast<double>(count);
}

double aklt_energy(const StateVector& psi, int n_dots) {
  check_dots(n_dots);
  const Eigen::Index expected = Eigen::Index{1} << qubit_count(n_dots);
  if (psi.size() != expected)
    throw InvalidArgument("state has " + std::to_string(psi.size()) + " amplitudes, expected " +
                          std::to_string(expected) + " for " + std::to_string(n_dots) + " sites");
  const double norm2 = psi.squaredNorm();
  if (norm2 == 0.0) throw InvalidArgument("zero state");

  static const Eigen::MatrixXd p3 = symmetric_projector(3);
  static const Eigen::MatrixXd p4 = symmetric_projector(4);
  const int last = 2 * n_dots + 1;
  double e = local_expectation(psi, {0, 1, 2}, p3);
  e += local_expectation(psi, {last - 2, last - 1, last}, p3);
  for (int k = 1; k < n_dots; ++k) e += local_expectation(psi, {2 * k - 1, 2 * k, 2 * k + 1, 2 * k + 2}, p4);
  return e / norm2;
}

std::pair<double, double> wilson_interval(long successes, long trials, double confidence) {
  if (trials < 1 || successes < 0 || successes > trials) throw InvalidArgument("invalid binomial counts");
  if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidArgument("confidence must lie in (0, 1)");
  const boost::math::normal standard;
  const double z = boost::math::quantile(standard, 0.5 + 0.5 * confidence);
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2n = z * z / n;
  const double center = (p + 0.5 * z2n) / (1.0 + z2n);
  const double half = z / (1.0 + z2n) * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double theory_success(const ChainConfig& config) {
  const double a = config.povm.p_detect_singlet;
  const double b = config.povm.p_detect_triplet;
  const double per_dot = config.mode == ChainMode::Swap ? 0.25 * a + 0.75 * b : 0.25 * (1.0 - a) + 0.75 * (1.0 - b);
  return std::pow(per_dot, config.n_dots);
}

SuccessEstimate estimate_success_prob(const ChainConfig& config) {
  config.validate();
  if (config.trials < 100) throw InvalidArgument("success estimates need at least 100 trials");
  const ChainStatistics s =
      config.mode == ChainMode::Swap ? run_swap_chain(config) : run_aklt_chain(config).statistics;
  SuccessEstimate out;
  out.trials = s.trials;
  out.successes = s.successes;
  out.rate = s.rate;
  std::tie(out.ci_low, out.ci_high) = wilson_interval(s.successes, s.trials, config.confidence);
  out.theory = theory_success(config);
  return out;
}

}  // namespace stf
