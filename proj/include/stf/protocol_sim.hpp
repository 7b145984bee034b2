#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "stf/kernels.hpp"
#include "stf/noise_dynamics.hpp"
#include "stf/rng.hpp"

namespace stf {

// Qubit q is bit q of the state-vector index. A chain of N dots starts as
// N+1 singlet pairs (0,1), (2,3), ..., (2N,2N+1); dot k = 1..N holds qubits
// 2k-1 and 2k. The terminal pair is (0, 2N+1).

enum class ChainMode { Swap, Aklt };
enum class DotResult { Singlet, Triplet };

struct ChainConfig {
  int n_dots = 1;
  int trials = 10000;
  ChainMode mode = ChainMode::Swap;
  /// Ideal by default; otherwise the detection statistics of a noisy dot.
  PovmSummary povm{};
  std::uint64_t seed = 0;
  double confidence = 0.99;
  Exec exec = Exec::Parallel;

  void validate() const;
};

/// Largest chain held as a dense state vector.
inline constexpr int kMaxDots = 10;

using StateVector = Eigen::VectorXd;

StateVector singlet_chain(int n_dots);

/// P_s ψ on qubits (i, j); P_t ψ = ψ - P_s ψ.
StateVector apply_singlet_projector(const StateVector& psi, int i, int j);
StateVector apply_triplet_projector(const StateVector& psi, int i, int j);

/// ⟨ψ|P_s(i,j)|ψ⟩ for a normalized ψ.
double singlet_weight(const StateVector& psi, int i, int j);

/// Reduced density matrix of qubits (i, j), basis index 2·bit_i + bit_j.
Eigen::Matrix4d reduced_pair(const StateVector& psi, int i, int j);

struct ChainOutcome {
  std::vector<DotResult> outcomes;  // reported results, dot 1..N
  bool success = false;             // every dot reported singlet
  StateVector post_state;           // normalized post-measurement state of all qubits
  Eigen::Matrix4d terminal_pair = Eigen::Matrix4d::Zero();
  double fidelity = 0.0;  // terminal-pair singlet fidelity
};

/// One trial: each dot measured in order. The true outcome follows the Born
/// rule and collapses the state; the reported outcome is singlet with
/// probability povm.p_detect_singlet (true singlet) or p_detect_triplet
/// (true triplet).
ChainOutcome run_trial(int n_dots, const PovmSummary& povm, StreamRng& rng);

ChainOutcome swap_once(const PovmSummary& povm, StreamRng& rng);

struct ChainStatistics {
  long trials = 0;
  long successes = 0;
  double rate = 0.0;
  double mean_fidelity = 0.0;  // over successful trials
  double min_fidelity = 0.0;
};

ChainStatistics run_swap_chain(const ChainConfig& config);

/// Deterministic all-triplet branch: Π_k P_t(2k-1, 2k) on the singlet chain.
struct AkltBranch {
  StateVector state;  // normalized
  double probability = 0.0;
};

AkltBranch aklt_branch(int n_dots);

/// Monte Carlo rate of the all-triplet outcome plus the exact branch.
struct AkltResult {
  ChainStatistics statistics;
  AkltBranch branch;
  double energy = 0.0;
};

AkltResult run_aklt_chain(const ChainConfig& config);

/// ⟨ψ|H|ψ⟩ with H = Σ_{k=1}^{N-1} P₂(site k, site k+1) + P_{3/2}(0; site 1) +
/// P_{3/2}(site N; 2N+1), spin-1 site k on qubits (2k-1, 2k). P₂ and P_{3/2}
/// are the projectors onto the fully symmetric subspace of 4 and 3 qubits.
double aklt_energy(const StateVector& psi, int n_dots);

/// Projector onto the symmetric subspace of m qubits (2^m × 2^m).
Eigen::MatrixXd symmetric_projector(int m);

struct SuccessEstimate {
  long trials = 0;
  long successes = 0;
  double rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double theory = 0.0;
};

/// Wilson score interval for k successes in n trials.
std::pair<double, double> wilson_interval(long successes, long trials, double confidence);

/// (¼a + ¾b)^N for swap and (¼(1-a) + ¾(1-b))^N for AKLT, a and b the POVM
/// detection probabilities; (1/4)^N and (3/4)^N when ideal.
double theory_success(const ChainConfig& config);

SuccessEstimate estimate_success_prob(const ChainConfig& config);

}  // namespace stf
