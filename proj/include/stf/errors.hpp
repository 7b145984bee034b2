#pragma once

#include <stdexcept>
#include <string>

namespace stf {

/// Root of every error raised by the library. `kind()` is a stable tag used
/// by the CLI to pick an exit code and by tests to check error paths.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error("invalid-argument", what) {}
};

class InvalidParams : public Error {
 public:
  explicit InvalidParams(const std::string& what) : Error("invalid-params", what) {}
};

/// Quadrature did not reach the requested tolerance.
class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, double achieved)
      : Error("convergence-failure", what + " (achieved error " + std::to_string(achieved) + ")"),
        achieved_error(achieved) {}
  double achieved_error;
};

class SolverFailure : public Error {
 public:
  SolverFailure(const std::string& what, double residual)
      : Error("solver-failure", what + " (residual " + std::to_string(residual) + ")"),
        residual(residual) {}
  double residual;
};

/// The 8-state ground-manifold description does not apply to the spectrum.
class ManifoldInvalid : public Error {
 public:
  explicit ManifoldInvalid(const std::string& what) : Error("manifold-invalid", what) {}
};

class AlignmentFailure : public Error {
 public:
  explicit AlignmentFailure(const std::string& what) : Error("alignment-failure", what) {}
};

class UndefinedPostState : public Error {
 public:
  explicit UndefinedPostState(const std::string& what) : Error("undefined-post-state", what) {}
};

class IntegratorFailure : public Error {
 public:
  explicit IntegratorFailure(const std::string& what) : Error("integrator-failure", what) {}
};

class ResourceLimit : public Error {
 public:
  explicit ResourceLimit(const std::string& what) : Error("resource-limit", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config-error", what) {}
};

}  // namespace stf
