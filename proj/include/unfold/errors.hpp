#pragma once

#include <stdexcept>
#include <string>

namespace unfold {

// Exit codes for the CLI; exceptions map onto them 1:1.
enum ExitCode : int {
  exit_ok = 0,
  exit_config = 2,
  exit_infeasible = 3,
  exit_solver = 4,
  exit_io = 5,
};

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
  virtual int exit_code() const { return 1; }
};

// Bad or inconsistent configuration / CLI arguments.
struct ConfigError : Error {
  using Error::Error;
  int exit_code() const override { return exit_config; }
};

// Moment vector outside the feasible cone: projection cannot match it.
struct InfeasibleTargetError : Error {
  using Error::Error;
  int exit_code() const override { return exit_infeasible; }
};

// Numerical failure in a linear solve or Newton iteration.
struct SolverError : Error {
  using Error::Error;
  int exit_code() const override { return exit_solver; }
};

// Runaway exponent in the log-density (|sum theta psi| beyond the clip bound).
struct ExponentOverflowError : SolverError {
  using SolverError::SolverError;
};

// Degenerate / non-positive-definite Hessian in the projection.
struct SingularHessianError : SolverError {
  using SolverError::SolverError;
};

// Filesystem and serialization failures.
struct IoError : Error {
  using Error::Error;
  int exit_code() const override { return exit_io; }
};

}  // namespace unfold
