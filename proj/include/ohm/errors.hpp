#pragma once

#include <stdexcept>
#include <string>

namespace ohm {

// Error taxonomy shared by the library and the CLI. Every category carries a
// human-readable message naming the offending input or stage.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParameterError : Error {
  using Error::Error;
};

// Caller broke a documented contract (e.g. x == y in edge_conductance).
struct ContractError : Error {
  using Error::Error;
};

struct LookupError : Error {
  using Error::Error;
};

struct GeometryError : Error {
  using Error::Error;
};

struct EstimationError : Error {
  using Error::Error;
};

struct HypothesisError : Error {
  using Error::Error;
};

struct LinalgError : Error {
  using Error::Error;
};

struct SolverError : Error {
  double residual;
  SolverError(const std::string& msg, double res) : Error(msg), residual(res) {}
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace ohm
