#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace nscm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Error taxonomy. Everything user-facing derives from Error so the CLI can
// map failures to exit codes without enumerating modules.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent configuration (missing keys, bad boxes, bad flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A model callback returned something unusable (wrong size, NaN) at a known
// evaluation point.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

// LMI assembly given out-of-range indices or non-conforming matrices.
class AssemblyError : public Error {
 public:
  using Error::Error;
};

// Cholesky-style factorization failed (non-PD input).
class FactorizationError : public Error {
 public:
  using Error::Error;
};

// The spectral-normalization Lipschitz certificate cannot be satisfied.
class CertificateError : public Error {
 public:
  using Error::Error;
};

// Training diverged or produced non-finite loss.
class TrainingError : public Error {
 public:
  using Error::Error;
};

inline void demand(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

}  // namespace nscm
