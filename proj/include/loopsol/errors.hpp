#ifndef LOOPSOL_ERRORS_HPP
#define LOOPSOL_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace loopsol {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Structural misuse: dimension mismatch, unregistered involution, algebra mix-up.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Input outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent configured data (decompositions, scenarios with bad semantics).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed scenario / CLI usage. CLI maps this to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Band overflow and similar resource limits.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Operation requested on an algebra/family without the required registered data.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Time integration aborted (blow-up guard). Carries the last accepted time.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& msg, double last_good)
      : Error(msg), last_good_time(last_good) {}
  double last_good_time;
};

/// Birkhoff factorization / dressing failed to converge at a grid node.
class FactorizationError : public Error {
 public:
  FactorizationError(const std::string& msg, std::vector<int> at)
      : Error(msg), node(std::move(at)) {}
  std::vector<int> node;
};

/// Connection is not flat to tolerance; carries the measured curvature norm.
class FlatnessError : public Error {
 public:
  FlatnessError(const std::string& msg, double curv)
      : Error(msg), curvature_norm(curv) {}
  double curvature_norm;
};

/// Division by a vanishing field value; carries the offending node.
class SingularityError : public Error {
 public:
  SingularityError(const std::string& msg, std::vector<int> at)
      : Error(msg), node(std::move(at)) {}
  std::vector<int> node;
};

}  // namespace loopsol

#endif
