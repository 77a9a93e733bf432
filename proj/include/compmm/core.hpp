#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace compmm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Sentinel for +infinity. Evaluations outside a domain return this value
/// instead of throwing so that traces stay total.
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

inline bool is_infinite(double v) { return v == kInfinity; }

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension mismatches and malformed inputs.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// A NaN (or otherwise unusable value) showed up during evaluation.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::ptrdiff_t index, double abscissa = std::nan(""))
      : Error(what), index_(index), abscissa_(abscissa) {}

  std::ptrdiff_t index() const { return index_; }
  double abscissa() const { return abscissa_; }

 private:
  std::ptrdiff_t index_;
  double abscissa_;
};

/// A point lies on (or outside) the boundary of a required open domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An unsupported or inconsistent configuration.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

class DegenerateScaleError : public Error {
 public:
  using Error::Error;
};

/// A result contradicts a construction guarantee (e.g. beating a known global optimum).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

/// A coordinate subproblem failed inside an iteration step.
class StepError : public Error {
 public:
  StepError(const std::string& what, std::ptrdiff_t index) : Error(what), index_(index) {}
  std::ptrdiff_t index() const { return index_; }

 private:
  std::ptrdiff_t index_;
};

// ---------------------------------------------------------------------------
// Seeds
// ---------------------------------------------------------------------------

/// One step of the splitmix64 generator; used to derive independent streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derive a child seed from a parent seed and a sequence of indices.
/// derive_seed(s, a, b) == derive_seed(derive_seed(s, a), b).
inline std::uint64_t derive_seed(std::uint64_t seed) { return seed; }

template <class... Rest>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, Rest... rest) {
  return derive_seed(splitmix64(seed ^ splitmix64(index + 0x632BE59BD9B4E019ULL)), rest...);
}

}  // namespace compmm
