#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace psm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Objective evaluation produced a non-finite value.
class EvaluationError : public Error {
public:
  using Error::Error;
};

/// Curvature model could not be built (factorization failed past the damping cap,
/// or a quasi-Newton model lost positive definiteness).
class CurvatureError : public Error {
public:
  using Error::Error;
};

/// Line search was handed a non-descent direction.
class NonDescentError : public Error {
public:
  using Error::Error;
};

/// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
public:
  ParseError(const std::string& what, int line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const { return line_; }

private:
  int line_;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

/// Not enough usable data to produce an estimate (e.g. convergence-order fits).
class InsufficientDataError : public Error {
public:
  using Error::Error;
};

/// Tiny deterministic generator for start vectors and sample directions.
/// splitmix64; not a stats-grade RNG, just reproducible scatter.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [-1, 1).
  double next_signed() { return 2.0 * next_double() - 1.0; }

  Vector vector(int dim) {
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v[i] = next_signed();
    return v;
  }

private:
  std::uint64_t state_;
};

struct PowerIterationResult {
  double value = 0.0;   // Rayleigh-quotient estimate of the dominant eigenvalue
  int iterations = 0;
  bool converged = false;
};

/// Dominant-eigenvalue estimate of a symmetric PSD operator given by matvec.
/// The start vector is deterministic so repeated runs agree bit for bit.
template <class MatVec>
PowerIterationResult power_iteration(MatVec&& apply, int dim,
                                     double rel_tol = 1e-3,
                                     int max_iters = 200) {
  SplitMix64 rng(0x9d2c5680u + static_cast<std::uint64_t>(dim));
  Vector v = Vector::Ones(dim) + 0.01 * rng.vector(dim);
  v /= v.norm();

  PowerIterationResult out;
  double lambda_prev = 0.0;
  for (int k = 0; k < max_iters; ++k) {
    Vector hv = apply(v);
    double lambda = v.dot(hv);
    double hv_norm = hv.norm();
    out.iterations = k + 1;
    out.value = lambda;
    if (hv_norm == 0.0) {
      out.value = 0.0;
      out.converged = true;
      return out;
    }
    if (k > 0 && std::abs(lambda - lambda_prev) <= rel_tol * std::abs(lambda)) {
      out.converged = true;
      return out;
    }
    lambda_prev = lambda;
    v = hv / hv_norm;
  }
  return out;
}

/// Spectral-norm estimate of a symmetric (possibly indefinite) operator:
/// power iteration on the operator with the norm-ratio estimate |H v| / |v|.
template <class MatVec>
double spectral_norm_estimate(MatVec&& apply, int dim, double rel_tol = 1e-6,
                              int max_iters = 500) {
  SplitMix64 rng(0x85ebca6bu + static_cast<std::uint64_t>(dim));
  Vector v = Vector::Ones(dim) + 0.01 * rng.vector(dim);
  v /= v.norm();

  double est_prev = 0.0;
  for (int k = 0; k < max_iters; ++k) {
    Vector hv = apply(v);
    double est = hv.norm();
    if (est == 0.0) return 0.0;
    if (k > 0 && std::abs(est - est_prev) <= rel_tol * est) return est;
    est_prev = est;
    v = hv / est;
  }
  return est_prev;
}

}  // namespace psm
