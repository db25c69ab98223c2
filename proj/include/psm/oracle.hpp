#pragma once

#include "psm/regularizer.hpp"
#include "psm/types.hpp"

#include <memory>
#include <optional>
#include <sstream>
#include <utility>

namespace psm {

/// Twice-differentiable convex function given by value/gradient/Hessian oracles.
/// Oracles are pure functions of x: no caching, no internal state mutation,
/// so instances are shareable across concurrent solver runs.
class SmoothOracle {
public:
  virtual ~SmoothOracle() = default;

  virtual int dimension() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;
  virtual Matrix hessian(const Vector& x) const = 0;

  /// Hessian-vector product; the dense default suits desk-scale problems.
  virtual Vector hessian_vec(const Vector& x, const Vector& v) const {
    return hessian(x) * v;
  }

  /// Known gradient-Lipschitz constant, when the model declares one.
  virtual std::optional<double> declared_grad_lipschitz() const { return std::nullopt; }
  /// Known Hessian-Lipschitz constant (local diagnostic only).
  virtual std::optional<double> declared_hess_lipschitz() const { return std::nullopt; }
};

/// Constants describing the problem class: gradient-Lipschitz ell,
/// optional Hessian-Lipschitz rho, optional local strong convexity m.
struct SmoothnessConstants {
  double grad_lipschitz = 0.0;
  std::optional<double> hess_lipschitz;
  std::optional<double> strong_convexity;

  void validate() const {
    if (!(grad_lipschitz > 0.0))
      throw ConfigError("grad_lipschitz must be positive");
    if (strong_convexity && !(*strong_convexity >= 0.0 &&
                              *strong_convexity <= grad_lipschitz))
      throw ConfigError("need grad_lipschitz >= strong_convexity >= 0");
  }
};

/// min F(x) = f(x) + r(x) with f smooth convex and r closed convex.
struct CompositeProblem {
  std::shared_ptr<const SmoothOracle> smooth;
  Regularizer reg = Regularizer::zero();
  /// Gradient-Lipschitz estimate; resolved once at x0 when absent.
  std::optional<double> lipschitz_estimate;

  int dimension() const { return smooth->dimension(); }
};

inline CompositeProblem make_problem(std::shared_ptr<const SmoothOracle> smooth,
                                     Regularizer reg,
                                     std::optional<double> lipschitz = std::nullopt) {
  if (lipschitz && !(*lipschitz > 0.0))
    throw ConfigError("lipschitz_estimate must be positive");
  return CompositeProblem{std::move(smooth), std::move(reg), lipschitz};
}

/// F(x) = f(x) + r(x). Indicator regularizers may return +infinity;
/// a non-finite smooth value is an evaluation error.
inline double eval_F(const CompositeProblem& problem, const Vector& x) {
  const double fx = problem.smooth->value(x);
  if (!std::isfinite(fx)) {
    std::ostringstream msg;
    msg << "smooth objective is non-finite (" << fx << ")";
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (!std::isfinite(x[i])) {
        msg << "; x[" << i << "] = " << x[i];
        break;
      }
    }
    throw EvaluationError(msg.str());
  }
  return fx + problem.reg.value(x);
}

struct LipschitzEstimate {
  double value = 0.0;
  bool floored = false;  // Hessian was numerically zero; the 1e-12 floor applies
  int iterations = 0;
};

/// Largest-eigenvalue estimate of the Hessian at x0 (power iteration,
/// relative tolerance 1e-3, at most 200 iterations) times a 1.1 safety factor.
/// Estimated once per run; the composite-gradient scale stays fixed afterwards.
inline LipschitzEstimate estimate_grad_lipschitz(const CompositeProblem& problem,
                                                 const Vector& x0) {
  const Matrix H = problem.smooth->hessian(x0);
  auto pit = power_iteration([&H](const Vector& v) -> Vector { return H * v; },
                             problem.dimension());
  LipschitzEstimate est;
  est.iterations = pit.iterations;
  if (pit.value <= 0.0) {
    est.value = 1e-12;
    est.floored = true;
    return est;
  }
  est.value = 1.1 * pit.value;
  return est;
}

}  // namespace psm
