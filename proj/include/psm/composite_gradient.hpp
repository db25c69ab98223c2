#pragma once

#include "psm/hessian.hpp"
#include "psm/oracle.hpp"
#include "psm/regularizer.hpp"
#include "psm/types.hpp"

namespace psm {

/// Scale shared by the composite gradient and the subproblem residual.
/// Both norms enter the inexactness criterion, so a run fixes one ell for
/// its whole lifetime.
struct CompositeGradientScale {
  double ell = 1.0;
};

inline CompositeGradientScale make_scale(double ell) {
  if (!(ell > 0.0)) throw ConfigError("composite gradient scale must be positive");
  return CompositeGradientScale{ell};
}

/// G(x) = ell (x - prox_{r/ell}(x - grad/ell)). Vanishes exactly at minimizers
/// of f + r, so ||G|| serves as the optimality residual.
inline Vector composite_gradient(const Regularizer& reg, const Vector& x,
                                 const Vector& grad, CompositeGradientScale scale) {
  const double ell = scale.ell;
  return ell * (x - reg.prox(x - grad / ell, 1.0 / ell));
}

inline Vector composite_gradient(const CompositeProblem& problem, const Vector& x,
                                 CompositeGradientScale scale) {
  return composite_gradient(problem.reg, x, problem.smooth->gradient(x), scale);
}

/// Composite gradient of the quadratic model anchored at x:
///   Ghat(x', x, H) = ell (x' - prox_{r/ell}(x' - (grad + H(x'-x))/ell)).
/// Zero iff x' exactly solves the proximal Newton subproblem at (x, H);
/// at x' = x it coincides with G(x).
inline Vector subproblem_residual(const Vector& x_next, const Vector& x,
                                  const Vector& grad, const HessianModel& curvature,
                                  const Regularizer& reg,
                                  CompositeGradientScale scale) {
  const double ell = scale.ell;
  const Vector model_grad = grad + curvature.apply(x_next - x);
  return ell * (x_next - reg.prox(x_next - model_grad / ell, 1.0 / ell));
}

inline Vector subproblem_residual(const Vector& x_next, const Vector& x,
                                  const Vector& grad, const HessianModel& curvature,
                                  const CompositeProblem& problem,
                                  CompositeGradientScale scale) {
  return subproblem_residual(x_next, x, grad, curvature, problem.reg, scale);
}

}  // namespace psm
