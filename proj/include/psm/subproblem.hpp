#pragma once

#include "psm/composite_gradient.hpp"
#include "psm/hessian.hpp"
#include "psm/regularizer.hpp"
#include "psm/types.hpp"

#include <algorithm>
#include <deque>
#include <memory>
#include <utility>

namespace psm {

/// Quadratic model of the smooth part at anchor x_t:
///   q(z) = gradᵀ(z - x_t) + 1/2 (z - x_t)ᵀ H (z - x_t),
/// so q(x_t) = 0 and the model gradient at z is grad + H(z - x_t).
struct QuadraticModel {
  Vector anchor;
  Vector grad;
  std::shared_ptr<const HessianModel> curvature;
  double model_lipschitz = 0.0;  // largest-eigenvalue estimate of H

  Vector smooth_gradient(const Vector& z) const {
    return grad + curvature->apply(z - anchor);
  }

  double smooth_value(const Vector& z) const {
    const Vector w = z - anchor;
    return grad.dot(w) + 0.5 * w.dot(curvature->apply(w));
  }
};

inline QuadraticModel build_model(Vector x_t, Vector grad,
                                  std::shared_ptr<const HessianModel> curvature) {
  QuadraticModel model;
  const int d = static_cast<int>(x_t.size());
  auto pit = power_iteration(
      [&](const Vector& v) -> Vector { return curvature->apply(v); }, d);
  if (!(pit.value > 0.0) || !std::isfinite(pit.value))
    throw CurvatureError("curvature model is not positive definite");
  model.anchor = std::move(x_t);
  model.grad = std::move(grad);
  model.curvature = std::move(curvature);
  model.model_lipschitz = pit.value;
  return model;
}

/// When the inner solver stops.
///  - fixed_tolerance: residual norm <= epsilon.
///  - forcing: residual norm <= eta * ||G(x_t)||^gamma (the inexactness rule).
///  - max_inner_iters: run exactly K iterations; the residual test never fires.
/// max_iters is the absolute cap that applies in every variant.
struct StopRule {
  enum class Kind { fixed_tolerance, forcing, max_inner_iters };

  Kind kind = Kind::fixed_tolerance;
  double epsilon = 1e-10;
  double gamma = 1.0;
  double eta = 0.1;
  double anchor_grad_norm = 0.0;  // ||G(x_t)|| entering the forcing threshold
  int max_iters = 1000;

  static StopRule fixed(double eps, int cap = 1000) {
    StopRule r;
    r.kind = Kind::fixed_tolerance;
    r.epsilon = eps;
    r.max_iters = cap;
    return r;
  }

  static StopRule forcing(double gamma, double eta, double norm_G, int cap = 1000) {
    if (!(gamma >= 1.0)) throw ConfigError("forcing exponent gamma must be >= 1");
    if (!(eta > 0.0)) throw ConfigError("forcing term eta must be positive");
    StopRule r;
    r.kind = Kind::forcing;
    r.gamma = gamma;
    r.eta = eta;
    r.anchor_grad_norm = norm_G;
    r.max_iters = cap;
    return r;
  }

  static StopRule inner_cap(int k) {
    if (k < 1) throw ConfigError("inner iteration cap must be >= 1");
    StopRule r;
    r.kind = Kind::max_inner_iters;
    r.max_iters = k;
    return r;
  }

  double threshold() const {
    switch (kind) {
      case Kind::fixed_tolerance:
        return epsilon;
      case Kind::forcing:
        return eta * std::pow(anchor_grad_norm, gamma);
      case Kind::max_inner_iters:
        return -1.0;
    }
    return -1.0;
  }
};

inline bool check_stop(double residual_norm, const StopRule& rule) {
  if (rule.kind == StopRule::Kind::max_inner_iters) return false;
  return residual_norm <= rule.threshold();
}

enum class StopReason { criterion_met, iter_cap, stalled };

struct SubproblemResult {
  Vector z;
  double residual_norm = 0.0;  // ||Ghat(z, x_t, H)|| at the returned point
  int inner_iters = 0;
  StopReason stop_reason = StopReason::criterion_met;
};

/// Inexact proximal Newton step: spectral (Barzilai-Borwein) proximal gradient
/// on the model, SpaRSA style. Warm-starts at z0 = x_t, so the first residual
/// seen equals G(x_t); the stopping rule is evaluated after each accepted step.
/// BB steps are clamped to [1e-3, 1e3]/L_H with first step 1/L_H, and trial
/// points pass a nonmonotone sufficient-decrease test over the last 5 accepted
/// model values.
inline SubproblemResult solve_subproblem(const QuadraticModel& model,
                                         const Regularizer& reg,
                                         const StopRule& rule,
                                         CompositeGradientScale scale) {
  if (rule.max_iters < 1) throw ConfigError("subproblem iteration cap must be >= 1");
  const double L = model.model_lipschitz;
  const double step_lo = 1e-3 / L;
  const double step_hi = 1e3 / L;
  const double stall_tol = 1e-16 * (1.0 + model.anchor.norm());
  constexpr double kSigma = 1e-4;  // sufficient-decrease constant
  constexpr int kWindow = 5;

  auto model_value = [&](const Vector& z) {
    return reg.value(z) + model.smooth_value(z);
  };
  auto residual = [&](const Vector& z, const Vector& smooth_grad) -> Vector {
    return scale.ell *
           (z - reg.prox(z - smooth_grad / scale.ell, 1.0 / scale.ell));
  };

  Vector z = model.anchor;
  Vector g = model.grad;  // model smooth gradient at z
  double q = model_value(z);
  std::deque<double> window{q};

  SubproblemResult best;
  best.z = z;
  best.residual_norm = residual(z, g).norm();
  best.stop_reason = StopReason::stalled;

  double step = 1.0 / L;
  for (int k = 1; k <= rule.max_iters; ++k) {
    const double q_ref = *std::max_element(window.begin(), window.end());

    Vector trial, trial_grad;
    double q_trial = 0.0;
    bool stalled = false;
    while (true) {
      trial = reg.prox(z - step * g, step);
      const double move2 = (trial - z).squaredNorm();
      if (move2 <= stall_tol * stall_tol) {
        stalled = true;
        break;
      }
      trial_grad = model.smooth_gradient(trial);
      // reuse H(trial - anchor) from the gradient: q = gradᵀw + 1/2 wᵀ(Hw)
      const Vector w = trial - model.anchor;
      q_trial = reg.value(trial) + model.grad.dot(w) + 0.5 * w.dot(trial_grad - model.grad);
      if (q_trial <= q_ref - kSigma / (2.0 * step) * move2) break;
      step *= 0.5;
      if (step < stall_tol) {
        stalled = true;
        break;
      }
    }
    if (stalled) {
      best.inner_iters = k - 1;
      best.stop_reason = StopReason::stalled;
      return best;
    }

    const Vector s = trial - z;
    const Vector y = trial_grad - g;  // = H s for the quadratic model

    z = trial;
    g = trial_grad;
    q = q_trial;
    window.push_back(q);
    if (static_cast<int>(window.size()) > kWindow) window.pop_front();

    const double res_norm = residual(z, g).norm();
    if (res_norm <= best.residual_norm) {
      best.z = z;
      best.residual_norm = res_norm;
    }

    if (check_stop(res_norm, rule))
      return SubproblemResult{z, res_norm, k, StopReason::criterion_met};
    if (k == rule.max_iters)
      return SubproblemResult{z, res_norm, k, StopReason::iter_cap};

    const double sty = s.dot(y);
    step = sty > 0.0 ? std::clamp(s.squaredNorm() / sty, step_lo, step_hi)
                     : step_hi;
  }
  return best;  // unreachable; the cap branch above returns
}

}  // namespace psm
