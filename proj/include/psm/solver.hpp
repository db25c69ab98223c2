#pragma once

#include "psm/composite_gradient.hpp"
#include "psm/hessian.hpp"
#include "psm/oracle.hpp"
#include "psm/subproblem.hpp"
#include "psm/types.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace psm {

enum class SolveStatus {
  converged,
  iter_budget,
  time_budget,
  line_search_failure,
  non_descent,
};

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::iter_budget: return "iter_budget";
    case SolveStatus::time_budget: return "time_budget";
    case SolveStatus::line_search_failure: return "line_search_failure";
    case SolveStatus::non_descent: return "non_descent";
  }
  return "unknown";
}

/// One row per outer iteration. Rows with alpha > 0 describe the step taken
/// from x_t; the final row carries the terminal point with zeroed step fields,
/// so the summary always equals the last row.
struct TraceRecord {
  int t = 0;
  double F = 0.0;
  double norm_G = 0.0;
  double alpha = 0.0;
  double norm_dx = 0.0;     // ||Delta x_t|| of the full search direction
  double eta = 0.0;         // forcing term; 0 for non-forcing rules
  double gamma = 0.0;
  int inner_iters = 0;
  bool refresh = false;
  int hess_evals = 0;       // cumulative curvature-model Hessian evaluations
  double wall_s = 0.0;
  int ls_trials = 0;
  double lambda = 0.0;      // model decrease surrogate driving the line search
  StopReason sub_stop = StopReason::criterion_met;  // not serialized
};

/// Subproblem stopping policy for a solver run.
struct SubproblemSpec {
  StopRule::Kind kind = StopRule::Kind::fixed_tolerance;
  double epsilon = 1e-10;
  double gamma = 1.0;
  double eta_bar = 0.1;
  bool adaptive_eta = true;  // residual-driven schedule; false keeps eta = eta_bar
  int max_inner = 1000;      // absolute cap; for max_inner_iters this is K
};

struct SolverConfig {
  RefreshSchedule refresh = RefreshSchedule::every(1);

  enum class Curvature { exact, lbfgs };
  Curvature curvature = Curvature::exact;
  int lbfgs_memory = 50;

  SubproblemSpec subproblem;

  double ls_shrink = 0.5;
  int ls_budget = 50;

  double tol_G = 0.0;  // <= 0 resolves to 1e-8 (1 + ||G(x0)||)
  int max_iters = 500;
  double time_budget_s = kInfinity;
  double eta_min = 1e-10;

  bool collect_iterates = true;
  bool record_wall_time = true;  // false zeroes wall_s for byte-stable traces

  void validate() const {
    if (!(ls_shrink > 0.0 && ls_shrink < 1.0))
      throw ConfigError("line search shrink must lie in (0, 1)");
    if (subproblem.kind == StopRule::Kind::forcing && !(subproblem.gamma >= 1.0))
      throw ConfigError("forcing exponent gamma must be >= 1");
    if (!(subproblem.eta_bar > 0.0))
      throw ConfigError("eta_bar must be positive");
    if (max_iters < 0) throw ConfigError("max_iters must be nonnegative");
  }
};

struct SolveResult {
  Vector x;
  SolveStatus status = SolveStatus::converged;
  std::vector<TraceRecord> trace;
  std::vector<Vector> iterates;  // x_0 .. x_T when collect_iterates is set
  std::vector<std::shared_ptr<const HessianModel>> models;  // one per refresh
  CompositeGradientScale scale;
  double final_F = 0.0;
  double final_norm_G = 0.0;

  bool converged() const { return status == SolveStatus::converged; }
  int iterations() const { return trace.empty() ? 0 : trace.back().t; }
  int hessian_evaluations() const {
    return trace.empty() ? 0 : trace.back().hess_evals;
  }
};

/// Fix the composite-gradient scale for a run: explicit estimate, declared
/// constant, or a one-time power-iteration estimate at x0.
inline CompositeGradientScale resolve_scale(const CompositeProblem& problem,
                                            const Vector& x0) {
  if (problem.lipschitz_estimate) return make_scale(*problem.lipschitz_estimate);
  if (auto declared = problem.smooth->declared_grad_lipschitz())
    return make_scale(*declared);
  return make_scale(estimate_grad_lipschitz(problem, x0).value);
}

/// Forcing-term schedule state. update() implements
///   eta_t = clamp(||Ghat(x_t, x_{t-1}, H) - G(x_t)|| / ||G(x_{t-1})||,
///                 [eta_min, eta_bar])
/// where H is the curvature model that produced x_t.
struct ForcingState {
  double eta_bar = 0.1;
  double eta_min = 1e-10;
  double prev_residual_gap = 0.0;  // last numerator seen, for reporting
  double prev_norm_G = 0.0;
  double current = 0.1;

  static ForcingState initial(double eta_bar, double eta_min) {
    return ForcingState{eta_bar, eta_min, 0.0, 0.0, eta_bar};
  }
};

inline double forcing_term(ForcingState& state, double residual_gap_norm,
                           double g_prev_norm) {
  if (!(g_prev_norm > 0.0))
    throw ConfigError("forcing_term requires ||G(x_{t-1})|| > 0");
  const double raw = residual_gap_norm / g_prev_norm;
  state.prev_residual_gap = residual_gap_norm;
  state.prev_norm_G = g_prev_norm;
  state.current = std::max(state.eta_min, std::min(state.eta_bar, raw));
  return state.current;
}

struct LineSearchResult {
  double alpha = 1.0;
  double F_new = 0.0;
  int trials = 0;
  bool success = false;
};

/// Backtracking line search on the sufficient-descent criterion
///   F(x + alpha dx) - F(x) <= (alpha/4) lambda,
/// with lambda = dxᵀ grad + r(x + dx) - r(x). Starts at alpha = 1.
inline LineSearchResult line_search(const CompositeProblem& problem,
                                    const Vector& x_t, const Vector& dx,
                                    double r_trial, const Vector& grad,
                                    double F_curr, double shrink = 0.5,
                                    int budget = 50) {
  const double lambda = dx.dot(grad) + r_trial - problem.reg.value(x_t);
  if (!(lambda < 0.0))
    throw NonDescentError("line search requires a descent direction (lambda = " +
                          std::to_string(lambda) + ")");
  LineSearchResult out;
  double alpha = 1.0;
  for (int trial = 1; trial <= budget; ++trial) {
    const double F_new = eval_F(problem, x_t + alpha * dx);
    out.trials = trial;
    if (F_new - F_curr <= 0.25 * alpha * lambda) {
      out.alpha = alpha;
      out.F_new = F_new;
      out.success = true;
      return out;
    }
    alpha *= shrink;
  }
  out.alpha = alpha;
  out.F_new = F_curr;
  out.success = false;
  return out;
}

namespace detail {

class WallClock {
public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

private:
  std::chrono::steady_clock::time_point start_;
};

struct DriverMode {
  bool line_search = true;  // false: unit step with a monotonicity safeguard
};

inline SolveResult run_driver(const CompositeProblem& problem, const Vector& x0,
                              const SolverConfig& config, DriverMode mode) {
  config.validate();
  const int d = problem.dimension();
  if (x0.size() != d) throw ConfigError("x0 dimension mismatch");

  WallClock clock;
  SolveResult result;
  result.scale = resolve_scale(problem, x0);
  const CompositeGradientScale scale = result.scale;
  const Regularizer& reg = problem.reg;

  Vector x = x0;
  Vector grad = problem.smooth->gradient(x);
  Vector G = composite_gradient(reg, x, grad, scale);
  double norm_G = G.norm();
  double F_curr = eval_F(problem, x);
  if (reg.is_indicator() && !std::isfinite(F_curr))
    throw ConfigError("x0 is infeasible for the indicator regularizer");

  const double tol_G =
      config.tol_G > 0.0 ? config.tol_G : 1e-8 * (1.0 + norm_G);

  int hess_evals = 0;
  double model_lipschitz = 0.0;  // refreshed together with the model
  std::shared_ptr<const HessianModel> model;
  HessianModel lbfgs_acc = HessianModel::lbfgs(
      d, config.curvature == SolverConfig::Curvature::lbfgs ? config.lbfgs_memory
                                                            : 1);
  ForcingState forcing =
      ForcingState::initial(config.subproblem.eta_bar, config.eta_min);

  // state of the previous accepted step, for the adaptive forcing term
  Vector x_prev, grad_prev;
  std::shared_ptr<const HessianModel> model_prev;
  double norm_G_prev = 0.0;

  if (config.collect_iterates) result.iterates.push_back(x);

  auto wall_now = [&]() {
    return config.record_wall_time ? clock.seconds() : 0.0;
  };
  auto push_terminal = [&](int t, SolveStatus status) {
    TraceRecord row;
    row.t = t;
    row.F = F_curr;
    row.norm_G = norm_G;
    row.eta = 0.0;
    row.gamma = config.subproblem.gamma;
    row.hess_evals = hess_evals;
    row.wall_s = wall_now();
    result.trace.push_back(row);
    result.status = status;
    result.x = x;
    result.final_F = F_curr;
    result.final_norm_G = norm_G;
  };

  for (int t = 0;; ++t) {
    if (norm_G <= tol_G) {
      push_terminal(t, SolveStatus::converged);
      return result;
    }
    if (t >= config.max_iters) {
      push_terminal(t, SolveStatus::iter_budget);
      return result;
    }
    if (clock.seconds() > config.time_budget_s) {
      push_terminal(t, SolveStatus::time_budget);
      return result;
    }

    const bool refreshed = needs_refresh(t, config.refresh);
    if (refreshed) {
      if (config.curvature == SolverConfig::Curvature::exact) {
        model = std::make_shared<HessianModel>(refresh_exact(problem, x, t));
        ++hess_evals;
      } else {
        model = std::make_shared<HessianModel>(lbfgs_acc.with_refresh_iteration(t));
      }
      result.models.push_back(model);
      auto pit = power_iteration(
          [&](const Vector& v) -> Vector { return model->apply(v); }, d);
      if (!(pit.value > 0.0) || !std::isfinite(pit.value))
        throw CurvatureError("curvature model is not positive definite");
      model_lipschitz = pit.value;
    }

    // forcing term for this iteration
    double eta_t = 0.0;
    if (config.subproblem.kind == StopRule::Kind::forcing) {
      if (config.subproblem.adaptive_eta && t > 0) {
        const Vector ghat =
            subproblem_residual(x, x_prev, grad_prev, *model_prev, reg, scale);
        eta_t = forcing_term(forcing, (ghat - G).norm(), norm_G_prev);
      } else {
        eta_t = forcing.current;  // eta_bar at t = 0 or under a constant schedule
      }
    }

    StopRule rule;
    switch (config.subproblem.kind) {
      case StopRule::Kind::fixed_tolerance:
        rule = StopRule::fixed(config.subproblem.epsilon, config.subproblem.max_inner);
        break;
      case StopRule::Kind::forcing:
        rule = StopRule::forcing(config.subproblem.gamma, eta_t, norm_G,
                                 config.subproblem.max_inner);
        break;
      case StopRule::Kind::max_inner_iters:
        rule = StopRule::inner_cap(config.subproblem.max_inner);
        break;
    }

    QuadraticModel qmodel;
    qmodel.anchor = x;
    qmodel.grad = grad;
    qmodel.curvature = model;
    qmodel.model_lipschitz = model_lipschitz;
    SubproblemResult sub = solve_subproblem(qmodel, reg, rule, scale);

    const Vector dx = sub.z - x;
    const double r_trial = reg.value(sub.z);
    const double lambda = dx.dot(grad) + r_trial - reg.value(x);

    double alpha = 1.0;
    double F_next = 0.0;
    int ls_trials = 0;
    if (mode.line_search) {
      if (!(lambda < 0.0)) {
        push_terminal(t, SolveStatus::non_descent);
        return result;
      }
      LineSearchResult ls = line_search(problem, x, dx, r_trial, grad, F_curr,
                                        config.ls_shrink, config.ls_budget);
      if (!ls.success) {
        push_terminal(t, SolveStatus::line_search_failure);
        return result;
      }
      alpha = ls.alpha;
      F_next = ls.F_new;
      ls_trials = ls.trials;
    } else {
      // unit step; fall back to the line search only if monotonicity breaks
      F_next = eval_F(problem, sub.z);
      if (F_next > F_curr + 1e-12 * (1.0 + std::abs(F_curr))) {
        if (!(lambda < 0.0)) {
          push_terminal(t, SolveStatus::non_descent);
          return result;
        }
        LineSearchResult ls = line_search(problem, x, dx, r_trial, grad, F_curr,
                                          config.ls_shrink, config.ls_budget);
        if (!ls.success) {
          push_terminal(t, SolveStatus::line_search_failure);
          return result;
        }
        alpha = ls.alpha;
        F_next = ls.F_new;
        ls_trials = ls.trials;
      }
    }

    TraceRecord row;
    row.t = t;
    row.F = F_curr;
    row.norm_G = norm_G;
    row.alpha = alpha;
    row.norm_dx = dx.norm();
    row.eta = eta_t;
    row.gamma = config.subproblem.gamma;
    row.inner_iters = sub.inner_iters;
    row.refresh = refreshed;
    row.hess_evals = hess_evals;
    row.wall_s = wall_now();
    row.ls_trials = ls_trials;
    row.lambda = lambda;
    row.sub_stop = sub.stop_reason;
    result.trace.push_back(row);

    x_prev = x;
    grad_prev = grad;
    model_prev = model;
    norm_G_prev = norm_G;

    x = alpha == 1.0 ? sub.z : Vector(x + alpha * dx);
    grad = problem.smooth->gradient(x);
    G = composite_gradient(reg, x, grad, scale);
    norm_G = G.norm();
    F_curr = F_next;

    if (config.curvature == SolverConfig::Curvature::lbfgs)
      lbfgs_acc = lbfgs_acc.updated(x - x_prev, grad - grad_prev);

    if (config.collect_iterates) result.iterates.push_back(x);
  }
}

}  // namespace detail

/// Outer driver with Hessian refresh every n iterations and backtracking
/// line search on the sufficient-descent criterion.
inline SolveResult solve_generic(const CompositeProblem& problem, const Vector& x0,
                                 const SolverConfig& config) {
  return detail::run_driver(problem, x0, config, detail::DriverMode{true});
}

/// Unit-step driver whose subproblems stop by the inexactness rule
/// ||Ghat|| <= eta_t ||G||^gamma. A monotonicity safeguard falls back to the
/// line search for any iteration where F would increase; near the solution
/// the safeguard stays inactive and steps are exactly unit.
inline SolveResult solve_inexact(const CompositeProblem& problem, const Vector& x0,
                                 const SolverConfig& config) {
  return detail::run_driver(problem, x0, config, detail::DriverMode{false});
}

enum class BaselineVariant { ista, fista };

inline const char* to_string(BaselineVariant v) {
  return v == BaselineVariant::ista ? "ista" : "fista";
}

/// Proximal-gradient baselines sharing the trace schema. The smooth-curvature
/// estimate doubles whenever the quadratic upper bound fails at the trial point.
inline SolveResult solve_baseline(const CompositeProblem& problem, const Vector& x0,
                                  BaselineVariant variant,
                                  const SolverConfig& config) {
  config.validate();
  const Regularizer& reg = problem.reg;
  detail::WallClock clock;

  SolveResult result;
  result.scale = resolve_scale(problem, x0);
  const CompositeGradientScale scale = result.scale;

  Vector x = x0;
  Vector y = x0;  // extrapolation point (fista); equals x for ista
  double momentum = 1.0;
  double L = scale.ell;

  Vector grad = problem.smooth->gradient(x);
  Vector G = composite_gradient(reg, x, grad, scale);
  double norm_G = G.norm();
  double F_curr = eval_F(problem, x);
  const double tol_G =
      config.tol_G > 0.0 ? config.tol_G : 1e-8 * (1.0 + norm_G);

  if (config.collect_iterates) result.iterates.push_back(x);
  auto wall_now = [&]() {
    return config.record_wall_time ? clock.seconds() : 0.0;
  };
  auto push_terminal = [&](int t, SolveStatus status) {
    TraceRecord row;
    row.t = t;
    row.F = F_curr;
    row.norm_G = norm_G;
    row.wall_s = wall_now();
    result.trace.push_back(row);
    result.status = status;
    result.x = x;
    result.final_F = F_curr;
    result.final_norm_G = norm_G;
  };

  for (int t = 0;; ++t) {
    if (norm_G <= tol_G) {
      push_terminal(t, SolveStatus::converged);
      return result;
    }
    if (t >= config.max_iters) {
      push_terminal(t, SolveStatus::iter_budget);
      return result;
    }
    if (clock.seconds() > config.time_budget_s) {
      push_terminal(t, SolveStatus::time_budget);
      return result;
    }

    const Vector grad_y =
        variant == BaselineVariant::fista ? problem.smooth->gradient(y) : grad;
    const double f_y = problem.smooth->value(y);

    int doublings = 0;
    Vector z;
    while (true) {
      z = reg.prox(y - grad_y / L, 1.0 / L);
      const Vector step = z - y;
      const double upper =
          f_y + grad_y.dot(step) + 0.5 * L * step.squaredNorm();
      const double f_z = problem.smooth->value(z);
      if (f_z <= upper + 1e-12 * (1.0 + std::abs(upper))) break;
      L *= 2.0;
      ++doublings;
      if (doublings > 120)
        throw EvaluationError("baseline backtracking cannot certify decrease");
    }

    const Vector x_old = x;
    const double F_next = eval_F(problem, z);

    TraceRecord row;
    row.t = t;
    row.F = F_curr;
    row.norm_G = norm_G;
    row.alpha = scale.ell / L;  // effective step relative to the run scale
    row.norm_dx = (z - x_old).norm();
    row.ls_trials = doublings;
    row.wall_s = wall_now();
    row.lambda = (z - x_old).dot(grad) + reg.value(z) - reg.value(x_old);
    result.trace.push_back(row);

    x = z;
    if (variant == BaselineVariant::fista) {
      const double momentum_next =
          0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
      y = x + ((momentum - 1.0) / momentum_next) * (x - x_old);
      momentum = momentum_next;
    } else {
      y = x;
    }

    grad = problem.smooth->gradient(x);
    G = composite_gradient(reg, x, grad, scale);
    norm_G = G.norm();
    F_curr = F_next;
    if (config.collect_iterates) result.iterates.push_back(x);
  }
}

}  // namespace psm
