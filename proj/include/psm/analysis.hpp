#pragma once

#include "psm/composite_gradient.hpp"
#include "psm/hessian.hpp"
#include "psm/solver.hpp"
#include "psm/types.hpp"

#include <cmath>
#include <optional>
#include <ostream>
#include <vector>

namespace psm {

/// Smallest valid error for order fitting; below this the sequence is noise.
inline constexpr double kOrderErrorFloor = 1e-14;

inline double predicted_order_exact(int n) {
  return std::pow(static_cast<double>(n + 1), 1.0 / n);
}

/// Constant-forcing prediction for gamma in (1, 2).
inline double predicted_order_forcing(int n, double gamma) {
  return std::pow(n * (gamma - 1.0) + 1.0, 1.0 / n);
}

/// Empirical order of convergence fitted from e_t = ||x_t - x_ref||.
/// Per-step exponents p_t = log e_{t+1} / log e_t are valid only when both
/// errors lie in (1e-14, 1); the headline estimate aggregates the last full
/// refresh cycle, whose exponent product tracks n+1 for period-n refreshes.
struct OrderEstimate {
  std::vector<double> errors;
  std::vector<double> exponents;      // aligned with errors[t] -> errors[t+1]
  std::vector<bool> exponent_valid;
  double p_hat = 0.0;                 // geometric mean over the final full cycle
  double cycle_product = 0.0;         // product of exponents over that cycle
  int cycle_start = -1;
  int refresh_period = 1;
  double predicted = 0.0;             // (n+1)^{1/n}
};

inline OrderEstimate estimate_order(const std::vector<Vector>& iterates,
                                    const Vector& x_ref, int refresh_period) {
  if (refresh_period < 1)
    throw ConfigError("estimate_order needs a finite refresh period >= 1");
  const int count = static_cast<int>(iterates.size());
  if (count < refresh_period + 2)
    throw InsufficientDataError("need at least n + 2 iterates for an order fit");

  OrderEstimate est;
  est.refresh_period = refresh_period;
  est.predicted = predicted_order_exact(refresh_period);
  est.errors.resize(count);
  for (int t = 0; t < count; ++t) est.errors[t] = (iterates[t] - x_ref).norm();

  auto valid_err = [](double e) { return e > kOrderErrorFloor && e < 1.0; };
  est.exponents.assign(count - 1, 0.0);
  est.exponent_valid.assign(count - 1, false);
  for (int t = 0; t + 1 < count; ++t) {
    if (valid_err(est.errors[t]) && valid_err(est.errors[t + 1])) {
      est.exponents[t] = std::log(est.errors[t + 1]) / std::log(est.errors[t]);
      est.exponent_valid[t] = true;
    }
  }

  // last cycle [k n, (k+1) n) whose exponents are all valid
  for (int start = ((count - 2) / refresh_period) * refresh_period; start >= 0;
       start -= refresh_period) {
    if (start + refresh_period > count - 1) continue;
    bool ok = true;
    for (int t = start; t < start + refresh_period; ++t)
      if (!est.exponent_valid[t]) ok = false;
    if (!ok) continue;
    double log_sum = 0.0;
    double product = 1.0;
    for (int t = start; t < start + refresh_period; ++t) {
      log_sum += std::log(est.exponents[t]);
      product *= est.exponents[t];
    }
    est.cycle_start = start;
    est.p_hat = std::exp(log_sum / refresh_period);
    est.cycle_product = product;
    return est;
  }
  throw InsufficientDataError(
      "no full refresh cycle with errors inside (1e-14, 1)");
}

/// e_{t+1}/e_t over the tail of an error sequence, skipping the noise floor.
inline std::vector<double> contraction_ratios(const std::vector<double>& errors,
                                              double floor = 1e-13) {
  std::vector<double> ratios;
  for (std::size_t t = 0; t + 1 < errors.size(); ++t)
    if (errors[t] > floor && errors[t + 1] > floor)
      ratios.push_back(errors[t + 1] / errors[t]);
  return ratios;
}

/// Smallest Rayleigh quotient of a curvature model over deterministic samples.
inline double sampled_min_rayleigh(const HessianModel& model, int samples = 16,
                                   std::uint64_t seed = 0x5bd1e995u) {
  SplitMix64 rng(seed + static_cast<std::uint64_t>(model.dimension()));
  double lo = kInfinity;
  for (int k = 0; k < samples; ++k) {
    Vector v = rng.vector(model.dimension());
    const double vv = v.squaredNorm();
    if (vv == 0.0) continue;
    lo = std::min(lo, v.dot(model.apply(v)) / vv);
  }
  return lo;
}

struct DescentAudit {
  int checked = 0;
  int violations = 0;          // F(x_{t+1}) - F(x_t) > (alpha/4) lambda_t + tol
  double worst_margin = 0.0;   // most positive violation slack seen
  int sign_violations = 0;     // lambda_t > 0 on a stepped iteration
  int curvature_violations = 0;  // lambda_t > -m_hat ||dx||^2 when m_hat given
};

/// Per-iteration sufficient-descent audit over a trace from the line-search
/// driver. min_rayleigh, when supplied, carries one m_hat per trace row and
/// enables the stronger lambda_t <= -m_hat ||dx||^2 check.
inline DescentAudit audit_descent(const std::vector<TraceRecord>& trace,
                                  const std::vector<double>& min_rayleigh = {}) {
  DescentAudit audit;
  for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
    const TraceRecord& row = trace[i];
    if (row.alpha <= 0.0) continue;  // terminal row
    const double decrease = trace[i + 1].F - row.F;
    const double bound = 0.25 * row.alpha * row.lambda;
    const double tol = 1e-10 * (1.0 + std::abs(row.F));
    ++audit.checked;
    const double margin = decrease - bound - tol;
    if (margin > 0.0) {
      ++audit.violations;
      audit.worst_margin = std::max(audit.worst_margin, margin);
    }
    if (row.lambda > 0.0) ++audit.sign_violations;
    if (i < min_rayleigh.size()) {
      const double quad = -min_rayleigh[i] * row.norm_dx * row.norm_dx;
      if (row.lambda > quad + tol) ++audit.curvature_violations;
    }
  }
  return audit;
}

struct SandwichAudit {
  int checked = 0;
  int lower_violations = 0;  // (m/2) e > ||G||
  int upper_violations = 0;  // ||G|| > 2 ell e
  double worst_slack = 0.0;
};

/// Checks (m/2)||x - x*|| <= ||G(x)|| <= 2 ell ||x - x*|| at each sample.
/// The additive slack absorbs the reference point's own residual (x_ref is a
/// solver output, accurate to roughly tol/m, not an exact optimizer).
inline SandwichAudit audit_sandwich(const CompositeProblem& problem,
                                    const Vector& x_ref,
                                    const std::vector<Vector>& samples,
                                    double ell, double m, double slack = 1e-9) {
  SandwichAudit audit;
  const CompositeGradientScale scale = make_scale(ell);
  for (const Vector& x : samples) {
    const double e = (x - x_ref).norm();
    const double g = composite_gradient(problem, x, scale).norm();
    ++audit.checked;
    if (0.5 * m * e > g + slack) {
      ++audit.lower_violations;
      audit.worst_slack = std::max(audit.worst_slack, 0.5 * m * e - g);
    }
    if (g > 2.0 * ell * e + slack) {
      ++audit.upper_violations;
      audit.worst_slack = std::max(audit.worst_slack, g - 2.0 * ell * e);
    }
  }
  return audit;
}

struct ForcingAudit {
  enum class Verdict { decayed, above_threshold, constant_schedule, indeterminate };
  Verdict verdict = Verdict::indeterminate;
  double final_eta = 0.0;
  double last3_max = 0.0;
};

inline const char* to_string(ForcingAudit::Verdict v) {
  switch (v) {
    case ForcingAudit::Verdict::decayed: return "decayed";
    case ForcingAudit::Verdict::above_threshold: return "above_threshold";
    case ForcingAudit::Verdict::constant_schedule: return "constant_schedule";
    case ForcingAudit::Verdict::indeterminate: return "indeterminate";
  }
  return "unknown";
}

/// Tail behaviour of the forcing term: converged adaptive runs should push
/// the last few eta_t below 1e-3.
inline ForcingAudit audit_forcing_decay(const std::vector<TraceRecord>& trace,
                                        bool adaptive_schedule, bool converged) {
  ForcingAudit audit;
  std::vector<double> etas;
  for (const TraceRecord& row : trace)
    if (row.alpha > 0.0) etas.push_back(row.eta);
  if (!etas.empty()) {
    audit.final_eta = etas.back();
    const std::size_t lo = etas.size() > 3 ? etas.size() - 3 : 0;
    for (std::size_t i = lo; i < etas.size(); ++i)
      audit.last3_max = std::max(audit.last3_max, etas[i]);
  }
  if (!adaptive_schedule) {
    audit.verdict = ForcingAudit::Verdict::constant_schedule;
  } else if (!converged || etas.empty()) {
    audit.verdict = ForcingAudit::Verdict::indeterminate;
  } else {
    audit.verdict = audit.last3_max <= 1e-3
                        ? ForcingAudit::Verdict::decayed
                        : ForcingAudit::Verdict::above_threshold;
  }
  return audit;
}

/// ||H_{t'} - grad^2 f(x_{t'})|| at each refresh point (dense; small d).
inline std::vector<double> audit_hessian_error(
    const CompositeProblem& problem, const std::vector<Vector>& refresh_points,
    const std::vector<std::shared_ptr<const HessianModel>>& models) {
  if (refresh_points.size() != models.size())
    throw ConfigError("audit_hessian_error: one refresh point per model");
  std::vector<double> errors;
  errors.reserve(models.size());
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (models[k]->dimension() > 500)
      throw ConfigError("audit_hessian_error supports d <= 500");
    const Matrix diff =
        models[k]->dense() - problem.smooth->hessian(refresh_points[k]);
    errors.push_back(spectral_norm_estimate(
        [&diff](const Vector& v) -> Vector { return diff * v; },
        static_cast<int>(diff.rows())));
  }
  return errors;
}

/// Refresh points (iterates at each model's refresh iteration) for a run.
inline std::vector<Vector> refresh_points(const SolveResult& result) {
  std::vector<Vector> points;
  points.reserve(result.models.size());
  for (const auto& model : result.models) {
    const int t = model->refresh_iteration();
    if (t < 0 || t >= static_cast<int>(result.iterates.size()))
      throw ConfigError("refresh iteration outside the recorded iterates");
    points.push_back(result.iterates[t]);
  }
  return points;
}

/// Aggregated audit report with a stable key=value schema.
struct AuditReport {
  DescentAudit descent;
  std::optional<SandwichAudit> sandwich;
  std::optional<ForcingAudit> forcing;
  std::optional<std::vector<double>> hessian_errors;

  void write_kv(std::ostream& out) const {
    out << "descent.checked=" << descent.checked << '\n'
        << "descent.violations=" << descent.violations << '\n'
        << "descent.worst_margin=" << descent.worst_margin << '\n'
        << "descent.sign_violations=" << descent.sign_violations << '\n'
        << "descent.curvature_violations=" << descent.curvature_violations
        << '\n';
    if (sandwich) {
      out << "sandwich.checked=" << sandwich->checked << '\n'
          << "sandwich.lower_violations=" << sandwich->lower_violations << '\n'
          << "sandwich.upper_violations=" << sandwich->upper_violations << '\n';
    }
    if (forcing) {
      out << "forcing.verdict=" << to_string(forcing->verdict) << '\n'
          << "forcing.final_eta=" << forcing->final_eta << '\n'
          << "forcing.last3_max=" << forcing->last3_max << '\n';
    }
    if (hessian_errors) {
      out << "hessian_error.count=" << hessian_errors->size() << '\n';
      for (std::size_t i = 0; i < hessian_errors->size(); ++i)
        out << "hessian_error." << i << '=' << (*hessian_errors)[i] << '\n';
    }
  }
};

}  // namespace psm
