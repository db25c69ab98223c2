#include "psm/analysis.hpp"

#include "psm/fixtures.hpp"
#include "psm/losses.hpp"
#include "psm/solver.hpp"
#include "support/enumeration.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace psm;

namespace {

// iterates with a prescribed error sequence along a fixed direction
std::vector<Vector> synthetic_iterates(const std::vector<double>& errors,
                                       const Vector& x_ref) {
  Vector dir = Vector::Zero(x_ref.size());
  dir[0] = 1.0;
  std::vector<Vector> out;
  for (double e : errors) out.push_back(x_ref + e * dir);
  return out;
}

std::vector<double> power_sequence(double p, double e0, int count) {
  std::vector<double> e{e0};
  for (int t = 1; t < count; ++t)
    e.push_back(std::pow(e.back(), p));
  return e;
}

}  // namespace

TEST_CASE("order estimation recovers prescribed exponents") {
  // zero reference keeps x_ref + e*dir exact; a nonzero anchor would round
  // the small errors away before the estimator sees them
  const Vector x_ref = Vector::Zero(3);
  for (double p : {1.2, 1.442, 2.0, 3.0}) {
    const auto iterates = synthetic_iterates(power_sequence(p, 0.1, 40), x_ref);
    const OrderEstimate est = estimate_order(iterates, x_ref, 1);
    CHECK(est.p_hat == Catch::Approx(p).margin(1e-6));
    CHECK(est.predicted == Catch::Approx(2.0));
  }
}

TEST_CASE("cycle aggregation matches the refresh-period pattern") {
  // log-error pattern per cycle: L, 2L, 3L, 4L -> exponents 2, 3/2, 4/3
  const Vector x_ref = Vector::Zero(2);
  std::vector<double> errors;
  double log_e = std::log(0.2);
  for (int cycle = 0; cycle < 3; ++cycle) {
    for (int j = 1; j <= 3; ++j) errors.push_back(std::exp(log_e * j));
    log_e *= 4.0;
  }
  errors.push_back(std::exp(log_e));
  const auto iterates = synthetic_iterates(errors, x_ref);
  const OrderEstimate est = estimate_order(iterates, x_ref, 3);
  CHECK(est.p_hat == Catch::Approx(std::pow(4.0, 1.0 / 3.0)).margin(1e-9));
  CHECK(est.cycle_product == Catch::Approx(4.0).margin(1e-9));
  CHECK(est.predicted == Catch::Approx(std::pow(4.0, 1.0 / 3.0)));
}

TEST_CASE("order estimation demands enough valid iterates") {
  const Vector x_ref = Vector::Zero(2);
  CHECK_THROWS_AS(
      estimate_order(synthetic_iterates({0.5, 0.1}, x_ref), x_ref, 2),
      InsufficientDataError);
  // all errors above 1: no valid exponents anywhere
  CHECK_THROWS_AS(
      estimate_order(synthetic_iterates({9, 8, 7, 6, 5, 4}, x_ref), x_ref, 1),
      InsufficientDataError);
  CHECK_THROWS_AS(estimate_order(synthetic_iterates({0.5, 0.1, 0.01}, x_ref),
                                 x_ref, 0),
                  ConfigError);
}

TEST_CASE("order estimation is a pure function of its inputs") {
  const Vector x_ref = Vector::Zero(2);
  const auto iterates = synthetic_iterates(power_sequence(2.0, 0.3, 10), x_ref);
  const OrderEstimate a = estimate_order(iterates, x_ref, 2);
  const OrderEstimate b = estimate_order(iterates, x_ref, 2);
  CHECK(a.p_hat == b.p_hat);
  CHECK(a.cycle_product == b.cycle_product);
  CHECK(a.cycle_start == b.cycle_start);
}

TEST_CASE("descent audit flags fabricated increases and passes real runs") {
  SECTION("negative control") {
    std::vector<TraceRecord> trace(3);
    trace[0].t = 0, trace[0].F = 1.0, trace[0].alpha = 1.0,
    trace[0].lambda = -0.5, trace[0].norm_dx = 1.0;
    trace[1].t = 1, trace[1].F = 2.0, trace[1].alpha = 1.0,
    trace[1].lambda = -0.5, trace[1].norm_dx = 1.0;  // F went UP
    trace[2].t = 2, trace[2].F = 0.5;                // terminal
    const DescentAudit audit = audit_descent(trace);
    CHECK(audit.checked == 2);
    CHECK(audit.violations == 1);
    CHECK(audit.worst_margin > 0.0);
  }
  SECTION("real run with curvature samples") {
    auto problem = make_logistic_fixture({60, 8, 5.0, 4.0, 1e-2, 21});
    SolverConfig config;
    config.refresh = RefreshSchedule::every(2);
    config.subproblem.epsilon = 1e-11;
    config.record_wall_time = false;
    SolveResult result = solve_generic(problem, Vector::Constant(8, 2.0), config);
    REQUIRE(result.converged());

    std::vector<double> mhat;
    std::size_t model_idx = 0;
    for (const TraceRecord& row : result.trace) {
      if (row.alpha <= 0.0) break;
      while (model_idx + 1 < result.models.size() &&
             result.models[model_idx + 1]->refresh_iteration() <= row.t)
        ++model_idx;
      mhat.push_back(sampled_min_rayleigh(*result.models[model_idx]));
    }
    const DescentAudit audit = audit_descent(result.trace, mhat);
    CHECK(audit.checked > 0);
    CHECK(audit.violations == 0);
    CHECK(audit.sign_violations == 0);
    CHECK(audit.curvature_violations == 0);
  }
}

TEST_CASE("sandwich audit on a quadratic with l1") {
  Vector diag(20);
  for (int i = 0; i < 20; ++i)
    diag[i] = std::pow(10.0, 2.0 * i / 19.0);  // logspace 1 .. 100
  Matrix Q = Matrix(diag.asDiagonal());
  SplitMix64 rng(5);
  Vector b = 3.0 * rng.vector(20);
  auto problem = make_problem(quadratic_oracle(Q, b), Regularizer::l1(0.1),
                              diag.maxCoeff());

  SolverConfig config;
  config.subproblem.epsilon = 1e-13;
  config.tol_G = 1e-12;
  config.record_wall_time = false;
  const Vector x_ref = solve_generic(problem, Vector::Zero(20), config).x;

  std::vector<Vector> samples;
  samples.push_back(x_ref);  // both sides zero
  for (int k = 0; k < 100; ++k) {
    Vector dir = rng.vector(20);
    samples.push_back(x_ref + 0.1 * rng.next_double() * dir / dir.norm());
  }
  const SandwichAudit audit =
      audit_sandwich(problem, x_ref, samples, diag.maxCoeff(), diag.minCoeff());
  CHECK(audit.checked == 101);
  CHECK(audit.lower_violations == 0);
  CHECK(audit.upper_violations == 0);
}

TEST_CASE("forcing audit distinguishes schedules and outcomes") {
  std::vector<TraceRecord> trace(5);
  const double etas[] = {1e-1, 1e-3, 5e-4, 1e-4};
  for (int i = 0; i < 4; ++i) {
    trace[i].t = i;
    trace[i].alpha = 1.0;
    trace[i].eta = etas[i];
  }
  trace[4].t = 4;  // terminal row, excluded from the tail
  CHECK(audit_forcing_decay(trace, true, true).verdict ==
        ForcingAudit::Verdict::decayed);
  CHECK(audit_forcing_decay(trace, false, true).verdict ==
        ForcingAudit::Verdict::constant_schedule);
  CHECK(audit_forcing_decay(trace, true, false).verdict ==
        ForcingAudit::Verdict::indeterminate);
  CHECK(audit_forcing_decay(trace, true, true).final_eta ==
        Catch::Approx(1e-4));
  CHECK(audit_forcing_decay(trace, true, true).last3_max ==
        Catch::Approx(1e-3));

  trace[2].eta = 0.05;  // tail too large
  CHECK(audit_forcing_decay(trace, true, true).verdict ==
        ForcingAudit::Verdict::above_threshold);
}

TEST_CASE("hessian error probe across curvature modes") {
  SECTION("exact models carry no error at refresh points") {
    auto problem = make_logistic_fixture({50, 6, 4.0, 3.0, 1e-2, 31});
    SolverConfig config;
    config.refresh = RefreshSchedule::every(2);
    config.record_wall_time = false;
    SolveResult result = solve_generic(problem, Vector::Zero(6), config);
    REQUIRE(result.converged());
    for (double err :
         audit_hessian_error(problem, refresh_points(result), result.models))
      CHECK(err <= 1e-10);
  }
  SECTION("full-memory quasi-Newton error shrinks on a quadratic") {
    SplitMix64 rng(63);
    Matrix A(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) A(i, j) = rng.next_signed();
    Matrix Q = A * A.transpose() + 2.0 * Matrix::Identity(6, 6);
    auto problem =
        make_problem(quadratic_oracle(Q, Vector::Ones(6)), Regularizer::zero());
    SolverConfig config;
    config.curvature = SolverConfig::Curvature::lbfgs;
    config.lbfgs_memory = 12;
    config.refresh = RefreshSchedule::every(2);
    config.tol_G = 5e-8;  // descent certification saturates in floats below this
    config.max_iters = 200;
    config.record_wall_time = false;
    SolveResult result = solve_generic(problem, Vector::Constant(6, 3.0), config);
    REQUIRE(result.converged());
    const auto errors =
        audit_hessian_error(problem, refresh_points(result), result.models);
    REQUIRE(errors.size() >= 3);
    CHECK(errors.back() < errors.front());
  }
  SECTION("chord error approaches the curvature gap between endpoints") {
    auto problem = make_poisson_fixture({100, 8, 4.0, 1.2, 0.0, 77});
    SolverConfig config;
    config.refresh = RefreshSchedule::chord();
    config.tol_G = 1e-10;
    config.max_iters = 3000;
    config.record_wall_time = false;
    const Vector x0 = Vector::Constant(8, 0.7);
    SolveResult result = solve_generic(problem, x0, config);
    REQUIRE(result.converged());
    // single model, built at x0: its error at the solution is the gap
    const Matrix gap =
        problem.smooth->hessian(result.x) - problem.smooth->hessian(x0);
    const double expected = spectral_norm_estimate(
        [&gap](const Vector& v) -> Vector { return gap * v; }, 8);
    const auto errors = audit_hessian_error(problem, {result.x}, result.models);
    REQUIRE(errors.size() == 1);
    CHECK(errors[0] == Catch::Approx(expected).epsilon(0.10));
  }
}

TEST_CASE("hessian error probe rejects oversized problems") {
  auto big = std::make_shared<HessianModel>(HessianModel::lbfgs(501, 2));
  auto problem = make_problem(
      quadratic_oracle(Matrix::Identity(2, 2), Vector::Zero(2)),
      Regularizer::zero());
  CHECK_THROWS_AS(
      audit_hessian_error(problem, {Vector::Zero(501)},
                          {std::shared_ptr<const HessianModel>(big)}),
      ConfigError);
}
