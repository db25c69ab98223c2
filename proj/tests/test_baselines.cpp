#include "psm/solver.hpp"

#include "psm/fixtures.hpp"
#include "psm/losses.hpp"
#include "support/enumeration.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace psm;

TEST_CASE("proximal gradient contracts at the classical linear rate") {
  Vector diag(2);
  diag << 1.0, 4.0;
  Matrix Q = Matrix(diag.asDiagonal());
  Vector c = (Vector(2) << 2.0, -1.0).finished();
  auto problem = make_problem(quadratic_oracle(Q, Q * c), Regularizer::zero());

  SolverConfig config;
  config.tol_G = 1e-10;
  config.max_iters = 4000;
  config.record_wall_time = false;
  SolveResult result = solve_baseline(problem, Vector::Zero(2),
                                      BaselineVariant::ista, config);
  REQUIRE(result.converged());

  const double ell_hat = result.scale.ell;
  const double bound = 1.0 - diag.minCoeff() / ell_hat + 0.05;
  for (std::size_t t = 0; t + 1 < result.iterates.size(); ++t) {
    const double e0 = (result.iterates[t] - c).norm();
    const double e1 = (result.iterates[t + 1] - c).norm();
    if (e0 > 1e-11) CHECK(e1 / e0 <= bound);
  }

  // F is monotone for the backtracked proximal gradient
  for (std::size_t i = 0; i + 1 < result.trace.size(); ++i)
    CHECK(result.trace[i + 1].F <= result.trace[i].F + 1e-12);
}

TEST_CASE("baselines recover small lasso solutions") {
  for (std::uint64_t seed : {101, 202}) {
    const LassoInstance inst = make_random_lasso(6, seed);
    const Vector x_star = psm::testing::lasso_enumerate(inst.Q, inst.b, inst.mu);
    SolverConfig config;
    config.tol_G = 1e-8;
    config.max_iters = 20000;
    config.record_wall_time = false;
    for (BaselineVariant variant : {BaselineVariant::ista, BaselineVariant::fista}) {
      SolveResult result =
          solve_baseline(inst.problem, Vector::Zero(6), variant, config);
      REQUIRE(result.converged());
      CHECK((result.x - x_star).norm() <= 1e-6);
    }
  }
}

TEST_CASE("fista needs fewer iterations than ista on an ill-conditioned lasso") {
  const LassoInstance inst = make_random_lasso(8, 55);
  SolverConfig config;
  config.tol_G = 1e-7;
  config.max_iters = 50000;
  config.record_wall_time = false;
  const auto ista =
      solve_baseline(inst.problem, Vector::Zero(8), BaselineVariant::ista, config);
  const auto fista =
      solve_baseline(inst.problem, Vector::Zero(8), BaselineVariant::fista, config);
  REQUIRE(ista.converged());
  REQUIRE(fista.converged());
  CHECK(fista.iterations() <= ista.iterations());
}

TEST_CASE("baseline started at the optimum takes zero iterations") {
  const LassoInstance inst = make_random_lasso(5, 404);
  const Vector x_star = psm::testing::lasso_enumerate(inst.Q, inst.b, inst.mu);
  SolverConfig config;
  config.tol_G = 1e-8;
  config.record_wall_time = false;
  const auto result =
      solve_baseline(inst.problem, x_star, BaselineVariant::ista, config);
  CHECK(result.converged());
  CHECK(result.iterations() == 0);
  CHECK(result.trace.size() == 1);
}

TEST_CASE("box-constrained baseline matches active-set enumeration") {
  const BoxQpInstance inst = make_random_boxqp(5, 71);
  const Vector x_star =
      psm::testing::boxqp_enumerate(inst.Q, inst.b, inst.lo, inst.hi);
  SolverConfig config;
  config.tol_G = 1e-9;
  config.max_iters = 20000;
  config.record_wall_time = false;
  const auto result = solve_baseline(inst.problem, Vector::Zero(5),
                                     BaselineVariant::fista, config);
  REQUIRE(result.converged());
  CHECK((result.x - x_star).norm() <= 1e-7);
}
