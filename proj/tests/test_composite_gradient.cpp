#include "psm/composite_gradient.hpp"

#include "psm/fixtures.hpp"
#include "psm/losses.hpp"
#include "support/enumeration.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace psm;

namespace {

CompositeProblem one_d_shifted_lasso() {
  // f = 1/2 (x - 2)^2 expressed as Q = 1, b = 2; r = |x|
  return make_problem(
      quadratic_oracle(Matrix::Identity(1, 1), Vector::Constant(1, 2.0)),
      Regularizer::l1(1.0), 1.0);
}

}  // namespace

TEST_CASE("composite gradient reduces to the gradient without regularizer") {
  auto problem = make_problem(
      quadratic_oracle((Matrix(2, 2) << 2.0, 0.5, 0.5, 1.0).finished(),
                       (Vector(2) << 1.0, -2.0).finished()),
      Regularizer::zero(), 3.0);
  SplitMix64 rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const Vector x = 2.0 * rng.vector(2);
    const Vector g = composite_gradient(problem, x, make_scale(3.0));
    CHECK((g - problem.smooth->gradient(x)).norm() < 1e-13);
  }
}

TEST_CASE("one dimensional composite gradient example") {
  auto problem = one_d_shifted_lasso();
  const Vector g =
      composite_gradient(problem, Vector::Zero(1), make_scale(1.0));
  CHECK(g[0] == Catch::Approx(-1.0));
}

TEST_CASE("composite gradient vanishes at known optima") {
  SECTION("unconstrained quadratic") {
    Matrix Q = (Matrix(3, 3) << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2).finished();
    Vector b = (Vector(3) << 1, -1, 0.5).finished();
    auto problem = make_problem(quadratic_oracle(Q, b), Regularizer::zero(), 6.0);
    const Vector x_star = Q.ldlt().solve(b);
    CHECK(composite_gradient(problem, x_star, make_scale(6.0)).norm() <= 1e-8);
  }
  SECTION("lasso optimum from sign enumeration") {
    const LassoInstance inst = make_random_lasso(5, 31);
    const Vector x_star = psm::testing::lasso_enumerate(inst.Q, inst.b, inst.mu);
    CHECK(composite_gradient(inst.problem, x_star,
                             make_scale(1.1 * inst.Q.norm()))
              .norm() <= 1e-8);
  }
  SECTION("box QP optimum from active-set enumeration") {
    const BoxQpInstance inst = make_random_boxqp(4, 77);
    const Vector x_star =
        psm::testing::boxqp_enumerate(inst.Q, inst.b, inst.lo, inst.hi);
    CHECK(composite_gradient(inst.problem, x_star, make_scale(1.1 * inst.Q.norm()))
              .norm() <= 1e-8);
  }
}

TEST_CASE("gradient sandwich holds on strongly convex quadratics") {
  Vector diag(4);
  diag << 1.0, 2.5, 5.0, 9.0;
  Matrix Q = Matrix(diag.asDiagonal());
  Vector b = (Vector(4) << 1, 0, -2, 0.5).finished();
  const double ell = diag.maxCoeff();
  const double m = diag.minCoeff();

  SECTION("without regularizer") {
    auto problem = make_problem(quadratic_oracle(Q, b), Regularizer::zero(), ell);
    const Vector x_star = Q.ldlt().solve(b);
    SplitMix64 rng(9);
    for (int rep = 0; rep < 100; ++rep) {
      const Vector x = x_star + rng.vector(4);
      const double e = (x - x_star).norm();
      const double g = composite_gradient(problem, x, make_scale(ell)).norm();
      CHECK(0.5 * m * e <= g + 1e-12);
      CHECK(g <= 2.0 * ell * e + 1e-12);
    }
  }
  SECTION("with l1 regularizer") {
    const double mu = 0.1;
    auto problem = make_problem(quadratic_oracle(Q, b), Regularizer::l1(mu), ell);
    const Vector x_star = psm::testing::lasso_enumerate(Q, b, mu);
    SplitMix64 rng(10);
    for (int rep = 0; rep < 100; ++rep) {
      const Vector x = x_star + 0.5 * rng.vector(4);
      const double e = (x - x_star).norm();
      const double g = composite_gradient(problem, x, make_scale(ell)).norm();
      CHECK(0.5 * m * e <= g + 1e-12);
      CHECK(g <= 2.0 * ell * e + 1e-12);
    }
  }
}

TEST_CASE("subproblem residual at zero step equals the composite gradient") {
  SplitMix64 rng(14);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix A(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) A(i, j) = rng.next_signed();
    const Matrix H = A * A.transpose() + Matrix::Identity(3, 3);
    const HessianModel model = HessianModel::exact(H, 0);

    Matrix Q = (Matrix(3, 3) << 3, 0, 0, 0, 1, 0, 0, 0, 2).finished();
    auto problem =
        make_problem(quadratic_oracle(Q, Vector::Ones(3)), Regularizer::l1(0.3), 3.3);
    const Vector x = 2.0 * rng.vector(3);
    const Vector grad = problem.smooth->gradient(x);
    const auto scale = make_scale(3.3);
    const Vector ghat = subproblem_residual(x, x, grad, model, problem, scale);
    const Vector g = composite_gradient(problem, x, scale);
    CHECK((ghat - g).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("subproblem residual detects exact and inexact model solutions") {
  SECTION("without regularizer the residual is the model gradient") {
    Matrix H = (Matrix(2, 2) << 2, 0.3, 0.3, 1.5).finished();
    const HessianModel model = HessianModel::exact(H, 0);
    auto problem = make_problem(
        quadratic_oracle(Matrix::Identity(2, 2), Vector::Zero(2)),
        Regularizer::zero(), 1.0);
    SplitMix64 rng(8);
    const Vector x = rng.vector(2);
    const Vector x_next = rng.vector(2);
    const Vector grad = problem.smooth->gradient(x);
    const Vector ghat =
        subproblem_residual(x_next, x, grad, model, problem, make_scale(1.0));
    const Vector expected = grad + model.apply(x_next - x);
    CHECK((ghat - expected).norm() < 1e-12);
  }

  SECTION("exact subproblem minimizer gives a vanishing residual") {
    // model: grad g at anchor x with curvature H and l1 regularizer; its
    // minimizer comes from the sign-pattern oracle on Q = H, b = Hx - g
    SplitMix64 rng(4);
    Matrix A(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) A(i, j) = rng.next_signed();
    const Matrix H = A * A.transpose() + 2.0 * Matrix::Identity(4, 4);
    const HessianModel model = HessianModel::exact(H, 0);
    const Vector x = rng.vector(4);
    const Vector g = rng.vector(4);
    const double mu = 0.4;
    const Vector z_star = psm::testing::lasso_enumerate(H, H * x - g, mu);

    auto problem = make_problem(
        quadratic_oracle(Matrix::Identity(4, 4), Vector::Zero(4)),
        Regularizer::l1(mu), 2.0);
    const Vector ghat =
        subproblem_residual(z_star, x, g, model, problem, make_scale(2.0));
    CHECK(ghat.norm() <= 1e-10);
  }

  SECTION("one dimensional worked example") {
    auto problem = one_d_shifted_lasso();
    const HessianModel model = HessianModel::exact(Matrix::Identity(1, 1), 0);
    const Vector x = Vector::Zero(1);
    const Vector grad = problem.smooth->gradient(x);
    const Vector ghat =
        subproblem_residual(x, x, grad, model, problem, make_scale(1.0));
    CHECK(ghat[0] == Catch::Approx(-1.0));
  }
}
