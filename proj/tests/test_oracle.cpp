#include "psm/oracle.hpp"

#include "psm/fixtures.hpp"
#include "psm/losses.hpp"
#include "support/finite_diff.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>

using namespace psm;

namespace {

class DiagonalQuadratic final : public SmoothOracle {
public:
  explicit DiagonalQuadratic(Vector diag) : diag_(std::move(diag)) {}
  int dimension() const override { return static_cast<int>(diag_.size()); }
  double value(const Vector& x) const override {
    return 0.5 * x.dot(diag_.cwiseProduct(x));
  }
  Vector gradient(const Vector& x) const override { return diag_.cwiseProduct(x); }
  Matrix hessian(const Vector&) const override {
    return Matrix(diag_.asDiagonal());
  }

private:
  Vector diag_;
};

class BrokenOracle final : public SmoothOracle {
public:
  int dimension() const override { return 2; }
  double value(const Vector& x) const override {
    return x[0] + x[1];  // NaN propagates from x
  }
  Vector gradient(const Vector&) const override { return Vector::Ones(2); }
  Matrix hessian(const Vector&) const override { return Matrix::Zero(2, 2); }
};

}  // namespace

TEST_CASE("eval_F on simple composites") {
  Vector x(2);
  x << 3.0, 4.0;
  auto half_sq = make_problem(
      quadratic_oracle(Matrix::Identity(2, 2), Vector::Zero(2)),
      Regularizer::zero());
  CHECK(eval_F(half_sq, x) == Catch::Approx(12.5));

  // f = 1/2 (x - 2)^2 as a 1-D quadratic: Q = 1, b = 2 (constant offset shifts F)
  auto shifted = make_problem(
      quadratic_oracle(Matrix::Identity(1, 1), Vector::Constant(1, 2.0)),
      Regularizer::l1(1.0));
  Vector one(1);
  one << 1.0;
  // value relative to the pure quadratic form: 1/2 - 2 + |1| ; add back the
  // constant 2 to compare against 1/2 (1-2)^2 + 1 = 1.5
  CHECK(eval_F(shifted, one) + 2.0 == Catch::Approx(1.5));

  Vector infeasible(2);
  infeasible << 2.0, 0.0;
  auto boxed = make_problem(
      quadratic_oracle(Matrix::Identity(2, 2), Vector::Zero(2)),
      Regularizer::box(0.0, 1.0, 2));
  CHECK(eval_F(boxed, infeasible) == kInfinity);
}

TEST_CASE("eval_F reports the offending coordinate for non-finite input") {
  auto problem = make_problem(std::make_shared<BrokenOracle>(), Regularizer::zero());
  Vector bad(2);
  bad << 1.0, std::numeric_limits<double>::quiet_NaN();
  try {
    eval_F(problem, bad);
    FAIL("expected EvaluationError");
  } catch (const EvaluationError& e) {
    CHECK(std::string(e.what()).find("x[1]") != std::string::npos);
  }
}

TEST_CASE("eval_F is deterministic within a process") {
  auto problem = make_logistic_fixture({40, 6, 5.0, 2.0, 1e-2, 99});
  SplitMix64 rng(5);
  const Vector x = rng.vector(6);
  const double a = eval_F(problem, x);
  const double b = eval_F(problem, x);
  CHECK(std::memcmp(&a, &b, sizeof a) == 0);
}

TEST_CASE("gradient Lipschitz estimate tracks the top Hessian eigenvalue") {
  Vector diag2(2);
  diag2 << 1.0, 4.0;
  auto p2 = make_problem(std::make_shared<DiagonalQuadratic>(diag2),
                         Regularizer::zero());
  const auto est2 = estimate_grad_lipschitz(p2, Vector::Zero(2));
  CHECK(est2.value == Catch::Approx(4.4).epsilon(0.005));
  CHECK_FALSE(est2.floored);

  auto p3 = make_problem(
      std::make_shared<DiagonalQuadratic>(Vector::Ones(3)), Regularizer::zero());
  CHECK(estimate_grad_lipschitz(p3, Vector::Zero(3)).value ==
        Catch::Approx(1.1).epsilon(0.005));
}

TEST_CASE("zero Hessian floors the Lipschitz estimate with a warning flag") {
  auto flat = make_problem(
      std::make_shared<DiagonalQuadratic>(Vector::Zero(3)), Regularizer::zero());
  const auto est = estimate_grad_lipschitz(flat, Vector::Zero(3));
  CHECK(est.value == 1e-12);
  CHECK(est.floored);
}

TEST_CASE("logistic Lipschitz estimate respects the spectral bound") {
  auto problem = make_logistic_fixture({30, 8, 4.0, 2.0, 0.0, 123});
  const auto est = estimate_grad_lipschitz(problem, Vector::Zero(8));

  const auto& loss = dynamic_cast<const LogisticLoss&>(*problem.smooth);
  const Matrix W = Matrix(loss.data().features);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(W.transpose() * W);
  const double bound =
      1.1 * eig.eigenvalues().maxCoeff() / (4.0 * loss.data().samples());
  CHECK(est.value <= bound * (1.0 + 1e-9));
}

TEST_CASE("fixture oracles pass convexity and derivative checks") {
  auto problem = make_logistic_fixture({50, 7, 6.0, 2.0, 0.0, 17});
  const SmoothOracle& f = *problem.smooth;
  SplitMix64 rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    const Vector x = 2.0 * rng.vector(7);
    const Vector y = 2.0 * rng.vector(7);
    // convexity along sampled pairs
    CHECK(f.value(y) - f.value(x) - (y - x).dot(f.gradient(x)) >= -1e-10);
    // gradient against central differences
    CHECK(psm::testing::rel_err(f.gradient(x), psm::testing::fd_gradient(f, x)) <
          1e-5);
    // Hessian-vector product against gradient differences
    const Vector v = rng.vector(7);
    CHECK(psm::testing::rel_err(f.hessian_vec(x, v),
                                psm::testing::fd_hessian_vec(f, x, v)) < 1e-4);
    // Hessian symmetry
    const Matrix H = f.hessian(x);
    CHECK((H - H.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("smoothness constants validate their ordering") {
  SmoothnessConstants good{2.0, std::nullopt, 0.5};
  CHECK_NOTHROW(good.validate());
  SmoothnessConstants bad{1.0, std::nullopt, 2.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
