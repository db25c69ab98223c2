#pragma once

#include "psm/losses.hpp"
#include "psm/oracle.hpp"
#include "psm/regularizer.hpp"
#include "psm/types.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

namespace psm {

/// Dense design with a prescribed singular spectrum: W = U diag(s) Vᵀ where
/// the singular values run log-uniformly from sigma_max down to
/// sigma_max/cond. Deterministic for a fixed engine state.
inline Matrix make_conditioned_design(int n, int d, double cond, double sigma_max,
                                      std::mt19937_64& rng) {
  if (n < d) throw ConfigError("conditioned design needs n >= d");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix G1(n, d), G2(d, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) G1(i, j) = gauss(rng);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) G2(i, j) = gauss(rng);

  Eigen::HouseholderQR<Matrix> qr1(G1);
  Matrix U = Matrix(qr1.householderQ()).leftCols(d);
  Eigen::HouseholderQR<Matrix> qr2(G2);
  Matrix V = Matrix(qr2.householderQ());

  Vector sigma(d);
  for (int j = 0; j < d; ++j) {
    const double frac = d == 1 ? 0.0 : static_cast<double>(j) / (d - 1);
    sigma[j] = sigma_max * std::pow(cond, -frac);
  }
  return U * sigma.asDiagonal() * V.transpose();
}

inline SparseRowMatrix to_sparse(const Matrix& dense) {
  SparseRowMatrix sparse(dense.rows(), dense.cols());
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(dense.size()));
  for (int i = 0; i < dense.rows(); ++i)
    for (int j = 0; j < dense.cols(); ++j)
      if (dense(i, j) != 0.0) entries.emplace_back(i, j, dense(i, j));
  sparse.setFromTriplets(entries.begin(), entries.end());
  sparse.makeCompressed();
  return sparse;
}

struct LogisticFixtureSpec {
  int samples = 200;
  int features = 50;
  double cond = 10.0;      // condition number of the design matrix
  double sigma_max = 3.0;  // largest singular value
  double mu = 1e-3;        // l1 weight; 0 gives the unregularized problem
  std::uint64_t seed = 1;
};

/// l1-regularized logistic regression on a synthetic design with a planted
/// sparse signal. Full column rank keeps the Hessian positive definite.
inline CompositeProblem make_logistic_fixture(const LogisticFixtureSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  Matrix W = make_conditioned_design(spec.samples, spec.features, spec.cond,
                                     spec.sigma_max, rng);

  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector planted = Vector::Zero(spec.features);
  const int active = std::max(1, spec.features / 4);
  for (int j = 0; j < active; ++j) planted[j] = (j % 2 == 0 ? 1.0 : -1.0) * 2.0;

  Dataset data;
  data.features = to_sparse(W);
  data.labels.resize(spec.samples);
  for (int i = 0; i < spec.samples; ++i) {
    const double score = W.row(i).dot(planted) + 0.1 * gauss(rng);
    data.labels[i] = score >= 0.0 ? 1.0 : -1.0;
  }

  Regularizer reg =
      spec.mu > 0.0 ? Regularizer::l1(spec.mu) : Regularizer::zero();
  return make_problem(logistic_oracle(std::move(data)), std::move(reg));
}

struct PoissonFixtureSpec {
  int samples = 120;
  int features = 12;
  double cond = 5.0;
  double sigma_max = 1.0;
  double mu = 0.0;
  std::uint64_t seed = 7;
};

/// Poisson regression fixture with margins kept small so the exponentials
/// stay tame. Non-quadratic and strictly convex for a full-rank design.
inline CompositeProblem make_poisson_fixture(const PoissonFixtureSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  Matrix W = make_conditioned_design(spec.samples, spec.features, spec.cond,
                                     spec.sigma_max, rng);

  Vector planted(spec.features);
  std::uniform_real_distribution<double> unif(-0.6, 0.6);
  for (int j = 0; j < spec.features; ++j) planted[j] = unif(rng);

  Dataset data;
  data.features = to_sparse(W);
  data.labels.resize(spec.samples);
  for (int i = 0; i < spec.samples; ++i) {
    const double rate = std::exp(std::clamp(W.row(i).dot(planted), -2.5, 2.5));
    std::poisson_distribution<int> pois(rate);
    data.labels[i] = static_cast<double>(pois(rng));
  }

  Regularizer reg =
      spec.mu > 0.0 ? Regularizer::l1(spec.mu) : Regularizer::zero();
  return make_problem(poisson_oracle(std::move(data)), std::move(reg));
}

struct LassoInstance {
  Matrix Q;   // AᵀA of the underlying least-squares design
  Vector b;   // Aᵀ targets
  double mu = 0.0;
  CompositeProblem problem;
};

/// Random well-conditioned lasso instance: f(x) = 1/2 xᵀQx - bᵀx, r = mu|x|_1,
/// with lambda_min(Q) >= 1 so solutions are stably recoverable.
inline LassoInstance make_random_lasso(int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = 3 * d + 4;
  Matrix A = make_conditioned_design(n, d, 3.0, 3.0, rng);

  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector target(n);
  Vector planted = Vector::Zero(d);
  for (int j = 0; j < d; j += 2) planted[j] = (j % 4 == 0 ? 1.0 : -1.0);
  for (int i = 0; i < n; ++i) target[i] = A.row(i).dot(planted) + 0.2 * gauss(rng);

  LassoInstance inst;
  inst.Q = A.transpose() * A;
  inst.b = A.transpose() * target;
  std::uniform_real_distribution<double> unif(0.05, 0.35);
  inst.mu = unif(rng) * inst.b.cwiseAbs().maxCoeff();
  inst.problem = make_problem(quadratic_oracle(inst.Q, inst.b),
                              Regularizer::l1(inst.mu));
  return inst;
}

struct BoxQpInstance {
  Matrix Q;
  Vector b;
  Vector lo, hi;
  CompositeProblem problem;
};

/// Random strongly convex box-constrained QP with a mix of interior and
/// active coordinates at the solution.
inline BoxQpInstance make_random_boxqp(int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) G(i, j) = gauss(rng);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix V = Matrix(qr.householderQ());

  std::uniform_real_distribution<double> eig(0.5, 4.0);
  Vector sigma(d);
  for (int j = 0; j < d; ++j) sigma[j] = eig(rng);

  BoxQpInstance inst;
  inst.Q = V * sigma.asDiagonal() * V.transpose();
  inst.Q = 0.5 * (inst.Q + inst.Q.transpose());  // exact symmetry
  inst.b.resize(d);
  for (int j = 0; j < d; ++j) inst.b[j] = 1.5 * gauss(rng);

  std::uniform_real_distribution<double> width(0.1, 0.8);
  inst.lo.resize(d);
  inst.hi.resize(d);
  for (int j = 0; j < d; ++j) {
    inst.lo[j] = -width(rng);
    inst.hi[j] = width(rng);
  }
  inst.problem = make_problem(quadratic_oracle(inst.Q, inst.b),
                              Regularizer::box(inst.lo, inst.hi));
  return inst;
}

}  // namespace psm
