#pragma once

#include "psm/oracle.hpp"
#include "psm/types.hpp"

#include <deque>
#include <memory>
#include <utility>
#include <vector>

namespace psm {

/// How often the curvature model is rebuilt. period == 0 means "chord":
/// the model built at t = 0 is reused forever.
struct RefreshSchedule {
  int period = 1;

  static RefreshSchedule every(int n) {
    if (n < 1) throw ConfigError("refresh period must be >= 1");
    return RefreshSchedule{n};
  }
  static RefreshSchedule chord() { return RefreshSchedule{0}; }

  bool is_chord() const { return period == 0; }

  /// True exactly when t mod n == 0 (t = 0 always fires; chord fires only there).
  bool fires_at(int t) const {
    if (t == 0) return true;
    if (is_chord()) return false;
    return t % period == 0;
  }
};

inline bool needs_refresh(int t, const RefreshSchedule& schedule) {
  if (t < 0) throw ConfigError("iteration index must be nonnegative");
  return schedule.fires_at(t);
}

struct FactorizeResult {
  Matrix factor;       // lower triangular R with R Rᵀ = H + damping I
  double damping = 0.0;
};

/// Damped Cholesky. Tries lambda = 0 first; on failure starts at
/// max(1e-10, 1e-10 trace/d) and doubles until the factorization succeeds
/// or lambda exceeds 1e6 (1 + max|H|), which signals unusable input.
inline FactorizeResult factorize(const Matrix& H) {
  const Eigen::Index d = H.rows();
  if (H.cols() != d) throw CurvatureError("factorize: matrix must be square");
  const double h_max = H.cwiseAbs().maxCoeff();
  const double recon_tol = 1e-10 * (1.0 + h_max);

  auto attempt = [&](double lambda, FactorizeResult& out) -> bool {
    Matrix damped = H;
    damped.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(damped);
    if (llt.info() != Eigen::Success) return false;
    Matrix R = llt.matrixL();
    if (((R * R.transpose()) - damped).cwiseAbs().maxCoeff() > recon_tol)
      return false;
    out.factor = std::move(R);
    out.damping = lambda;
    return true;
  };

  FactorizeResult result;
  if (attempt(0.0, result)) return result;

  double lambda = std::max(1e-10, 1e-10 * H.trace() / static_cast<double>(d));
  const double lambda_cap = 1e6 * (1.0 + h_max);
  while (lambda <= lambda_cap) {
    if (attempt(lambda, result)) return result;
    lambda *= 2.0;
  }
  throw CurvatureError("factorize: damping cap exceeded; input is badly scaled or not symmetric");
}

/// Positive-definite curvature model H_t. Either an exact Hessian held in
/// damped-Cholesky factored form, or a limited-memory direct BFGS matrix
/// with initial scaling tau I. Immutable once built: updates return a new state.
class HessianModel {
public:
  enum class Mode { exact_factored, lbfgs };

  static HessianModel exact(const Matrix& H, int refresh_iteration) {
    HessianModel m(Mode::exact_factored, static_cast<int>(H.rows()));
    if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + H.cwiseAbs().maxCoeff()))
      throw CurvatureError("exact curvature model requires a symmetric matrix");
    FactorizeResult fac = factorize(H);
    m.matrix_ = H;
    m.factor_ = std::move(fac.factor);
    m.damping_ = fac.damping;
    m.refresh_iteration_ = refresh_iteration;
    return m;
  }

  static HessianModel lbfgs(int dim, int memory, double initial_scaling = 1.0,
                            int refresh_iteration = 0) {
    if (memory < 1) throw ConfigError("lbfgs memory must be >= 1");
    if (!(initial_scaling > 0.0)) throw ConfigError("lbfgs scaling must be positive");
    HessianModel m(Mode::lbfgs, dim);
    m.memory_ = memory;
    m.tau_ = initial_scaling;
    m.refresh_iteration_ = refresh_iteration;
    return m;
  }

  Mode mode() const { return mode_; }
  int dimension() const { return dim_; }
  int refresh_iteration() const { return refresh_iteration_; }

  // exact mode accessors
  const Matrix& matrix() const { return matrix_; }
  const Matrix& factor() const { return factor_; }
  double damping() const { return damping_; }

  // lbfgs mode accessors
  double scaling() const { return tau_; }
  int pair_count() const { return static_cast<int>(pairs_s_.size()); }
  int skipped_updates() const { return skipped_; }

  /// H v. Exact mode applies the factored form R(Rᵀv) so the operator is
  /// exactly the positive-definite matrix the solver reasons about.
  Vector apply(const Vector& v) const {
    if (mode_ == Mode::exact_factored)
      return factor_ * (factor_.transpose() * v);
    Vector out = tau_ * v;
    for (std::size_t j = 0; j < pairs_s_.size(); ++j) {
      out += (ys_[j].dot(v) / sy_[j]) * ys_[j];
      out -= (bs_[j].dot(v) / sbs_[j]) * bs_[j];
    }
    return out;
  }

  /// Cautious limited-memory update: the pair (s, y) is stored only when
  /// sᵀy > 1e-8 ||s||^2, which keeps the model positive definite. The initial
  /// scaling becomes tau = yᵀs / yᵀy of the newest stored pair.
  HessianModel updated(const Vector& s, const Vector& y) const {
    if (mode_ != Mode::lbfgs)
      throw CurvatureError("updated(s, y) applies to lbfgs models only");
    HessianModel next = *this;
    const double sy = s.dot(y);
    if (!(sy > kCurvatureEps * s.squaredNorm())) {
      ++next.skipped_;
      return next;
    }
    next.pairs_s_.push_back(s);
    next.pairs_y_.push_back(y);
    while (static_cast<int>(next.pairs_s_.size()) > next.memory_) {
      next.pairs_s_.pop_front();
      next.pairs_y_.pop_front();
    }
    next.tau_ = sy / y.squaredNorm();
    next.rebuild();
    return next;
  }

  HessianModel with_refresh_iteration(int t) const {
    HessianModel copy = *this;
    copy.refresh_iteration_ = t;
    return copy;
  }

  /// Densify (diagnostics; small d only).
  Matrix dense() const {
    Matrix out(dim_, dim_);
    Vector e = Vector::Zero(dim_);
    for (int i = 0; i < dim_; ++i) {
      e[i] = 1.0;
      out.col(i) = apply(e);
      e[i] = 0.0;
    }
    return out;
  }

private:
  static constexpr double kCurvatureEps = 1e-8;

  HessianModel(Mode mode, int dim) : mode_(mode), dim_(dim) {}

  /// Recompute the cached update vectors b_j = B_j s_j (B_j = model built
  /// from pairs 0..j-1) so apply() is a flat sum over stored pairs.
  void rebuild() {
    const std::size_t k = pairs_s_.size();
    ys_.assign(pairs_y_.begin(), pairs_y_.end());
    sy_.resize(k);
    bs_.resize(k);
    sbs_.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
      const Vector& s = pairs_s_[j];
      sy_[j] = pairs_s_[j].dot(pairs_y_[j]);
      Vector b = tau_ * s;
      for (std::size_t i = 0; i < j; ++i) {
        b += (ys_[i].dot(s) / sy_[i]) * ys_[i];
        b -= (bs_[i].dot(s) / sbs_[i]) * bs_[i];
      }
      bs_[j] = std::move(b);
      sbs_[j] = pairs_s_[j].dot(bs_[j]);
      if (!(sbs_[j] > 0.0))
        throw CurvatureError("lbfgs model lost positive definiteness");
    }
  }

  Mode mode_;
  int dim_;
  int refresh_iteration_ = 0;

  // exact
  Matrix matrix_;
  Matrix factor_;
  double damping_ = 0.0;

  // lbfgs
  int memory_ = 0;
  double tau_ = 1.0;
  int skipped_ = 0;
  std::deque<Vector> pairs_s_, pairs_y_;
  std::vector<Vector> ys_, bs_;   // cached y_j and B_j s_j
  std::vector<double> sy_, sbs_;  // cached s_jᵀy_j and s_jᵀB_j s_j
};

/// Evaluate the Hessian at x_t and factorize it; records the refresh iteration.
inline HessianModel refresh_exact(const CompositeProblem& problem,
                                  const Vector& x_t, int t) {
  return HessianModel::exact(problem.smooth->hessian(x_t), t);
}

inline HessianModel lbfgs_update(const HessianModel& state, const Vector& s,
                                 const Vector& y) {
  return state.updated(s, y);
}

inline Vector lbfgs_matvec(const HessianModel& state, const Vector& v) {
  if (state.mode() != HessianModel::Mode::lbfgs)
    throw CurvatureError("lbfgs_matvec requires an lbfgs model");
  return state.apply(v);
}

}  // namespace psm
