#pragma once

#include "psm/types.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace psm {

/// Coordinatewise soft threshold. Ties (|v| == tau) map to zero.
inline double soft_threshold(double v, double tau) {
  if (v > tau) return v - tau;
  if (v < -tau) return v + tau;
  return 0.0;
}

enum class RegKind { zero, l1, box };

/// Closed convex regularizer with an exact proximal mapping.
/// Supported kinds: the zero function, mu*||x||_1, and the indicator of a box.
class Regularizer {
public:
  static Regularizer zero() { return Regularizer(RegKind::zero); }

  static Regularizer l1(double mu) {
    if (!(mu >= 0.0)) throw ConfigError("l1 weight must be nonnegative");
    Regularizer r(RegKind::l1);
    r.mu_ = mu;
    return r;
  }

  static Regularizer box(Vector lo, Vector hi) {
    if (lo.size() != hi.size())
      throw ConfigError("box bounds must have equal dimension");
    for (Eigen::Index i = 0; i < lo.size(); ++i)
      if (!(lo[i] <= hi[i]))
        throw ConfigError("box regularizer has empty feasible set: lo > hi at coordinate " +
                          std::to_string(i));
    Regularizer r(RegKind::box);
    r.lo_ = std::move(lo);
    r.hi_ = std::move(hi);
    return r;
  }

  static Regularizer box(double lo, double hi, int dim) {
    return box(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
  }

  RegKind kind() const { return kind_; }
  double mu() const { return mu_; }
  const Vector& lower() const { return lo_; }
  const Vector& upper() const { return hi_; }

  /// r(x); +infinity when x is infeasible for an indicator.
  double value(const Vector& x) const {
    switch (kind_) {
      case RegKind::zero:
        return 0.0;
      case RegKind::l1:
        return mu_ * x.lpNorm<1>();
      case RegKind::box:
        for (Eigen::Index i = 0; i < x.size(); ++i)
          if (x[i] < lo_[i] || x[i] > hi_[i]) return kInfinity;
        return 0.0;
    }
    return 0.0;
  }

  /// argmin_z r(z) + 1/(2 step) ||z - v||^2.
  Vector prox(const Vector& v, double step) const {
    switch (kind_) {
      case RegKind::zero:
        return v;
      case RegKind::l1: {
        const double tau = mu_ * step;
        Vector out(v.size());
        for (Eigen::Index i = 0; i < v.size(); ++i)
          out[i] = soft_threshold(v[i], tau);
        return out;
      }
      case RegKind::box: {
        Vector out(v.size());
        for (Eigen::Index i = 0; i < v.size(); ++i)
          out[i] = std::clamp(v[i], lo_[i], hi_[i]);
        return out;
      }
    }
    return v;
  }

  bool is_indicator() const { return kind_ == RegKind::box; }

private:
  explicit Regularizer(RegKind kind) : kind_(kind) {}

  RegKind kind_;
  double mu_ = 0.0;
  Vector lo_, hi_;
};

inline Vector prox_apply(const Regularizer& reg, const Vector& v, double step) {
  if (!(step > 0.0)) throw ConfigError("prox step must be positive");
  return reg.prox(v, step);
}

}  // namespace psm
