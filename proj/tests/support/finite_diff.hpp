#pragma once

// Finite-difference oracles for validating analytic gradients and
// Hessian-vector products. Test-only; independent of the library's
// differentiation paths.

#include "psm/oracle.hpp"
#include "psm/types.hpp"

#include <cmath>

namespace psm::testing {

inline Vector fd_gradient(const SmoothOracle& f, const Vector& x) {
  const double h = 1e-6 * (1.0 + x.norm());
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f.value(probe);
    probe[i] = x[i] - h;
    const double down = f.value(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline Vector fd_hessian_vec(const SmoothOracle& f, const Vector& x,
                             const Vector& v) {
  const double vnorm = v.norm();
  if (vnorm == 0.0) return Vector::Zero(x.size());
  const Vector dir = v / vnorm;
  const double h = 1e-6 * (1.0 + x.norm());
  const Vector up = f.gradient(x + h * dir);
  const Vector down = f.gradient(x - h * dir);
  return (up - down) * (vnorm / (2.0 * h));
}

inline double rel_err(const Vector& got, const Vector& want) {
  const double scale = std::max(1.0, want.norm());
  return (got - want).norm() / scale;
}

}  // namespace psm::testing
