#pragma once

#include "psm/dataset.hpp"
#include "psm/oracle.hpp"
#include "psm/types.hpp"

#include <atomic>
#include <cmath>
#include <memory>
#include <utility>

namespace psm {

/// f(x) = 1/2 xᵀQx - bᵀx with Q symmetric positive semidefinite.
class QuadraticOracle final : public SmoothOracle {
public:
  QuadraticOracle(Matrix Q, Vector b) : Q_(std::move(Q)), b_(std::move(b)) {
    if (Q_.rows() != Q_.cols() || Q_.rows() != b_.size())
      throw ConfigError("quadratic oracle: dimension mismatch");
    if ((Q_ - Q_.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * (1.0 + Q_.cwiseAbs().maxCoeff()))
      throw ConfigError("quadratic oracle requires a symmetric matrix");
  }

  int dimension() const override { return static_cast<int>(b_.size()); }
  double value(const Vector& x) const override {
    return 0.5 * x.dot(Q_ * x) - b_.dot(x);
  }
  Vector gradient(const Vector& x) const override { return Q_ * x - b_; }
  Matrix hessian(const Vector&) const override { return Q_; }
  Vector hessian_vec(const Vector&, const Vector& v) const override {
    return Q_ * v;
  }

  const Matrix& Q() const { return Q_; }
  const Vector& b() const { return b_; }

private:
  Matrix Q_;
  Vector b_;
};

/// Averaged logistic loss f(x) = 1/n sum log(1 + exp(-y_i w_iᵀ x)) with
/// labels in {-1, +1}. Uses log1p/exp splitting so large margins stay exact.
class LogisticLoss final : public SmoothOracle {
public:
  explicit LogisticLoss(Dataset data) : data_(std::move(data)) {
    for (Eigen::Index i = 0; i < data_.labels.size(); ++i)
      if (data_.labels[i] != 1.0 && data_.labels[i] != -1.0)
        throw ConfigError("logistic loss requires labels in {-1, +1}; sample " +
                          std::to_string(i) + " has label " +
                          std::to_string(data_.labels[i]));
  }

  int dimension() const override { return data_.dimension(); }

  double value(const Vector& x) const override {
    const Vector margins = data_.labels.cwiseProduct(data_.features * x);
    double total = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) {
      const double m = margins[i];
      // log(1 + e^{-m}) = max(0, -m) + log1p(e^{-|m|})
      total += std::max(0.0, -m) + std::log1p(std::exp(-std::abs(m)));
    }
    return total / static_cast<double>(data_.samples());
  }

  Vector gradient(const Vector& x) const override {
    const Vector margins = data_.labels.cwiseProduct(data_.features * x);
    Vector coeff(margins.size());
    for (Eigen::Index i = 0; i < margins.size(); ++i)
      coeff[i] = -data_.labels[i] * sigmoid(-margins[i]);
    return (data_.features.transpose() * coeff) /
           static_cast<double>(data_.samples());
  }

  Matrix hessian(const Vector& x) const override {
    const Vector margins = data_.labels.cwiseProduct(data_.features * x);
    Vector weights(margins.size());
    for (Eigen::Index i = 0; i < margins.size(); ++i) {
      const double s = sigmoid(margins[i]);
      weights[i] = s * (1.0 - s);
    }
    const SparseRowMatrix& W = data_.features;
    return Matrix((W.transpose() * weights.asDiagonal() * W)) /
           static_cast<double>(data_.samples());
  }

  const Dataset& data() const { return data_; }

private:
  static double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }

  Dataset data_;
};

/// Averaged Poisson regression loss f(x) = 1/n sum (exp(w_iᵀx) - y_i w_iᵀx)
/// with nonnegative labels. Margins clamp at 700 before exponentiation to stay
/// finite; clamps are counted so diagnostics can flag saturated evaluations.
class PoissonLoss final : public SmoothOracle {
public:
  explicit PoissonLoss(Dataset data) : data_(std::move(data)) {
    for (Eigen::Index i = 0; i < data_.labels.size(); ++i)
      if (data_.labels[i] < 0.0)
        throw ConfigError("poisson loss requires nonnegative labels; sample " +
                          std::to_string(i) + " has label " +
                          std::to_string(data_.labels[i]));
  }

  int dimension() const override { return data_.dimension(); }

  double value(const Vector& x) const override {
    const Vector margins = data_.features * x;
    double total = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i)
      total += std::exp(clamp_margin(margins[i])) - data_.labels[i] * margins[i];
    return total / static_cast<double>(data_.samples());
  }

  Vector gradient(const Vector& x) const override {
    const Vector margins = data_.features * x;
    Vector coeff(margins.size());
    for (Eigen::Index i = 0; i < margins.size(); ++i)
      coeff[i] = std::exp(clamp_margin(margins[i])) - data_.labels[i];
    return (data_.features.transpose() * coeff) /
           static_cast<double>(data_.samples());
  }

  Matrix hessian(const Vector& x) const override {
    const Vector margins = data_.features * x;
    Vector weights(margins.size());
    for (Eigen::Index i = 0; i < margins.size(); ++i)
      weights[i] = std::exp(clamp_margin(margins[i]));
    const SparseRowMatrix& W = data_.features;
    return Matrix((W.transpose() * weights.asDiagonal() * W)) /
           static_cast<double>(data_.samples());
  }

  std::uint64_t saturation_count() const { return saturations_.load(); }
  const Dataset& data() const { return data_; }

private:
  double clamp_margin(double m) const {
    if (m > kMarginCap) {
      saturations_.fetch_add(1, std::memory_order_relaxed);
      return kMarginCap;
    }
    return m;
  }

  static constexpr double kMarginCap = 700.0;  // exp overflow boundary

  Dataset data_;
  mutable std::atomic<std::uint64_t> saturations_{0};
};

inline std::shared_ptr<const SmoothOracle> logistic_oracle(Dataset data) {
  return std::make_shared<LogisticLoss>(std::move(data));
}

inline std::shared_ptr<const SmoothOracle> poisson_oracle(Dataset data) {
  return std::make_shared<PoissonLoss>(std::move(data));
}

inline std::shared_ptr<const SmoothOracle> quadratic_oracle(Matrix Q, Vector b) {
  return std::make_shared<QuadraticOracle>(std::move(Q), std::move(b));
}

}  // namespace psm
