#pragma once
// L2-regularized binary logistic regression and train-fold standardization.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

#include "polar/common.hpp"

namespace polar {

struct Standardizer {
  std::vector<double> mu;
  std::vector<double> sd;  // 0 marks a constant column, mapped to 0

  static Standardizer fit(const RowMatrix& X) {
    Standardizer s;
    const std::size_t F = X.cols();
    s.mu.assign(F, 0.0);
    s.sd.assign(F, 0.0);
    if (X.rows() == 0) return s;
    const double n = static_cast<double>(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i)
      for (std::size_t j = 0; j < F; ++j) s.mu[j] += X(i, j);
    for (double& m : s.mu) m /= n;
    for (std::size_t i = 0; i < X.rows(); ++i)
      for (std::size_t j = 0; j < F; ++j) s.sd[j] += (X(i, j) - s.mu[j]) * (X(i, j) - s.mu[j]);
    for (double& v : s.sd) v = std::sqrt(v / n);
    return s;
  }

  RowMatrix apply(const RowMatrix& X) const {
    RowMatrix out(X.rows(), X.cols());
    for (std::size_t i = 0; i < X.rows(); ++i)
      for (std::size_t j = 0; j < X.cols(); ++j)
        out(i, j) = sd[j] > 0.0 ? (X(i, j) - mu[j]) / sd[j] : 0.0;
    return out;
  }
};

struct LogisticModel {
  std::vector<double> w;
  double b = 0.0;
  std::size_t iterations = 0;
  double grad_norm = kNaN;

  double logit(std::span<const double> x) const { return b + dot(w, x); }
  double predict(std::span<const double> x) const { return 1.0 / (1.0 + std::exp(-logit(x))); }
};

inline constexpr double kLogisticGradTol = 1e-8;
inline constexpr std::size_t kLogisticMaxIter = 10000;

namespace detail {

// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

// Mean binary cross-entropy + lambda * ||w||^2 (intercept unpenalized).
inline double logistic_objective(const RowMatrix& X, std::span<const int> y, std::span<const double> w,
                                 double b, double lambda) {
  double loss = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double z = b + dot(w, X.row(i));
    loss += detail::softplus(z) - y[i] * z;
  }
  return loss / static_cast<double>(X.rows()) + lambda * dot(w, w);
}

// Gradient over (w..., b), length F + 1.
inline std::vector<double> logistic_gradient(const RowMatrix& X, std::span<const int> y,
                                             std::span<const double> w, double b, double lambda) {
  const std::size_t F = X.cols();
  std::vector<double> g(F + 1, 0.0);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double r = detail::sigmoid(b + dot(w, X.row(i))) - y[i];
    for (std::size_t j = 0; j < F; ++j) g[j] += r * X(i, j);
    g[F] += r;
  }
  const double n = static_cast<double>(X.rows());
  for (double& v : g) v /= n;
  for (std::size_t j = 0; j < F; ++j) g[j] += 2.0 * lambda * w[j];
  return g;
}

// Damped Newton iterations from zero with Armijo backtracking, stopping at
// gradient norm <= 1e-8 or 10^4 iterations.
inline LogisticModel fit_logistic(const RowMatrix& X, std::span<const int> y, double lambda) {
  if (X.rows() != y.size()) throw Error(ErrorKind::InvalidInput, "features and labels differ in length");
  if (X.rows() == 0) throw Error(ErrorKind::InvalidInput, "no training samples");
  if (lambda < 0.0) throw Error(ErrorKind::InvalidInput, "l2_lambda must be >= 0");
  for (double v : X.data())
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidInput, "non-finite feature value");
  for (int v : y)
    if (v != 0 && v != 1) throw Error(ErrorKind::InvalidInput, "labels must be 0 or 1");

  const std::size_t F = X.cols();
  const double n = static_cast<double>(X.rows());
  LogisticModel model;
  model.w.assign(F, 0.0);
  double f = logistic_objective(X, y, model.w, model.b, lambda);
  for (model.iterations = 0; model.iterations < kLogisticMaxIter; ++model.iterations) {
    const auto g = logistic_gradient(X, y, model.w, model.b, lambda);
    model.grad_norm = norm2(g);
    if (model.grad_norm <= kLogisticGradTol) break;

    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(F + 1), static_cast<Eigen::Index>(F + 1));
    Eigen::VectorXd xi(static_cast<Eigen::Index>(F + 1));
    for (std::size_t i = 0; i < X.rows(); ++i) {
      const double p = detail::sigmoid(model.logit(X.row(i)));
      for (std::size_t j = 0; j < F; ++j) xi(static_cast<Eigen::Index>(j)) = X(i, j);
      xi(static_cast<Eigen::Index>(F)) = 1.0;
      H.noalias() += (p * (1.0 - p) / n) * xi * xi.transpose();
    }
    for (std::size_t j = 0; j < F; ++j) H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) += 2.0 * lambda;
    // Tiny ridge keeps the intercept block solvable when all p saturate.
    H += 1e-12 * Eigen::MatrixXd::Identity(H.rows(), H.cols());
    Eigen::VectorXd gv = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
    Eigen::VectorXd step = H.ldlt().solve(gv);
    double slope = -gv.dot(step);
    if (!(slope < 0.0) || !step.allFinite()) {
      step = gv;  // fall back to steepest descent
      slope = -gv.squaredNorm();
    }

    double t = 1.0;
    std::vector<double> w_new(F);
    double b_new = model.b, f_new = f;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t j = 0; j < F; ++j) w_new[j] = model.w[j] - t * step(static_cast<Eigen::Index>(j));
      b_new = model.b - t * step(static_cast<Eigen::Index>(F));
      f_new = logistic_objective(X, y, w_new, b_new, lambda);
      if (f_new <= f + 1e-4 * t * slope) break;
      t *= 0.5;
    }
    if (!(f_new <= f)) break;  // no further progress possible in floating point
    model.w = w_new;
    model.b = b_new;
    f = f_new;
  }
  if (model.iterations == kLogisticMaxIter || std::isnan(model.grad_norm))
    model.grad_norm = norm2(logistic_gradient(X, y, model.w, model.b, lambda));
  return model;
}

}  // namespace polar
