#pragma once
// Two-component PCA of the users x axes score table, for plotting only.

#include <Eigen/Dense>

#include <cmath>

#include "polar/common.hpp"

namespace polar {

struct Pca2d {
  RowMatrix coords;      // N x 2
  RowMatrix components;  // 2 x F, unit rows
  double variance[2] = {0.0, 0.0};
  std::vector<double> mean;
};

// Mean-centers columns and projects onto the top two principal directions.
// Each direction's largest-magnitude loading is made positive.
inline Pca2d pca_2d(const RowMatrix& X) {
  const auto N = static_cast<Eigen::Index>(X.rows());
  const auto F = static_cast<Eigen::Index>(X.cols());
  if (N == 0 || F == 0) throw Error(ErrorKind::InvalidInput, "pca_2d on empty table");
  Eigen::MatrixXd M(N, F);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < F; ++j) M(i, j) = X(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  const Eigen::RowVectorXd mu = M.colwise().mean();
  M.rowwise() -= mu;
  const Eigen::MatrixXd cov = (M.transpose() * M) / static_cast<double>(N);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error(ErrorKind::Internal, "eigendecomposition failed");

  Pca2d out;
  out.mean.assign(mu.data(), mu.data() + F);
  out.coords = RowMatrix(X.rows(), 2);
  out.components = RowMatrix(2, X.cols());
  for (int c = 0; c < 2; ++c) {
    if (c >= F) break;  // single-column input: second component stays zero
    const Eigen::Index col = F - 1 - c;  // eigenvalues ascend
    Eigen::VectorXd v = eig.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.variance[c] = std::max(0.0, eig.eigenvalues()(col));
    for (Eigen::Index j = 0; j < F; ++j) out.components(static_cast<std::size_t>(c), static_cast<std::size_t>(j)) = v(j);
    const Eigen::VectorXd proj = M * v;
    for (Eigen::Index i = 0; i < N; ++i) out.coords(static_cast<std::size_t>(i), static_cast<std::size_t>(c)) = proj(i);
  }
  return out;
}

}  // namespace polar
