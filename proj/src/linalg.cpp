#include "taskcomm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace taskcomm {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void fix_column_signs(Matrix& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    Eigen::Index at = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double a = std::abs(m(r, c));
      if (a > best) {
        best = a;
        at = r;
      }
    }
    if (m(at, c) < 0.0) m.col(c) = -m.col(c);
  }
}

SymmetricEigen symmetric_eigen(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("symmetric_eigen: matrix must be square");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(m));
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("symmetric_eigen: eigendecomposition failed");
  }
  const Eigen::Index n = m.rows();
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  // SelfAdjointEigenSolver returns ascending order; reverse it.
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = solver.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  fix_column_signs(out.vectors);
  return out;
}

SingularBasis right_singular_basis(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  SingularBasis out;
  out.basis = svd.matrixV();
  out.singular_values = Vector::Zero(a.cols());
  const Eigen::Index k = svd.singularValues().size();
  out.singular_values.head(k) = svd.singularValues();
  fix_column_signs(out.basis);
  return out;
}

namespace {

Matrix rebuild_with(const Matrix& m, double (*f)(double, double),
                    double eigen_floor) {
  const SymmetricEigen eig = symmetric_eigen(m);
  Vector d(eig.values.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    d(i) = f(eig.values(i), eigen_floor);
  }
  return symmetrize(eig.vectors * d.asDiagonal() * eig.vectors.transpose());
}

}  // namespace

Matrix symmetric_sqrt(const Matrix& m, double eigen_floor) {
  return rebuild_with(
      m, [](double v, double fl) { return std::sqrt(std::max(v, fl)); },
      eigen_floor);
}

Matrix symmetric_inv_sqrt(const Matrix& m, double eigen_floor) {
  return rebuild_with(
      m,
      [](double v, double fl) { return 1.0 / std::sqrt(std::max(v, fl)); },
      eigen_floor);
}

}  // namespace taskcomm
