#pragma once

#include <Eigen/Dense>

namespace taskcomm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct SymmetricEigen {
  Vector values;   // descending
  Matrix vectors;  // columns aligned with values, sign-normalized
};

struct SingularBasis {
  Vector singular_values;  // descending, padded with zeros to full dimension
  Matrix basis;            // full cols×cols orthogonal right-singular basis
};

// Eigendecomposition of a symmetric matrix, eigenvalues descending, each
// eigenvector's largest-magnitude entry made positive so the decomposition is
// deterministic across runs.
SymmetricEigen symmetric_eigen(const Matrix& m);

// Full right-singular basis of an arbitrary matrix (Jacobi SVD), singular
// values descending, same sign convention as symmetric_eigen.
SingularBasis right_singular_basis(const Matrix& a);

// U max(lambda, floor)^{1/2} U^T and U max(lambda, floor)^{-1/2} U^T.
Matrix symmetric_sqrt(const Matrix& m, double eigen_floor = 0.0);
Matrix symmetric_inv_sqrt(const Matrix& m, double eigen_floor = 1e-12);

Matrix symmetrize(const Matrix& m);

// Flips column signs in place so each column's largest-magnitude entry is
// positive (first such entry on exact ties).
void fix_column_signs(Matrix& m);

}  // namespace taskcomm
