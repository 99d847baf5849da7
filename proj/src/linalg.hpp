#pragma once

#include <vector>

#include <Eigen/Dense>

namespace embedlab::detail {

// Eigenvalues in (lo, hi] of a real symmetric band matrix in LAPACK upper storage.
std::vector<double> band_eigenvalues(const Eigen::MatrixXd& ab, double lo, double hi);

// Eigenvalues in (lo, hi] of a real symmetric tridiagonal matrix.
std::vector<double> tridiagonal_eigenvalues(Eigen::VectorXd diag, Eigen::VectorXd off, double lo, double hi);

// Solves (A - shift I) X = B for a real symmetric band matrix.
Eigen::MatrixXd band_shifted_solve(const Eigen::MatrixXd& ab, double shift, const Eigen::MatrixXd& rhs);

struct DenseEigen {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};

// Eigenpairs with eigenvalue in (lo, hi] of a dense symmetric matrix.
DenseEigen dense_eigen_range(Eigen::MatrixXd a, double lo, double hi);

}  // namespace embedlab::detail
