#include "linalg.hpp"

#include <lapacke.h>

#include <string>

#include "embedlab/error.hpp"

namespace embedlab::detail {

std::vector<double> band_eigenvalues(const Eigen::MatrixXd& ab_in, double lo, double hi) {
    Eigen::MatrixXd ab = ab_in;
    const lapack_int kd = static_cast<lapack_int>(ab.rows()) - 1;
    const lapack_int n = static_cast<lapack_int>(ab.cols());
    lapack_int m = 0;
    std::vector<double> w(n);
    std::vector<lapack_int> ifail(n);
    double q_dummy = 0.0, z_dummy = 0.0;
    const lapack_int info = LAPACKE_dsbevx(LAPACK_COL_MAJOR, 'N', 'V', 'U', n, kd, ab.data(), kd + 1,
                                           &q_dummy, 1, lo, hi, 0, 0, 0.0, &m, w.data(),
                                           &z_dummy, 1, ifail.data());
    if (info != 0)
        fail(ErrorKind::SolveFailure, "banded eigensolver failed, info=" + std::to_string(info));
    w.resize(m);
    return w;
}

std::vector<double> tridiagonal_eigenvalues(Eigen::VectorXd diag, Eigen::VectorXd off, double lo, double hi) {
    const lapack_int n = static_cast<lapack_int>(diag.size());
    lapack_int m = 0;
    std::vector<double> w(n);
    std::vector<lapack_int> ifail(n);
    double z_dummy = 0.0;
    const lapack_int info = LAPACKE_dstevx(LAPACK_COL_MAJOR, 'N', 'V', n, diag.data(), off.data(), lo, hi,
                                           0, 0, 0.0, &m, w.data(), &z_dummy, 1, ifail.data());
    if (info != 0)
        fail(ErrorKind::SolveFailure, "tridiagonal eigensolver failed, info=" + std::to_string(info));
    w.resize(m);
    return w;
}

Eigen::MatrixXd band_shifted_solve(const Eigen::MatrixXd& ab, double shift, const Eigen::MatrixXd& rhs) {
    const lapack_int kd = static_cast<lapack_int>(ab.rows()) - 1;
    const lapack_int n = static_cast<lapack_int>(ab.cols());
    const lapack_int ldab = 3 * kd + 1;
    // general band storage: row kl + ku + i - j holds A(i, j)
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(ldab, n);
    for (lapack_int j = 0; j < n; ++j) {
        for (lapack_int i = std::max<lapack_int>(0, j - kd); i <= j; ++i) {
            double v = ab(kd + i - j, j);
            if (i == j) v -= shift;
            g(2 * kd + i - j, j) = v;
            g(2 * kd + j - i, i) = v;
        }
    }
    Eigen::MatrixXd x = rhs;
    std::vector<lapack_int> piv(n);
    const lapack_int info = LAPACKE_dgbsv(LAPACK_COL_MAJOR, n, kd, kd, static_cast<lapack_int>(x.cols()),
                                          g.data(), ldab, piv.data(), x.data(), n);
    if (info < 0) fail(ErrorKind::SolveFailure, "banded solve failed");
    if (info > 0) {
        // exactly singular pivot: nudge the shift
        return band_shifted_solve(ab, shift * (1 + 1e-13) + 1e-300, rhs);
    }
    return x;
}

DenseEigen dense_eigen_range(Eigen::MatrixXd a, double lo, double hi) {
    const lapack_int n = static_cast<lapack_int>(a.rows());
    lapack_int m = 0;
    Eigen::VectorXd w(n);
    Eigen::MatrixXd z(n, n);
    std::vector<lapack_int> isuppz(2 * n);
    const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'V', 'U', n, a.data(), n, lo, hi,
                                           0, 0, 0.0, &m, w.data(), z.data(), n, isuppz.data());
    if (info != 0)
        fail(ErrorKind::SolveFailure, "dense eigensolver failed, info=" + std::to_string(info));
    return {w.head(m), z.leftCols(m)};
}

}  // namespace embedlab::detail
