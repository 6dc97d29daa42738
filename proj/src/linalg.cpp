#include "drglm/linalg.hpp"

#include <cmath>

#include "drglm/errors.hpp"

namespace drglm {

SpdCholesky::SpdCholesky(const Eigen::MatrixXd& A, double rel_pivot_tol) {
    const Eigen::Index n = A.rows();
    if (A.cols() != n) throw DimensionError("SpdCholesky: matrix is not square");
    L_ = Eigen::MatrixXd::Zero(n, n);
    const double threshold = rel_pivot_tol * std::max(A.diagonal().maxCoeff(), 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = A(j, j) - L_.row(j).head(j).squaredNorm();
        if (!(d > threshold) || !std::isfinite(d)) {
            failed_column_ = static_cast<int>(j);
            return;
        }
        L_(j, j) = std::sqrt(d);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double s = A(i, j) - L_.row(i).head(j).dot(L_.row(j).head(j));
            L_(i, j) = s / L_(j, j);
        }
    }
}

Eigen::VectorXd SpdCholesky::solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd z = L_.triangularView<Eigen::Lower>().solve(b);
    return L_.transpose().triangularView<Eigen::Upper>().solve(z);
}

Eigen::MatrixXd SpdCholesky::solve(const Eigen::MatrixXd& B) const {
    Eigen::MatrixXd Z = L_.triangularView<Eigen::Lower>().solve(B);
    return L_.transpose().triangularView<Eigen::Upper>().solve(Z);
}

Eigen::MatrixXd SpdCholesky::inverse() const {
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(L_.rows(), L_.rows());
    Eigen::MatrixXd inv = solve(identity);
    // Symmetrise; triangular back-substitution leaves last-ulp asymmetry.
    return 0.5 * (inv + inv.transpose()).eval();
}

} // namespace drglm
