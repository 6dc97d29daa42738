#pragma once

#include <Eigen/Dense>

namespace drglm {

// Unpivoted Cholesky A = L L' for symmetric positive-definite solves.
// Factorisation stops at the first column whose pivot falls below
// rel_pivot_tol times the largest diagonal entry of A, which identifies
// the first linearly dependent column for error reporting.
class SpdCholesky {
public:
    explicit SpdCholesky(const Eigen::MatrixXd& A, double rel_pivot_tol = 1e-12);

    bool ok() const { return failed_column_ < 0; }
    int failed_column() const { return failed_column_; }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
    Eigen::MatrixXd solve(const Eigen::MatrixXd& B) const;

    // Materialised inverse, computed by solving against identity columns.
    Eigen::MatrixXd inverse() const;

private:
    Eigen::MatrixXd L_;
    int failed_column_ = -1;
};

} // namespace drglm
