#pragma once

#include <Eigen/Dense>
#include <optional>

#include "drglm/families.hpp"

namespace drglm {

struct FitConfig {
    int max_iterations = 50;
    double gradient_tolerance = 1e-8;
    int step_halving_max = 10;
};

// Sufficient statistics for the gaussian closed form: X'X, X'y, y'y and
// the row count. Additive across chunks and subsets.
struct GramStats {
    Eigen::MatrixXd xx;
    Eigen::VectorXd xy;
    double yy = 0.0;
    long n = 0;

    void add(const DesignBlock& X, const ResponseBlock& y);
};

GramStats accumulate_gram(const DesignBlock& X, const ResponseBlock& y);

// One subset's fit: estimate, covariance, observed information, and (for
// gaussian) the Gram statistics that make exact recombination possible.
struct SubsetFit {
    int subset_index = 1;
    Eigen::VectorXd beta;
    Eigen::MatrixXd covariance;   // V(beta_hat)
    Eigen::MatrixXd neg_hessian;  // observed information at beta_hat
    std::optional<GramStats> gram; // gaussian only
    double rss = 0.0;              // gaussian only
    long n_rows = 0;
    bool converged = false;
    int iterations = 0;
    double final_gradient_norm = 0.0;
};

// Closed-form OLS from accumulated Gram statistics. Requires n > p and a
// positive-definite X'X; covariance is sigma2_hat (X'X)^{-1} with
// sigma2_hat = RSS / (n - p).
SubsetFit fit_ols(const GramStats& gram, int subset_index = 1);

// Damped Newton-Raphson for the non-gaussian families: step I(beta)^{-1}
// score(beta), halved while the log-likelihood does not increase, until
// the score infinity-norm drops below the configured tolerance.
SubsetFit fit_irls(const Family& family, const DesignBlock& X, const ResponseBlock& y,
                   const FitConfig& config = {}, const Eigen::VectorXd* beta_init = nullptr,
                   int subset_index = 1);

} // namespace drglm
