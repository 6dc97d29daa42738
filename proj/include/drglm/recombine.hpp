#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "drglm/families.hpp"
#include "drglm/fit.hpp"

namespace drglm {

enum class CombineMethod { gram_sum, hessian_weighted, mean };

std::string combine_method_name(CombineMethod m);

// Recombined estimate with aggregated variance and Wald inference.
struct CombinedFit {
    Family family;
    CombineMethod method = CombineMethod::gram_sum;
    Eigen::VectorXd beta;
    Eigen::MatrixXd variance;
    Eigen::VectorXd se;
    Eigen::VectorXd stat;    // t for gaussian, z otherwise
    Eigen::VectorXd p_value;
    Eigen::VectorXd ci_low;
    Eigen::VectorXd ci_high;
    double confidence = 0.95;
    long df = -1;            // gaussian residual df (n - p); -1 otherwise
    int S = 1;
    long n = 0;
    bool converged = true;
    std::vector<std::string> labels;   // may be empty
    std::vector<int> zero_se;          // coefficients reported with se == 0
};

struct LinearCombineResult {
    Eigen::VectorXd beta;
    GramStats pooled;
    double pooled_rss = 0.0;
};

// Exact OLS recombination: solve (sum X_s'X_s) beta = sum X_s'y_s. The
// pooled RSS is recovered from the retained y'y sums, so the classical
// full-data covariance is available without another data pass.
LinearCombineResult combine_linear(const std::vector<GramStats>& parts);

// Curvature-weighted recombination (sum I_s)^{-1} (sum I_s beta_s) for
// logistic fits. Rejects the whole combination if any subset fit failed
// to converge.
Eigen::VectorXd combine_hessian_weighted(const std::vector<SubsetFit>& fits);

// Plain coefficient average across subsets (poisson, multinomial).
Eigen::VectorXd combine_mean(const std::vector<SubsetFit>& fits);

// Aggregated covariance (1/S^2) sum_s V(beta_s), summed in ascending
// subset order. Applied uniformly to every family.
Eigen::MatrixXd aggregate_variance(const std::vector<SubsetFit>& fits);

// Wald statistics, two-sided p-values and confidence intervals from an
// estimate/covariance pair. Gaussian models use Student's t with
// df = n - p; the likelihood families use the standard normal.
CombinedFit wald_inference(const Eigen::VectorXd& beta, const Eigen::MatrixXd& variance,
                           const Family& family, long n, Eigen::Index p,
                           double confidence = 0.95);

} // namespace drglm
