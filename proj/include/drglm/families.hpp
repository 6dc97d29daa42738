#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "drglm/errors.hpp"

namespace drglm {

enum class FamilyKind {
    gaussian_identity,
    binomial_logit,
    poisson_log,
    multinomial_logit,
};

// Response family with its canonical link. Multinomial uses the
// baseline-category logit with category 1 (first sorted response level)
// as the reference.
struct Family {
    FamilyKind kind = FamilyKind::gaussian_identity;
    int num_categories = 0; // multinomial only

    static Family gaussian() { return {FamilyKind::gaussian_identity, 0}; }
    static Family binomial() { return {FamilyKind::binomial_logit, 0}; }
    static Family poisson() { return {FamilyKind::poisson_log, 0}; }
    static Family multinomial(int r) {
        if (r < 2) throw ConfigError("multinomial requires at least 2 categories, got " + std::to_string(r));
        return {FamilyKind::multinomial_logit, r};
    }

    bool is_multinomial() const { return kind == FamilyKind::multinomial_logit; }
    bool is_gaussian() const { return kind == FamilyKind::gaussian_identity; }

    // Coefficient dimension for a design with p columns.
    Eigen::Index coef_dim(Eigen::Index p) const {
        return is_multinomial() ? static_cast<Eigen::Index>(num_categories - 1) * p : p;
    }

    std::string name() const;
    static Family parse(const std::string& name, int num_categories = 0);

    bool operator==(const Family&) const = default;
};

// Dense per-subset (or per-chunk) design matrix. First column is the
// intercept column of ones unless the model disables it.
struct DesignBlock {
    Eigen::MatrixXd X;
    std::vector<std::string> labels; // aligned with columns; may be empty

    Eigen::Index rows() const { return X.rows(); }
    Eigen::Index cols() const { return X.cols(); }
};

// Response vector paired with a DesignBlock. Multinomial responses hold
// category indices 1..r.
struct ResponseBlock {
    Eigen::VectorXd y;

    Eigen::Index rows() const { return y.size(); }
};

void validate_design(const DesignBlock& X, bool expect_intercept);
void validate_response(const Family& family, const ResponseBlock& y);

// eta = X beta, one linear predictor per row.
Eigen::VectorXd linear_predictor(const DesignBlock& X, const Eigen::VectorXd& beta);

// Multinomial eta: n x (r-1), column j-2 holds x_i . beta_j for category j.
// beta is laid out category-major: all p coefficients of category 2, then
// category 3, and so on.
Eigen::MatrixXd multinomial_linear_predictor(const DesignBlock& X, const Eigen::VectorXd& beta, int num_categories);

// Inverse link, single-equation families.
Eigen::VectorXd mean_from_eta(const Family& family, const Eigen::VectorXd& eta);

// Row-wise category probabilities, n x r with the reference category in
// column 0. Stabilised by max subtraction; rows sum to 1.
Eigen::MatrixXd multinomial_probabilities(const Eigen::MatrixXd& eta);

double log_likelihood(const Family& family, const Eigen::VectorXd& beta,
                      const DesignBlock& X, const ResponseBlock& y);

// Gradient of log_likelihood in beta. The gaussian branch returns the
// scale-free X'(y - X beta), used only for optimality checks.
Eigen::VectorXd score(const Family& family, const Eigen::VectorXd& beta,
                      const DesignBlock& X, const ResponseBlock& y);

// Observed information I(beta) = -Hessian of log_likelihood; positive
// semi-definite for the canonical links used here.
Eigen::MatrixXd observed_information(const Family& family, const Eigen::VectorXd& beta,
                                     const DesignBlock& X, const ResponseBlock& y);

} // namespace drglm
