#include "drglm/families.hpp"

#include "drglm/stats.hpp"

#include <cmath>

namespace drglm {

namespace {

// log(1 + e^eta) without overflow.
double log1pexp(double eta) {
    if (eta > 0) return eta + std::log1p(std::exp(-eta));
    return std::log1p(std::exp(eta));
}

int category_of(double v) { return static_cast<int>(std::lround(v)); }

} // namespace

std::string Family::name() const {
    switch (kind) {
        case FamilyKind::gaussian_identity: return "gaussian-identity";
        case FamilyKind::binomial_logit: return "binomial-logit";
        case FamilyKind::poisson_log: return "poisson-log";
        case FamilyKind::multinomial_logit: return "multinomial-logit";
    }
    return "?";
}

Family Family::parse(const std::string& name, int num_categories) {
    if (name == "gaussian-identity" || name == "gaussian" || name == "linear") return gaussian();
    if (name == "binomial-logit" || name == "binomial" || name == "logistic") return binomial();
    if (name == "poisson-log" || name == "poisson") return poisson();
    if (name == "multinomial-logit" || name == "multinomial") {
        Family f{FamilyKind::multinomial_logit, num_categories};
        return f;
    }
    throw ConfigError("unknown family '" + name + "'");
}

void validate_design(const DesignBlock& X, bool expect_intercept) {
    if (X.rows() < 1) throw DimensionError("design block must have at least one row");
    if (X.cols() < 1) throw DimensionError("design block must have at least one column");
    if (!X.X.allFinite()) throw DomainError("design block contains non-finite entries");
    if (expect_intercept && (X.X.col(0).array() != 1.0).any())
        throw DomainError("first design column must be the intercept column of ones");
}

void validate_response(const Family& family, const ResponseBlock& y) {
    const Eigen::Index n = y.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = y.y[i];
        if (!std::isfinite(v)) throw DomainError("response row " + std::to_string(i) + " is not finite");
        switch (family.kind) {
            case FamilyKind::gaussian_identity:
                break;
            case FamilyKind::binomial_logit:
                if (v != 0.0 && v != 1.0)
                    throw DomainError("binomial response row " + std::to_string(i) + " is not 0/1");
                break;
            case FamilyKind::poisson_log:
                if (v < 0.0 || v != std::floor(v))
                    throw DomainError("poisson response row " + std::to_string(i) +
                                      " is not a non-negative integer");
                break;
            case FamilyKind::multinomial_logit: {
                const int c = category_of(v);
                if (v != std::floor(v) || c < 1 || c > family.num_categories)
                    throw DomainError("multinomial response row " + std::to_string(i) +
                                      " is outside 1.." + std::to_string(family.num_categories));
                break;
            }
        }
    }
}

Eigen::VectorXd linear_predictor(const DesignBlock& X, const Eigen::VectorXd& beta) {
    if (beta.size() != X.cols())
        throw DimensionError("linear_predictor: beta has length " + std::to_string(beta.size()) +
                             ", expected " + std::to_string(X.cols()));
    return X.X * beta;
}

Eigen::MatrixXd multinomial_linear_predictor(const DesignBlock& X, const Eigen::VectorXd& beta,
                                             int num_categories) {
    const Eigen::Index p = X.cols();
    const Eigen::Index k = num_categories - 1;
    if (beta.size() != k * p)
        throw DimensionError("multinomial linear_predictor: beta has length " +
                             std::to_string(beta.size()) + ", expected " + std::to_string(k * p));
    Eigen::MatrixXd eta(X.rows(), k);
    for (Eigen::Index j = 0; j < k; ++j)
        eta.col(j) = X.X * beta.segment(j * p, p);
    return eta;
}

Eigen::VectorXd mean_from_eta(const Family& family, const Eigen::VectorXd& eta) {
    switch (family.kind) {
        case FamilyKind::gaussian_identity:
            return eta;
        case FamilyKind::binomial_logit: {
            Eigen::VectorXd mu(eta.size());
            for (Eigen::Index i = 0; i < eta.size(); ++i) {
                const double e = eta[i];
                // Stable logistic: never exponentiate a positive argument.
                mu[i] = e >= 0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e));
            }
            return mu;
        }
        case FamilyKind::poisson_log: {
            Eigen::VectorXd mu(eta.size());
            for (Eigen::Index i = 0; i < eta.size(); ++i) {
                if (eta[i] > 700.0)
                    throw DomainError("poisson mean overflows at row " + std::to_string(i) +
                                      " (eta = " + std::to_string(eta[i]) + ")");
                mu[i] = std::exp(eta[i]);
            }
            return mu;
        }
        case FamilyKind::multinomial_logit:
            throw DimensionError("mean_from_eta: multinomial families use multinomial_probabilities");
    }
    throw DomainError("unreachable family kind");
}

Eigen::MatrixXd multinomial_probabilities(const Eigen::MatrixXd& eta) {
    const Eigen::Index n = eta.rows();
    const Eigen::Index k = eta.cols();
    Eigen::MatrixXd p(n, k + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        // Reference category has eta = 0; subtract the row max before
        // exponentiating.
        double m = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) m = std::max(m, eta(i, j));
        double denom = std::exp(-m);
        p(i, 0) = denom;
        for (Eigen::Index j = 0; j < k; ++j) {
            const double e = std::exp(eta(i, j) - m);
            p(i, j + 1) = e;
            denom += e;
        }
        p.row(i) /= denom;
    }
    return p;
}

double log_likelihood(const Family& family, const Eigen::VectorXd& beta,
                      const DesignBlock& X, const ResponseBlock& y) {
    if (y.rows() != X.rows())
        throw DimensionError("log_likelihood: response rows " + std::to_string(y.rows()) +
                             " do not match design rows " + std::to_string(X.rows()));
    const Eigen::Index n = X.rows();
    switch (family.kind) {
        case FamilyKind::gaussian_identity: {
            // Profile log-likelihood at the MLE sigma^2 = RSS / n.
            const Eigen::VectorXd r = y.y - linear_predictor(X, beta);
            const double sigma2 = r.squaredNorm() / static_cast<double>(n);
            if (sigma2 <= 0.0) return std::numeric_limits<double>::infinity();
            return -0.5 * static_cast<double>(n) * (std::log(2.0 * M_PI * sigma2) + 1.0);
        }
        case FamilyKind::binomial_logit: {
            const Eigen::VectorXd eta = linear_predictor(X, beta);
            double ll = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                ll += y.y[i] * eta[i] - log1pexp(eta[i]);
                if (!std::isfinite(ll))
                    throw DomainError("binomial log-likelihood is non-finite at row " + std::to_string(i));
            }
            return ll;
        }
        case FamilyKind::poisson_log: {
            const Eigen::VectorXd eta = linear_predictor(X, beta);
            double ll = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (eta[i] > 700.0)
                    throw DomainError("poisson log-likelihood overflows at row " + std::to_string(i));
                ll += y.y[i] * eta[i] - std::exp(eta[i]) - log_gamma(y.y[i] + 1.0);
                if (!std::isfinite(ll))
                    throw DomainError("poisson log-likelihood is non-finite at row " + std::to_string(i));
            }
            return ll;
        }
        case FamilyKind::multinomial_logit: {
            const Eigen::MatrixXd eta = multinomial_linear_predictor(X, beta, family.num_categories);
            double ll = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                // log p_ic = eta_ic - log(exp(-m) + sum_j exp(eta_ij - m)) - m
                double m = 0.0;
                for (Eigen::Index j = 0; j < eta.cols(); ++j) m = std::max(m, eta(i, j));
                double denom = std::exp(-m);
                for (Eigen::Index j = 0; j < eta.cols(); ++j) denom += std::exp(eta(i, j) - m);
                const int c = category_of(y.y[i]);
                const double eta_c = c == 1 ? 0.0 : eta(i, c - 2);
                ll += eta_c - m - std::log(denom);
                if (!std::isfinite(ll))
                    throw DomainError("multinomial log-likelihood is non-finite at row " + std::to_string(i));
            }
            return ll;
        }
    }
    throw DomainError("unreachable family kind");
}

Eigen::VectorXd score(const Family& family, const Eigen::VectorXd& beta,
                      const DesignBlock& X, const ResponseBlock& y) {
    if (y.rows() != X.rows())
        throw DimensionError("score: response rows do not match design rows");
    switch (family.kind) {
        case FamilyKind::gaussian_identity:
        case FamilyKind::binomial_logit:
        case FamilyKind::poisson_log: {
            const Eigen::VectorXd eta = linear_predictor(X, beta);
            const Eigen::VectorXd mu = mean_from_eta(family, eta);
            return X.X.transpose() * (y.y - mu);
        }
        case FamilyKind::multinomial_logit: {
            const Eigen::Index p = X.cols();
            const int r = family.num_categories;
            const Eigen::MatrixXd eta = multinomial_linear_predictor(X, beta, r);
            const Eigen::MatrixXd prob = multinomial_probabilities(eta);
            Eigen::VectorXd g(static_cast<Eigen::Index>(r - 1) * p);
            for (int j = 2; j <= r; ++j) {
                Eigen::VectorXd ind = (y.y.array() == static_cast<double>(j)).cast<double>();
                g.segment(static_cast<Eigen::Index>(j - 2) * p, p) =
                    X.X.transpose() * (ind - prob.col(j - 1));
            }
            return g;
        }
    }
    throw DomainError("unreachable family kind");
}

Eigen::MatrixXd observed_information(const Family& family, const Eigen::VectorXd& beta,
                                     const DesignBlock& X, const ResponseBlock& y) {
    if (y.rows() != X.rows())
        throw DimensionError("observed_information: response rows do not match design rows");
    switch (family.kind) {
        case FamilyKind::gaussian_identity:
            return X.X.transpose() * X.X;
        case FamilyKind::binomial_logit: {
            const Eigen::VectorXd mu = mean_from_eta(family, linear_predictor(X, beta));
            const Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
            return X.X.transpose() * w.asDiagonal() * X.X;
        }
        case FamilyKind::poisson_log: {
            const Eigen::VectorXd mu = mean_from_eta(family, linear_predictor(X, beta));
            return X.X.transpose() * mu.asDiagonal() * X.X;
        }
        case FamilyKind::multinomial_logit: {
            const Eigen::Index p = X.cols();
            const int r = family.num_categories;
            const Eigen::MatrixXd eta = multinomial_linear_predictor(X, beta, r);
            const Eigen::MatrixXd prob = multinomial_probabilities(eta);
            const Eigen::Index d = static_cast<Eigen::Index>(r - 1) * p;
            Eigen::MatrixXd info(d, d);
            for (int j = 2; j <= r; ++j) {
                for (int k = j; k <= r; ++k) {
                    // Block (j,k): sum_i w_i x_i x_i' with w = p_j (1-p_j) on
                    // the diagonal and -p_j p_k off it.
                    Eigen::VectorXd w;
                    if (j == k)
                        w = (prob.col(j - 1).array() * (1.0 - prob.col(j - 1).array())).matrix();
                    else
                        w = (-prob.col(j - 1).array() * prob.col(k - 1).array()).matrix();
                    Eigen::MatrixXd block = X.X.transpose() * w.asDiagonal() * X.X;
                    info.block((j - 2) * p, (k - 2) * p, p, p) = block;
                    if (k != j) info.block((k - 2) * p, (j - 2) * p, p, p) = block.transpose();
                }
            }
            return info;
        }
    }
    throw DomainError("unreachable family kind");
}

} // namespace drglm
