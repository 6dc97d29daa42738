#include "drglm/fit.hpp"

#include <cmath>
#include <string>

#include "drglm/errors.hpp"
#include "drglm/linalg.hpp"

namespace drglm {

void GramStats::add(const DesignBlock& X, const ResponseBlock& y) {
    if (y.rows() != X.rows())
        throw DimensionError("GramStats: response rows do not match design rows");
    if (X.rows() < 1) throw DimensionError("GramStats: empty block");
    if (xx.size() == 0) {
        xx = Eigen::MatrixXd::Zero(X.cols(), X.cols());
        xy = Eigen::VectorXd::Zero(X.cols());
    } else if (xx.rows() != X.cols()) {
        throw DimensionError("GramStats: block has " + std::to_string(X.cols()) +
                             " columns, accumulator has " + std::to_string(xx.rows()));
    }
    xx.noalias() += X.X.transpose() * X.X;
    xy.noalias() += X.X.transpose() * y.y;
    yy += y.y.squaredNorm();
    n += X.rows();
}

GramStats accumulate_gram(const DesignBlock& X, const ResponseBlock& y) {
    GramStats g;
    g.add(X, y);
    return g;
}

SubsetFit fit_ols(const GramStats& gram, int subset_index) {
    const Eigen::Index p = gram.xx.rows();
    if (gram.n <= p)
        throw DomainError("fit_ols: need more rows than columns (n = " + std::to_string(gram.n) +
                          ", p = " + std::to_string(p) + ", subset " +
                          std::to_string(subset_index) + ")");
    SpdCholesky chol(gram.xx);
    if (!chol.ok())
        throw SingularDesignError("singular design: column " + std::to_string(chol.failed_column()) +
                                      " is linearly dependent (subset " +
                                      std::to_string(subset_index) + ")",
                                  chol.failed_column());

    SubsetFit fit;
    fit.subset_index = subset_index;
    fit.beta = chol.solve(gram.xy);
    fit.rss = gram.yy - 2.0 * fit.beta.dot(gram.xy) + fit.beta.dot(gram.xx * fit.beta);
    if (fit.rss < 0.0) fit.rss = 0.0; // rounding guard
    const double sigma2 = fit.rss / static_cast<double>(gram.n - p);
    fit.covariance = sigma2 * chol.inverse();
    fit.neg_hessian = gram.xx;
    fit.gram = gram;
    fit.n_rows = gram.n;
    fit.converged = true;
    fit.iterations = 0;
    fit.final_gradient_norm = (gram.xy - gram.xx * fit.beta).lpNorm<Eigen::Infinity>();
    return fit;
}

SubsetFit fit_irls(const Family& family, const DesignBlock& X, const ResponseBlock& y,
                   const FitConfig& config, const Eigen::VectorXd* beta_init, int subset_index) {
    if (family.is_gaussian())
        throw ConfigError("fit_irls: gaussian models use fit_ols on accumulated Gram statistics");
    if (config.max_iterations < 1) throw ConfigError("fit_irls: max_iterations must be >= 1");
    if (!(config.gradient_tolerance > 0)) throw ConfigError("fit_irls: gradient_tolerance must be > 0");
    validate_response(family, y);

    const Eigen::Index d = family.coef_dim(X.cols());
    Eigen::VectorXd beta = beta_init ? *beta_init : Eigen::VectorXd::Zero(d);
    if (beta.size() != d)
        throw DimensionError("fit_irls: beta_init has length " + std::to_string(beta.size()) +
                             ", expected " + std::to_string(d));
    if (!beta.allFinite()) throw DomainError("fit_irls: beta_init is not finite");

    SubsetFit fit;
    fit.subset_index = subset_index;
    fit.n_rows = X.rows();

    double ll = log_likelihood(family, beta, X, y);
    Eigen::VectorXd grad = score(family, beta, X, y);
    int iter = 0;
    for (; iter < config.max_iterations; ++iter) {
        if (grad.lpNorm<Eigen::Infinity>() < config.gradient_tolerance) break;

        const Eigen::MatrixXd info = observed_information(family, beta, X, y);
        SpdCholesky chol(info);
        if (!chol.ok())
            throw SingularInformationError(
                "singular information matrix in subset " + std::to_string(subset_index) +
                    " at iteration " + std::to_string(iter),
                subset_index);
        const Eigen::VectorXd direction = chol.solve(grad);

        // Step-halving: back off while the log-likelihood fails to
        // increase. Trial steps that overflow the likelihood (poisson
        // far from the optimum) count as -inf and are halved too. An
        // accepted step is always the best one seen, since rejected steps
        // all fall below the acceptance threshold.
        double step = 1.0;
        Eigen::VectorXd best;
        double best_ll = -std::numeric_limits<double>::infinity();
        for (int h = 0; h <= config.step_halving_max; ++h, step *= 0.5) {
            const Eigen::VectorXd candidate = beta + step * direction;
            double candidate_ll;
            try {
                candidate_ll = log_likelihood(family, candidate, X, y);
            } catch (const DomainError&) {
                continue;
            }
            if (candidate_ll > best_ll) {
                best_ll = candidate_ll;
                best = candidate;
            }
            if (candidate_ll >= ll - 1e-10 * (1.0 + std::fabs(ll))) break;
        }
        if (best.size() == 0)
            throw DomainError("fit_irls: every trial step overflowed the log-likelihood in subset " +
                              std::to_string(subset_index));
        beta = best;
        ll = best_ll;

        if (beta.lpNorm<Eigen::Infinity>() > 1e4)
            throw SeparationError("coefficients diverged in subset " + std::to_string(subset_index) +
                                  " (|beta| > 1e4); data are likely separated");

        grad = score(family, beta, X, y);
    }

    fit.beta = beta;
    fit.iterations = iter;
    fit.final_gradient_norm = grad.lpNorm<Eigen::Infinity>();
    fit.converged = fit.final_gradient_norm < config.gradient_tolerance;

    const Eigen::MatrixXd info = observed_information(family, beta, X, y);
    SpdCholesky chol(info);
    if (!chol.ok())
        throw SingularInformationError(
            "singular information matrix at the fitted point in subset " +
                std::to_string(subset_index),
            subset_index);
    fit.neg_hessian = info;
    fit.covariance = chol.inverse();
    return fit;
}

} // namespace drglm
