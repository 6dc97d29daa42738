#include "drglm/recombine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "drglm/errors.hpp"
#include "drglm/linalg.hpp"
#include "drglm/stats.hpp"

namespace drglm {

std::string combine_method_name(CombineMethod m) {
    switch (m) {
        case CombineMethod::gram_sum: return "gram-sum";
        case CombineMethod::hessian_weighted: return "hessian-weighted";
        case CombineMethod::mean: return "mean";
    }
    return "?";
}

namespace {

void check_converged(const std::vector<SubsetFit>& fits) {
    std::vector<int> bad;
    for (const auto& f : fits)
        if (!f.converged) bad.push_back(f.subset_index);
    if (!bad.empty()) {
        std::string msg = "recombination rejected; non-converged subsets:";
        for (int s : bad) msg += " " + std::to_string(s);
        throw CombineRejectedError(msg, bad);
    }
}

Eigen::Index common_dim(const std::vector<SubsetFit>& fits) {
    if (fits.empty()) throw DimensionError("recombination needs at least one subset fit");
    const Eigen::Index d = fits.front().beta.size();
    for (const auto& f : fits)
        if (f.beta.size() != d)
            throw DimensionError("subset " + std::to_string(f.subset_index) +
                                 " has coefficient dimension " + std::to_string(f.beta.size()) +
                                 ", expected " + std::to_string(d));
    return d;
}

// Summation order is fixed to ascending subset index so recombined values
// are bit-identical however the subset fits were scheduled.
std::vector<const SubsetFit*> in_subset_order(const std::vector<SubsetFit>& fits) {
    std::vector<const SubsetFit*> ordered;
    ordered.reserve(fits.size());
    for (const auto& f : fits) ordered.push_back(&f);
    std::sort(ordered.begin(), ordered.end(),
              [](const SubsetFit* a, const SubsetFit* b) { return a->subset_index < b->subset_index; });
    return ordered;
}

} // namespace

LinearCombineResult combine_linear(const std::vector<GramStats>& parts) {
    if (parts.empty()) throw DimensionError("combine_linear needs at least one part");
    const Eigen::Index p = parts.front().xx.rows();

    LinearCombineResult out;
    out.pooled.xx = Eigen::MatrixXd::Zero(p, p);
    out.pooled.xy = Eigen::VectorXd::Zero(p);
    // Ascending subset order keeps the pooled sums bit-reproducible.
    for (const auto& part : parts) {
        if (part.xx.rows() != p)
            throw DimensionError("combine_linear: mismatched Gram dimensions");
        out.pooled.xx += part.xx;
        out.pooled.xy += part.xy;
        out.pooled.yy += part.yy;
        out.pooled.n += part.n;
    }

    SpdCholesky chol(out.pooled.xx);
    if (!chol.ok())
        throw SingularDesignError("singular pooled design: column " +
                                      std::to_string(chol.failed_column()) + " is linearly dependent",
                                  chol.failed_column());
    out.beta = chol.solve(out.pooled.xy);
    out.pooled_rss = out.pooled.yy - 2.0 * out.beta.dot(out.pooled.xy) +
                     out.beta.dot(out.pooled.xx * out.beta);
    if (out.pooled_rss < 0.0) out.pooled_rss = 0.0;
    return out;
}

Eigen::VectorXd combine_hessian_weighted(const std::vector<SubsetFit>& fits) {
    check_converged(fits);
    const Eigen::Index d = common_dim(fits);
    Eigen::MatrixXd info_sum = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd weighted = Eigen::VectorXd::Zero(d);
    for (const SubsetFit* f : in_subset_order(fits)) {
        info_sum += f->neg_hessian;
        weighted += f->neg_hessian * f->beta;
    }
    SpdCholesky chol(info_sum);
    if (!chol.ok())
        throw SingularInformationError("singular pooled information matrix", -1);
    return chol.solve(weighted);
}

Eigen::VectorXd combine_mean(const std::vector<SubsetFit>& fits) {
    check_converged(fits);
    const Eigen::Index d = common_dim(fits);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
    for (const SubsetFit* f : in_subset_order(fits)) sum += f->beta;
    return sum / static_cast<double>(fits.size());
}

Eigen::MatrixXd aggregate_variance(const std::vector<SubsetFit>& fits) {
    const Eigen::Index d = common_dim(fits);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(d, d);
    for (const SubsetFit* f : in_subset_order(fits)) {
        if (f->covariance.rows() != d || f->covariance.cols() != d)
            throw DimensionError("aggregate_variance: covariance of subset " +
                                 std::to_string(f->subset_index) + " has wrong dimensions");
        sum += f->covariance;
    }
    const double s2 = static_cast<double>(fits.size()) * static_cast<double>(fits.size());
    // True division per entry; scaling by 1/S^2 would round differently.
    return sum.unaryExpr([s2](double v) { return v / s2; });
}

CombinedFit wald_inference(const Eigen::VectorXd& beta, const Eigen::MatrixXd& variance,
                           const Family& family, long n, Eigen::Index p, double confidence) {
    const Eigen::Index d = beta.size();
    if (variance.rows() != d || variance.cols() != d)
        throw DimensionError("wald_inference: variance dimensions do not match beta");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw ConfigError("wald_inference: confidence must lie in (0, 1)");

    CombinedFit out;
    out.family = family;
    out.beta = beta;
    out.variance = variance;
    out.n = n;
    out.confidence = confidence;

    double quantile;
    const double upper = 1.0 - (1.0 - confidence) / 2.0;
    if (family.is_gaussian()) {
        out.df = n - static_cast<long>(p);
        if (out.df < 1) throw DomainError("wald_inference: gaussian residual df < 1");
        quantile = students_t_quantile(upper, static_cast<double>(out.df));
    } else {
        quantile = normal_quantile(upper);
    }

    out.se.resize(d);
    out.stat.resize(d);
    out.p_value.resize(d);
    out.ci_low.resize(d);
    out.ci_high.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        const double vjj = variance(j, j);
        if (vjj < 0.0)
            throw DomainError("wald_inference: negative variance for coefficient " + std::to_string(j));
        out.se[j] = std::sqrt(vjj);
        if (out.se[j] == 0.0) {
            out.zero_se.push_back(static_cast<int>(j));
            out.stat[j] = beta[j] == 0.0 ? 0.0
                                         : std::copysign(std::numeric_limits<double>::infinity(), beta[j]);
            out.p_value[j] = beta[j] == 0.0 ? 1.0 : 0.0;
        } else {
            out.stat[j] = beta[j] / out.se[j];
            out.p_value[j] = family.is_gaussian()
                                 ? students_t_two_sided_p(out.stat[j], static_cast<double>(out.df))
                                 : normal_two_sided_p(out.stat[j]);
        }
        out.ci_low[j] = beta[j] - quantile * out.se[j];
        out.ci_high[j] = beta[j] + quantile * out.se[j];
    }
    return out;
}

} // namespace drglm
