#include "drglm/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <mutex>
#include <queue>
#include <thread>

#include <json.hpp>

#include "drglm/digest.hpp"
#include "drglm/errors.hpp"
#include "drglm/version.hpp"

namespace drglm {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Fixed-size worker pool with a bounded number of in-flight jobs, so the
// reader thread cannot materialise every subset at once. The first error
// (by subset index) wins; outstanding jobs are drained, not started.
class SubsetPool {
public:
    SubsetPool(int threads, int max_in_flight)
        : max_in_flight_(std::max(1, max_in_flight)) {
        for (int t = 0; t < std::max(1, threads); ++t)
            workers_.emplace_back([this] { work(); });
    }

    ~SubsetPool() {
        {
            std::unique_lock lock(mutex_);
            done_ = true;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

    void submit(int subset_index, std::function<void()> job) {
        std::unique_lock lock(mutex_);
        space_cv_.wait(lock, [this] { return in_flight_ < max_in_flight_ || failed_; });
        if (failed_) return; // fail fast; error reported by finish()
        ++in_flight_;
        jobs_.emplace(subset_index, std::move(job));
        cv_.notify_one();
    }

    bool failed() const { return failed_.load(); }

    // Waits for all submitted jobs, then rethrows the failure with the
    // smallest subset index, if any.
    void finish() {
        std::unique_lock lock(mutex_);
        idle_cv_.wait(lock, [this] { return in_flight_ == 0 && jobs_.empty(); });
        if (!errors_.empty()) {
            auto first = std::min_element(errors_.begin(), errors_.end(),
                                          [](const auto& a, const auto& b) { return a.first < b.first; });
            std::rethrow_exception(first->second);
        }
    }

private:
    void work() {
        while (true) {
            std::pair<int, std::function<void()>> job;
            {
                std::unique_lock lock(mutex_);
                cv_.wait(lock, [this] { return done_ || !jobs_.empty(); });
                if (jobs_.empty()) {
                    if (done_) return;
                    continue;
                }
                job = std::move(jobs_.front());
                jobs_.pop();
            }
            std::exception_ptr err;
            try {
                job.second();
            } catch (...) {
                err = std::current_exception();
            }
            {
                std::unique_lock lock(mutex_);
                if (err) {
                    errors_.emplace_back(job.first, err);
                    failed_ = true;
                }
                --in_flight_;
            }
            space_cv_.notify_one();
            idle_cv_.notify_all();
        }
    }

    int max_in_flight_;
    std::vector<std::thread> workers_;
    std::queue<std::pair<int, std::function<void()>>> jobs_;
    std::vector<std::pair<int, std::exception_ptr>> errors_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::condition_variable space_cv_;
    std::condition_variable idle_cv_;
    std::atomic<bool> failed_ = false;
    bool done_ = false;
    int in_flight_ = 0;
};

// Per-subset working state while streaming: gaussian subsets accumulate
// Gram statistics chunk by chunk; the likelihood families materialise the
// subset (rows are bounded by the plan, not the file).
struct SubsetState {
    GramStats gram;
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::Index filled = 0;
};

PartitionPlan build_plan(const FitOptions& opt, long n) {
    switch (opt.division) {
        case DivisionStrategy::sequential:
            return sequential_plan(n, opt.subsets);
        case DivisionStrategy::replicate:
            if (!opt.seed) throw UsageError("replicate division requires a seed");
            return replicate_plan(n, opt.subsets, *opt.seed);
        case DivisionStrategy::stratified: {
            if (opt.strat_column.empty())
                throw UsageError("stratified division requires a conditioning column");
            const auto values = read_column(opt.data_path, opt.strat_column);
            // --subsets bounds subset size: no stratum may exceed ceil(n/S).
            const long max_rows = opt.subsets > 1
                                      ? (n + opt.subsets - 1) / opt.subsets
                                      : n;
            PartitionPlan plan = stratified_plan(values, max_rows);
            plan.strat_column = opt.strat_column;
            return plan;
        }
    }
    throw UsageError("unknown division strategy");
}

} // namespace

int default_threads() {
    if (const char* env = std::getenv("DR_GLM_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

FitOutcome run_fit(const FitOptions& opt) {
    if (opt.subsets < 1) throw UsageError("--subsets must be >= 1");
    if (opt.chunk_rows < 1) throw UsageError("--chunk-rows must be >= 1");
    const int threads = opt.threads > 0 ? opt.threads : default_threads();

    FitOutcome out;
    RunManifest& manifest = out.manifest;
    manifest.tool_version = kVersion;
    manifest.input_path = opt.data_path;
    manifest.threads = threads;

    // Scan (or load the schema sidecar).
    const auto scan_start = Clock::now();
    std::optional<Schema> schema;
    if (opt.schema_cache) schema = load_schema_cache(*opt.schema_cache, opt.data_path);
    if (!schema) {
        schema = scan_schema(opt.data_path, opt.spec.types);
        if (opt.schema_cache) save_schema_cache(*opt.schema_cache, opt.data_path, *schema);
    }
    manifest.scan_ms = ms_since(scan_start);
    manifest.input_bytes = std::filesystem::file_size(opt.data_path);
    manifest.input_digest = to_hex(fnv1a64_file(opt.data_path));
    manifest.model_digest = to_hex(fnv1a64(opt.spec.to_json().dump()));

    validate_model(*schema, opt.spec);
    const Family family = resolve_family(*schema, opt.spec);
    const auto labels = coefficient_labels(*schema, opt.spec);

    PartitionPlan plan = build_plan(opt, schema->row_count);
    manifest.plan = plan;
    const int S = plan.num_subsets;

    // Stream and fit.
    const auto fit_start = Clock::now();
    std::vector<SubsetState> states(static_cast<std::size_t>(S));
    std::vector<SubsetFit> fits(static_cast<std::size_t>(S));
    std::vector<double> fit_ms(static_cast<std::size_t>(S), 0.0);
    const bool gaussian = family.is_gaussian();

    if (!gaussian) {
        // Rows per subset are known from the plan; reserve once.
        for (int s = 0; s < S; ++s) {
            states[static_cast<std::size_t>(s)].y.resize(plan.subset_rows(s));
        }
    }

    {
        SubsetPool pool(threads, threads + 1);
        SubsetStreamer streamer(opt.data_path, plan, *schema, opt.spec, opt.chunk_rows);
        long peak_chunk = 0;
        while (auto chunk = streamer.next()) {
            if (pool.failed()) break;
            const int s = chunk->subset_index - 1;
            SubsetState& state = states[static_cast<std::size_t>(s)];
            peak_chunk = std::max(peak_chunk, chunk->data.design.rows());
            if (gaussian) {
                state.gram.add(chunk->data.design, chunk->data.response);
            } else {
                if (state.X.rows() == 0)
                    state.X.resize(plan.subset_rows(s), chunk->data.design.cols());
                state.X.middleRows(state.filled, chunk->data.design.rows()) = chunk->data.design.X;
                state.y.segment(state.filled, chunk->data.response.rows()) = chunk->data.response.y;
                state.filled += chunk->data.design.rows();
            }
            if (!chunk->last_for_subset) continue;

            const int subset_index = chunk->subset_index;
            pool.submit(subset_index, [&, s, subset_index] {
                const auto t0 = Clock::now();
                SubsetState& st = states[static_cast<std::size_t>(s)];
                if (gaussian) {
                    fits[static_cast<std::size_t>(s)] = fit_ols(st.gram, subset_index);
                } else {
                    DesignBlock X{std::move(st.X), {}};
                    ResponseBlock y{std::move(st.y)};
                    fits[static_cast<std::size_t>(s)] =
                        fit_irls(family, X, y, opt.fit_config, nullptr, subset_index);
                    st = SubsetState{}; // release subset memory
                }
                fit_ms[static_cast<std::size_t>(s)] = ms_since(t0);
            });
        }
        manifest.peak_chunk_rows = peak_chunk;
        pool.finish();
    }
    manifest.fit_total_ms = ms_since(fit_start);

    for (int s = 0; s < S; ++s) {
        const SubsetFit& f = fits[static_cast<std::size_t>(s)];
        manifest.subsets.push_back({f.subset_index, f.n_rows, f.converged, f.iterations,
                                    f.final_gradient_norm, fit_ms[static_cast<std::size_t>(s)]});
    }

    // Non-converged subsets poison recombination: enumerate and reject.
    {
        std::vector<int> bad;
        for (const auto& f : fits)
            if (!f.converged) bad.push_back(f.subset_index);
        if (!bad.empty()) {
            std::string msg = "subset fits did not converge:";
            for (int b : bad) msg += " " + std::to_string(b);
            throw CombineRejectedError(msg, bad);
        }
    }

    // Recombine.
    const auto recombine_start = Clock::now();
    Eigen::VectorXd beta;
    Eigen::MatrixXd variance;
    CombineMethod method = CombineMethod::gram_sum;
    const Eigen::Index p = family.is_multinomial()
                               ? fits.front().beta.size() / (family.num_categories - 1)
                               : fits.front().beta.size();
    switch (family.kind) {
        case FamilyKind::gaussian_identity: {
            method = CombineMethod::gram_sum;
            std::vector<GramStats> parts;
            parts.reserve(fits.size());
            for (const auto& f : fits) parts.push_back(*f.gram);
            const LinearCombineResult lin = combine_linear(parts);
            beta = lin.beta;
            if (opt.exact_gaussian_variance) {
                // Classical pooled covariance from the exact pooled Gram.
                SubsetFit pooled = fit_ols(lin.pooled, 0);
                variance = pooled.covariance;
            } else {
                variance = aggregate_variance(fits);
            }
            break;
        }
        case FamilyKind::binomial_logit:
            method = CombineMethod::hessian_weighted;
            beta = combine_hessian_weighted(fits);
            variance = aggregate_variance(fits);
            break;
        case FamilyKind::poisson_log:
        case FamilyKind::multinomial_logit:
            method = CombineMethod::mean;
            beta = combine_mean(fits);
            variance = aggregate_variance(fits);
            break;
        default:
            throw ConfigError("unsupported family");
    }

    out.fit = wald_inference(beta, variance, family, schema->row_count, p, opt.spec.confidence);
    out.fit.method = method;
    out.fit.S = S;
    out.fit.labels = labels;
    out.fit.converged = true;
    manifest.recombine_ms = ms_since(recombine_start);
    return out;
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json j;
    j["tool_version"] = tool_version;
    j["input"] = {{"path", input_path}, {"bytes", input_bytes}, {"fnv1a64", input_digest}};
    j["model_digest"] = model_digest;
    j["plan"] = plan.to_json();
    nlohmann::json subs = nlohmann::json::array();
    for (const auto& s : subsets)
        subs.push_back({{"index", s.index},
                        {"rows", s.rows},
                        {"converged", s.converged},
                        {"iterations", s.iterations},
                        {"final_gradient_norm", s.final_gradient_norm},
                        {"fit_ms", s.fit_ms}});
    j["subsets"] = std::move(subs);
    j["timing_ms"] = {{"scan", scan_ms}, {"fit_total", fit_total_ms}, {"recombine", recombine_ms}};
    j["peak_chunk_rows"] = peak_chunk_rows;
    j["threads"] = threads;
    return j;
}

nlohmann::json result_to_json(const CombinedFit& fit, const std::string& manifest_ref) {
    nlohmann::json j;
    j["family"] = fit.family.name();
    j["method"] = combine_method_name(fit.method);
    j["S"] = fit.S;
    j["n"] = fit.n;
    if (fit.df >= 0) j["df"] = fit.df;
    j["converged"] = fit.converged;
    j["confidence"] = fit.confidence;
    j["manifest_ref"] = manifest_ref;
    nlohmann::json coefs = nlohmann::json::array();
    for (Eigen::Index k = 0; k < fit.beta.size(); ++k) {
        nlohmann::json c;
        c["label"] = k < static_cast<Eigen::Index>(fit.labels.size())
                         ? fit.labels[static_cast<std::size_t>(k)]
                         : "b" + std::to_string(k);
        c["estimate"] = fit.beta[k];
        c["se"] = fit.se[k];
        // JSON has no infinity literal; zero-SE statistics are emitted as
        // signed string sentinels.
        if (std::isfinite(fit.stat[k])) c["stat"] = fit.stat[k];
        else c["stat"] = fit.stat[k] > 0 ? "Infinity" : "-Infinity";
        c["p"] = fit.p_value[k];
        c["ci_low"] = fit.ci_low[k];
        c["ci_high"] = fit.ci_high[k];
        coefs.push_back(std::move(c));
    }
    j["coefficients"] = std::move(coefs);
    if (!fit.zero_se.empty()) j["zero_se_flagged"] = fit.zero_se;
    return j;
}

CombinedFit result_from_json(const nlohmann::json& j) {
    CombinedFit fit;
    const std::string family = j.at("family").get<std::string>();
    fit.family = Family::parse(family, family == "multinomial-logit" ? 2 : 0);
    const std::string method = j.at("method").get<std::string>();
    if (method == "gram-sum") fit.method = CombineMethod::gram_sum;
    else if (method == "hessian-weighted") fit.method = CombineMethod::hessian_weighted;
    else if (method == "mean") fit.method = CombineMethod::mean;
    else throw ConfigError("unknown combine method '" + method + "'");
    fit.S = j.at("S").get<int>();
    fit.n = j.at("n").get<long>();
    fit.df = j.contains("df") ? j.at("df").get<long>() : -1;
    fit.converged = j.at("converged").get<bool>();
    fit.confidence = j.at("confidence").get<double>();
    const auto& coefs = j.at("coefficients");
    const Eigen::Index d = static_cast<Eigen::Index>(coefs.size());
    fit.beta.resize(d);
    fit.se.resize(d);
    fit.stat.resize(d);
    fit.p_value.resize(d);
    fit.ci_low.resize(d);
    fit.ci_high.resize(d);
    fit.variance = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index k = 0; k < d; ++k) {
        const auto& c = coefs[static_cast<std::size_t>(k)];
        fit.labels.push_back(c.at("label").get<std::string>());
        fit.beta[k] = c.at("estimate").get<double>();
        fit.se[k] = c.at("se").get<double>();
        if (c.at("stat").is_string())
            fit.stat[k] = c.at("stat").get<std::string>() == "Infinity"
                              ? std::numeric_limits<double>::infinity()
                              : -std::numeric_limits<double>::infinity();
        else
            fit.stat[k] = c.at("stat").get<double>();
        fit.p_value[k] = c.at("p").get<double>();
        fit.ci_low[k] = c.at("ci_low").get<double>();
        fit.ci_high[k] = c.at("ci_high").get<double>();
        fit.variance(k, k) = fit.se[k] * fit.se[k];
    }
    return fit;
}

} // namespace drglm
