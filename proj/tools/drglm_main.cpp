// drglm: fit generalized linear models to large CSV files by dividing the
// rows into subsets, fitting each independently, and recombining the
// estimates with aggregated standard errors and Wald inference.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "drglm/data_io.hpp"
#include "drglm/digest.hpp"
#include "drglm/errors.hpp"
#include "drglm/harness.hpp"
#include "drglm/partition.hpp"
#include "drglm/pipeline.hpp"
#include "drglm/synth.hpp"
#include "drglm/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1; // module errors, tolerance or convergence failures
constexpr int kExitUsage = 2;

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw drglm::DataError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

void emit_error_json(const std::string& kind, const std::string& message,
                     const nlohmann::json& extra = {}) {
    nlohmann::json j;
    j["error"] = {{"type", kind}, {"message", message}};
    if (!extra.empty())
        for (const auto& [k, v] : extra.items()) j["error"][k] = v;
    std::cout << j.dump(2) << std::endl;
}

struct FitArgs {
    std::string data, spec_path, out;
    int subsets = 1;
    std::string division = "sequential";
    std::optional<std::uint64_t> seed;
    std::string strat_column;
    std::string method = "dr";
    long chunk_rows = 65536;
    int threads = 0;
    std::string gaussian_se = "aggregated";
    std::string schema_cache;
};

drglm::FitOptions to_options(const FitArgs& args) {
    drglm::FitOptions opt;
    opt.data_path = args.data;
    opt.spec = drglm::ModelSpec::load(args.spec_path);
    opt.division = drglm::parse_division(args.division);
    opt.subsets = args.method == "full" ? 1 : args.subsets;
    if (args.method == "full") opt.division = drglm::DivisionStrategy::sequential;
    opt.seed = args.seed;
    opt.strat_column = args.strat_column;
    opt.chunk_rows = args.chunk_rows;
    opt.threads = args.threads;
    opt.exact_gaussian_variance = args.gaussian_se == "exact";
    if (!args.schema_cache.empty()) opt.schema_cache = args.schema_cache;
    if (opt.division == drglm::DivisionStrategy::replicate && !opt.seed)
        throw drglm::UsageError("--division replicate requires --seed");
    if (opt.division == drglm::DivisionStrategy::stratified && opt.strat_column.empty())
        throw drglm::UsageError("--division stratified requires --strat-column");
    return opt;
}

void add_fit_flags(CLI::App* cmd, FitArgs& args, bool with_method) {
    cmd->add_option("--data", args.data, "input CSV path")->required();
    cmd->add_option("--spec", args.spec_path, "model spec JSON path")->required();
    cmd->add_option("--subsets", args.subsets, "number of subsets S")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--division", args.division, "sequential | replicate | stratified")
        ->check(CLI::IsMember({"sequential", "replicate", "stratified"}));
    cmd->add_option("--seed", args.seed, "permutation seed (replicate division)");
    cmd->add_option("--strat-column", args.strat_column, "conditioning column (stratified division)");
    if (with_method)
        cmd->add_option("--method", args.method, "dr | full")->check(CLI::IsMember({"dr", "full"}));
    cmd->add_option("--chunk-rows", args.chunk_rows, "rows per streamed chunk")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--threads", args.threads, "worker threads (default: DR_GLM_THREADS or hardware)");
    cmd->add_option("--gaussian-se", args.gaussian_se,
                    "gaussian variance: aggregated (per-subset pooling) | exact (pooled Gram)")
        ->check(CLI::IsMember({"aggregated", "exact"}));
    cmd->add_option("--schema-cache", args.schema_cache, "schema sidecar JSON path");
}

int cmd_fit(const FitArgs& args) {
    const drglm::FitOptions opt = to_options(args);
    drglm::FitOutcome outcome = drglm::run_fit(opt);
    const std::string manifest_path = args.out + ".manifest.json";
    write_json(args.out, drglm::result_to_json(outcome.fit, manifest_path));
    write_json(manifest_path, outcome.manifest.to_json());
    std::cerr << "wrote " << args.out << " (S=" << outcome.fit.S << ", n=" << outcome.fit.n
              << ", family=" << outcome.fit.family.name() << ")\n";
    return kExitOk;
}

int cmd_compare(const FitArgs& args, double tol_coef, double tol_se, const std::string& baseline,
                const std::string& out, bool json_out) {
    drglm::FitOptions opt = to_options(args);
    const drglm::CombinedFit dr = drglm::run_fit(opt).fit;

    drglm::CompareTolerances tol{tol_coef, tol_se};
    drglm::ComparisonReport report;
    if (!baseline.empty()) {
        report = drglm::compare_to_baseline(dr, drglm::load_baseline_csv(baseline), tol);
    } else {
        const drglm::CombinedFit full = drglm::fit_full(args.data, opt.spec);
        report = drglm::compare_fits(dr, full, tol);
    }
    if (json_out) std::cout << report.to_json().dump(2) << '\n';
    else std::cout << report.render_text();
    if (!out.empty()) write_json(out, report.to_json());
    return report.pass ? kExitOk : kExitFailure;
}

int cmd_partition(long rows, int subsets, const std::string& division,
                  std::optional<std::uint64_t> seed, const std::string& out) {
    const drglm::DivisionStrategy strategy = drglm::parse_division(division);
    drglm::PartitionPlan plan;
    switch (strategy) {
        case drglm::DivisionStrategy::sequential:
            plan = drglm::sequential_plan(rows, subsets);
            break;
        case drglm::DivisionStrategy::replicate:
            if (!seed) throw drglm::UsageError("--division replicate requires --seed");
            plan = drglm::replicate_plan(rows, subsets, *seed);
            break;
        case drglm::DivisionStrategy::stratified:
            throw drglm::UsageError(
                "stratified plans depend on column values; use 'fit --division stratified'");
    }
    const nlohmann::json j = plan.to_json();
    if (out.empty()) std::cout << j.dump(2) << '\n';
    else write_json(out, j);
    return kExitOk;
}

int cmd_synth(const std::string& config_path, const std::string& out) {
    const drglm::SynthConfig config = drglm::SynthConfig::load(config_path);
    drglm::generate_synthetic(config, out);
    std::cerr << "wrote " << out << " (" << config.n << " rows, digest "
              << drglm::to_hex(drglm::fnv1a64_file(out)) << ")\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"divide-and-recombine GLM fitting engine"};
    app.set_version_flag("--version", drglm::kVersion);
    app.require_subcommand(1);

    FitArgs fit_args;
    auto* fit = app.add_subcommand("fit", "fit a model (divided or full) and write result JSON");
    add_fit_flags(fit, fit_args, true);
    fit->add_option("--out", fit_args.out, "result JSON path")->required();

    FitArgs cmp_args;
    double tol_coef = 1e-2, tol_se = 5e-2;
    std::string baseline, cmp_out;
    bool cmp_json = false;
    auto* cmp = app.add_subcommand("compare", "diff a divided fit against the full fit or a baseline");
    add_fit_flags(cmp, cmp_args, false);
    cmp->add_option("--tol-coef", tol_coef, "max coefficient rel_diff");
    cmp->add_option("--tol-se", tol_se, "max SE rel_diff");
    cmp->add_option("--baseline", baseline, "baseline CSV (label,estimate,se) instead of a full fit");
    cmp->add_option("--out", cmp_out, "also write the JSON report here");
    cmp->add_flag("--json", cmp_json, "print JSON instead of the text table");

    long part_rows = 0;
    int part_subsets = 1;
    std::string part_division = "sequential", part_out;
    std::optional<std::uint64_t> part_seed;
    auto* part = app.add_subcommand("partition", "emit a partition plan as JSON");
    part->add_option("--rows", part_rows, "total rows n")->required();
    part->add_option("--subsets", part_subsets, "number of subsets S")
        ->required()
        ->check(CLI::PositiveNumber);
    part->add_option("--division", part_division, "sequential | replicate")
        ->check(CLI::IsMember({"sequential", "replicate", "stratified"}));
    part->add_option("--seed", part_seed, "permutation seed (replicate)");
    part->add_option("--out", part_out, "plan JSON path (default: stdout)");

    std::string synth_config, synth_out;
    auto* synth = app.add_subcommand("synth", "generate a synthetic CSV plus ground-truth sidecar");
    synth->add_option("--config", synth_config, "generator config JSON")->required();
    synth->add_option("--out", synth_out, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e); // prints the usage message
        return kExitUsage;
    }

    try {
        if (fit->parsed()) return cmd_fit(fit_args);
        if (cmp->parsed())
            return cmd_compare(cmp_args, tol_coef, tol_se, baseline, cmp_out, cmp_json);
        if (part->parsed())
            return cmd_partition(part_rows, part_subsets, part_division, part_seed, part_out);
        if (synth->parsed()) return cmd_synth(synth_config, synth_out);
    } catch (const drglm::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const drglm::CombineRejectedError& e) {
        emit_error_json(e.kind(), e.what(), {{"subsets", e.subsets}});
        return kExitFailure;
    } catch (const drglm::SingularDesignError& e) {
        emit_error_json(e.kind(), e.what(), {{"column", e.column}});
        return kExitFailure;
    } catch (const drglm::SingularInformationError& e) {
        emit_error_json(e.kind(), e.what(), {{"subset", e.subset_index}});
        return kExitFailure;
    } catch (const drglm::Error& e) {
        emit_error_json(e.kind(), e.what());
        return kExitFailure;
    } catch (const std::exception& e) {
        emit_error_json("Internal", e.what());
        return kExitFailure;
    }
    return kExitUsage;
}
