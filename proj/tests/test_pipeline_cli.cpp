#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "drglm/data_io.hpp"
#include "drglm/digest.hpp"
#include "drglm/errors.hpp"
#include "drglm/harness.hpp"
#include "drglm/pipeline.hpp"
#include "drglm/synth.hpp"
#include "test_support.hpp"

using namespace drglm;

namespace {

int run_cli(const std::string& args, const std::string& env = "") {
    const std::string cmd =
        (env.empty() ? "" : env + " ") + std::string(DRGLM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
}

// Mixed-type fixture: two numerics, one 3-level categorical, one binary.
void write_mixed_config(const std::string& path, const std::string& family, long n,
                        std::uint64_t seed, const std::vector<double>& beta) {
    nlohmann::json j;
    j["n"] = n;
    j["seed"] = seed;
    j["family"] = family;
    if (family == "multinomial-logit") j["num_categories"] = 4;
    j["noise_sd"] = 1.0;
    j["predictors"] = {
        {{"name", "x1"}, {"kind", "numeric"}, {"mean", 0.0}, {"sd", 1.0}},
        {{"name", "x2"}, {"kind", "numeric"}, {"mean", 0.5}, {"sd", 1.0}},
        {{"name", "c1"},
         {"kind", "categorical"},
         {"levels", {"a", "b", "c"}},
         {"probs", {0.4, 0.35, 0.25}}},
        {{"name", "s1"}, {"kind", "categorical"}, {"levels", {"0", "1"}}, {"probs", {0.5, 0.5}}},
    };
    j["beta"] = beta;
    write_text(path, j.dump());
}

void write_mixed_spec(const std::string& path, const std::string& family) {
    nlohmann::json j;
    j["response"] = "y";
    j["predictors"] = {"x1", "x2", "c1", "s1"};
    j["family"] = family;
    j["types"] = {{"c1", "categorical"}, {"s1", "binary"}};
    write_text(path, j.dump());
}

// Result JSON with volatile fields (manifest path) removed.
nlohmann::json stable_result(const std::string& path) {
    nlohmann::json j = nlohmann::json::parse(slurp(path));
    j.erase("manifest_ref");
    return j;
}

} // namespace

TEST_CASE("pipeline output is identical at any thread count") {
    const auto dir = testsup::temp_dir("pipe_threads");
    write_mixed_config(dir + "/cfg.json", "binomial-logit", 3000, 17,
                       {0.2, 0.5, -0.4, 0.3, -0.2, 0.6});
    generate_synthetic(SynthConfig::load(dir + "/cfg.json"), dir + "/d.csv");

    FitOptions opt;
    opt.data_path = dir + "/d.csv";
    write_mixed_spec(dir + "/spec.json", "binomial-logit");
    opt.spec = ModelSpec::load(dir + "/spec.json");
    opt.subsets = 6;
    opt.chunk_rows = 128;

    opt.threads = 1;
    const CombinedFit a = run_fit(opt).fit;
    opt.threads = 4;
    const CombinedFit b = run_fit(opt).fit;
    CHECK(a.beta == b.beta);
    CHECK(a.se == b.se);
    CHECK(a.stat == b.stat);
    CHECK(a.p_value == b.p_value);
    CHECK(a.ci_low == b.ci_low);
    CHECK(a.ci_high == b.ci_high);
}

TEST_CASE("pipeline chunk size does not change results") {
    const auto dir = testsup::temp_dir("pipe_chunks");
    write_mixed_config(dir + "/cfg.json", "poisson-log", 2000, 23,
                       {0.1, 0.3, -0.2, 0.25, -0.15, 0.2});
    generate_synthetic(SynthConfig::load(dir + "/cfg.json"), dir + "/d.csv");
    write_mixed_spec(dir + "/spec.json", "poisson-log");

    FitOptions opt;
    opt.data_path = dir + "/d.csv";
    opt.spec = ModelSpec::load(dir + "/spec.json");
    opt.subsets = 4;

    opt.chunk_rows = 7;
    const CombinedFit small = run_fit(opt).fit;
    opt.chunk_rows = 100000;
    const CombinedFit large = run_fit(opt).fit;
    CHECK(small.beta == large.beta);
    CHECK(small.se == large.se);
}

TEST_CASE("stratified division fits one subset per level") {
    const auto dir = testsup::temp_dir("pipe_strat");
    write_mixed_config(dir + "/cfg.json", "gaussian-identity", 900, 31,
                       {0.5, 0.4, -0.3, 0.2, -0.1, 0.3});
    generate_synthetic(SynthConfig::load(dir + "/cfg.json"), dir + "/d.csv");
    write_mixed_spec(dir + "/spec.json", "gaussian-identity");

    FitOptions opt;
    opt.data_path = dir + "/d.csv";
    opt.spec = ModelSpec::load(dir + "/spec.json");
    opt.division = DivisionStrategy::stratified;
    opt.strat_column = "c1";
    // Stratifying on a predictor makes its dummy columns constant within
    // subsets, so fit on a reduced model instead.
    nlohmann::json j;
    j["response"] = "y";
    j["predictors"] = {"x1", "x2", "s1"};
    j["family"] = "gaussian-identity";
    j["types"] = {{"s1", "binary"}};
    opt.spec = ModelSpec::from_json(j);

    const FitOutcome outcome = run_fit(opt);
    CHECK(outcome.manifest.plan.num_subsets == 3);
    CHECK(outcome.fit.S == 3);
    const CombinedFit full = fit_full(dir + "/d.csv", opt.spec);
    CHECK((outcome.fit.beta - full.beta).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("run_fit surfaces subset errors with the failing subset first") {
    // Subset 2 of 3 carries a constant duplicate of the intercept through
    // a pathological stratified-like column; simplest trigger: poisson
    // response overflow in one subset via a huge numeric predictor value.
    const auto dir = testsup::temp_dir("pipe_err");
    std::ofstream out(dir + "/d.csv");
    out << "y,x1\n";
    for (int i = 0; i < 30; ++i) {
        const bool mid = i >= 10 && i < 20;
        out << (i % 3) << "," << (mid ? 1000.0 : 0.1 * i) << "\n";
    }
    out.close();
    nlohmann::json j;
    j["response"] = "y";
    j["predictors"] = {"x1"};
    j["family"] = "poisson-log";
    FitOptions opt;
    opt.data_path = dir + "/d.csv";
    opt.spec = ModelSpec::from_json(j);
    opt.subsets = 3;
    CHECK_THROWS_AS(run_fit(opt), Error);
}

TEST_CASE("manifest records plan, subsets and digests") {
    const auto dir = testsup::temp_dir("pipe_manifest");
    write_mixed_config(dir + "/cfg.json", "gaussian-identity", 500, 3,
                       {0.5, 0.4, -0.3, 0.2, -0.1, 0.3});
    generate_synthetic(SynthConfig::load(dir + "/cfg.json"), dir + "/d.csv");
    write_mixed_spec(dir + "/spec.json", "gaussian-identity");

    FitOptions opt;
    opt.data_path = dir + "/d.csv";
    opt.spec = ModelSpec::load(dir + "/spec.json");
    opt.subsets = 5;
    const FitOutcome outcome = run_fit(opt);
    const nlohmann::json m = outcome.manifest.to_json();
    CHECK(m["input"]["fnv1a64"] == to_hex(fnv1a64_file(dir + "/d.csv")));
    CHECK(m["plan"]["S"] == 5);
    CHECK(m["subsets"].size() == 5);
    // Every subset index appears exactly once, 1..S.
    std::vector<int> indices;
    for (const auto& s : m["subsets"]) indices.push_back(s["index"].get<int>());
    CHECK(indices == std::vector<int>{1, 2, 3, 4, 5});
    CHECK(m["tool_version"] == "0.1.0");
}

TEST_CASE("exact gaussian variance option reproduces the classical covariance") {
    const auto dir = testsup::temp_dir("pipe_exact_var");
    write_mixed_config(dir + "/cfg.json", "gaussian-identity", 2000, 19,
                       {0.5, 0.4, -0.3, 0.2, -0.1, 0.3});
    generate_synthetic(SynthConfig::load(dir + "/cfg.json"), dir + "/d.csv");
    write_mixed_spec(dir + "/spec.json", "gaussian-identity");

    FitOptions opt;
    opt.data_path = dir + "/d.csv";
    opt.spec = ModelSpec::load(dir + "/spec.json");
    opt.subsets = 8;
    opt.exact_gaussian_variance = true;
    const CombinedFit exact = run_fit(opt).fit;
    const CombinedFit full = fit_full(dir + "/d.csv", opt.spec);
    // The pooled Gram is the full Gram, so the exact variant matches the
    // classical single-fit covariance far beyond the aggregated scheme.
    CHECK((exact.se - full.se).lpNorm<Eigen::Infinity>() / full.se.lpNorm<Eigen::Infinity>() <
          1e-10);

    opt.exact_gaussian_variance = false;
    const CombinedFit aggregated = run_fit(opt).fit;
    CHECK(aggregated.beta == exact.beta); // estimates identical either way
    CHECK(aggregated.se != exact.se);     // variances differ by scheme
}

TEST_CASE("schema cache short-circuits the scan") {
    const auto dir = testsup::temp_dir("pipe_cache");
    write_mixed_config(dir + "/cfg.json", "gaussian-identity", 300, 5,
                       {0.5, 0.4, -0.3, 0.2, -0.1, 0.3});
    generate_synthetic(SynthConfig::load(dir + "/cfg.json"), dir + "/d.csv");
    write_mixed_spec(dir + "/spec.json", "gaussian-identity");

    FitOptions opt;
    opt.data_path = dir + "/d.csv";
    opt.spec = ModelSpec::load(dir + "/spec.json");
    opt.schema_cache = dir + "/schema.json";
    const CombinedFit first = run_fit(opt).fit;  // writes the cache
    CHECK(std::ifstream(dir + "/schema.json").good());
    const CombinedFit second = run_fit(opt).fit; // reads it back
    CHECK(first.beta == second.beta);
}

// ---------------------------------------------------------------------------
// CLI golden tests

TEST_CASE("cli fit: --method full equals --method dr --subsets 1 byte for byte") {
    const auto dir = testsup::temp_dir("cli_s1");
    write_mixed_config(dir + "/cfg.json", "binomial-logit", 800, 29,
                       {0.2, 0.5, -0.4, 0.3, -0.2, 0.6});
    REQUIRE(run_cli("synth --config " + dir + "/cfg.json --out " + dir + "/d.csv") == 0);
    write_mixed_spec(dir + "/spec.json", "binomial-logit");

    REQUIRE(run_cli("fit --data " + dir + "/d.csv --spec " + dir + "/spec.json --method full --out " +
                    dir + "/full.json") == 0);
    REQUIRE(run_cli("fit --data " + dir + "/d.csv --spec " + dir +
                    "/spec.json --method dr --subsets 1 --out " + dir + "/dr1.json") == 0);
    CHECK(stable_result(dir + "/full.json") == stable_result(dir + "/dr1.json"));
}

TEST_CASE("cli fit emits schema-stable result JSON") {
    const auto dir = testsup::temp_dir("cli_schema");
    write_mixed_config(dir + "/cfg.json", "gaussian-identity", 400, 3,
                       {0.5, 0.4, -0.3, 0.2, -0.1, 0.3});
    REQUIRE(run_cli("synth --config " + dir + "/cfg.json --out " + dir + "/d.csv") == 0);
    write_mixed_spec(dir + "/spec.json", "gaussian-identity");
    REQUIRE(run_cli("fit --data " + dir + "/d.csv --spec " + dir +
                    "/spec.json --subsets 4 --out " + dir + "/r.json") == 0);

    const nlohmann::json j = nlohmann::json::parse(slurp(dir + "/r.json"));
    for (const auto& key : {"family", "method", "S", "n", "df", "converged", "manifest_ref",
                            "coefficients"})
        CHECK_MESSAGE(j.contains(key), "missing key ", key);
    CHECK(j["family"] == "gaussian-identity");
    CHECK(j["method"] == "gram-sum");
    CHECK(j["S"] == 4);
    CHECK(j["n"] == 400);
    for (const auto& c : j["coefficients"])
        for (const auto& key : {"label", "estimate", "se", "stat", "p", "ci_low", "ci_high"})
            CHECK(c.contains(key));

    // Round trip through the parser is lossless.
    const CombinedFit parsed = result_from_json(j);
    const nlohmann::json again = result_to_json(parsed, j["manifest_ref"]);
    CHECK(again == j);

    // Manifest written next to the result.
    const nlohmann::json m = nlohmann::json::parse(slurp(dir + "/r.json.manifest.json"));
    CHECK(m.contains("timing_ms"));

    // Rerunning with a different thread count reproduces the result JSON
    // (manifest_ref aside, which embeds the differing --out path).
    REQUIRE(run_cli("fit --data " + dir + "/d.csv --spec " + dir +
                    "/spec.json --subsets 4 --threads 3 --out " + dir + "/r2.json") == 0);
    CHECK(stable_result(dir + "/r.json") == stable_result(dir + "/r2.json"));
    // Same flags and same --out: byte identical.
    REQUIRE(run_cli("fit --data " + dir + "/d.csv --spec " + dir +
                    "/spec.json --subsets 4 --threads 1 --out " + dir + "/r3.json") == 0);
    const std::string first = slurp(dir + "/r3.json");
    REQUIRE(run_cli("fit --data " + dir + "/d.csv --spec " + dir +
                    "/spec.json --subsets 4 --threads 2 --out " + dir + "/r3.json") == 0);
    CHECK(first == slurp(dir + "/r3.json"));
    // DR_GLM_THREADS supplies the default thread count.
    REQUIRE(run_cli("fit --data " + dir + "/d.csv --spec " + dir +
                        "/spec.json --subsets 4 --out " + dir + "/r3.json",
                    "DR_GLM_THREADS=2") == 0);
    CHECK(first == slurp(dir + "/r3.json"));
}

TEST_CASE("cli exit codes: usage, tolerance, success") {
    const auto dir = testsup::temp_dir("cli_exit");
    write_mixed_config(dir + "/cfg.json", "gaussian-identity", 600, 11,
                       {0.5, 0.4, -0.3, 0.2, -0.1, 0.3});
    REQUIRE(run_cli("synth --config " + dir + "/cfg.json --out " + dir + "/d.csv") == 0);
    write_mixed_spec(dir + "/spec.json", "gaussian-identity");

    // Usage errors -> 2.
    CHECK(run_cli("fit --data " + dir + "/d.csv --spec " + dir +
                  "/spec.json --subsets 0 --out " + dir + "/x.json") == 2);
    CHECK(run_cli("compare --spec " + dir + "/spec.json") == 2); // missing --data
    CHECK(run_cli("fit --data " + dir + "/d.csv --spec " + dir +
                  "/spec.json --division replicate --out " + dir + "/x.json") == 2); // no seed
    CHECK(run_cli("partition --rows 10 --subsets 3 --division replicate") == 2);     // no seed
    CHECK(run_cli("partition --rows 10 --subsets 3 --division stratified") == 2);    // needs data

    // Gaussian identity passes a tight coefficient tolerance -> 0.
    CHECK(run_cli("compare --data " + dir + "/d.csv --spec " + dir +
                  "/spec.json --subsets 6 --tol-coef 1e-8 --tol-se 0.05") == 0);

    // Impossible tolerance -> 1.
    CHECK(run_cli("compare --data " + dir + "/d.csv --spec " + dir +
                  "/spec.json --subsets 6 --tol-coef 1e-18 --tol-se 1e-18") == 1);
}

TEST_CASE("cli compare on a logistic fixture fails only at an impossible tolerance") {
    const auto dir = testsup::temp_dir("cli_cmp_logit");
    write_mixed_config(dir + "/cfg.json", "binomial-logit", 2000, 13,
                       {0.2, 0.5, -0.4, 0.3, -0.2, 0.6});
    REQUIRE(run_cli("synth --config " + dir + "/cfg.json --out " + dir + "/d.csv") == 0);
    write_mixed_spec(dir + "/spec.json", "binomial-logit");
    CHECK(run_cli("compare --data " + dir + "/d.csv --spec " + dir +
                  "/spec.json --subsets 5 --tol-coef 0.05 --tol-se 0.10") == 0);
    // The approximate combiner cannot reproduce the full fit to 1e-15.
    CHECK(run_cli("compare --data " + dir + "/d.csv --spec " + dir +
                  "/spec.json --subsets 5 --tol-coef 1e-15 --tol-se 1e-15") == 1);
}

TEST_CASE("cli partition emits the plan JSON") {
    const auto dir = testsup::temp_dir("cli_part");
    REQUIRE(run_cli("partition --rows 10 --subsets 3 --division sequential --out " + dir +
                    "/plan.json") == 0);
    const nlohmann::json plan = nlohmann::json::parse(slurp(dir + "/plan.json"));
    CHECK(plan["ranges"] == nlohmann::json({{0, 4}, {4, 7}, {7, 10}}));

    REQUIRE(run_cli("partition --rows 5000000 --subsets 10 --division sequential --out " + dir +
                    "/plan5m.json") == 0);
    const nlohmann::json plan5m = nlohmann::json::parse(slurp(dir + "/plan5m.json"));
    for (const auto& range : plan5m["ranges"])
        CHECK(range[1].get<long>() - range[0].get<long>() == 500000);

    REQUIRE(run_cli("partition --rows 100 --subsets 4 --division replicate --seed 9 --out " + dir +
                    "/planr.json") == 0);
    const nlohmann::json planr = nlohmann::json::parse(slurp(dir + "/planr.json"));
    CHECK(planr["seed"] == 9);
    CHECK(planr.contains("permutation_fnv1a64"));
}

TEST_CASE("cli synth is deterministic and validates configs") {
    const auto dir = testsup::temp_dir("cli_synth");
    write_mixed_config(dir + "/cfg.json", "poisson-log", 200, 77,
                       {0.1, 0.3, -0.2, 0.25, -0.15, 0.2});
    REQUIRE(run_cli("synth --config " + dir + "/cfg.json --out " + dir + "/a.csv") == 0);
    REQUIRE(run_cli("synth --config " + dir + "/cfg.json --out " + dir + "/b.csv") == 0);
    CHECK(slurp(dir + "/a.csv") == slurp(dir + "/b.csv"));

    write_text(dir + "/bad.json", R"({"n":0,"seed":1,"family":"gaussian-identity",
                                      "predictors":[],"beta":[0.0]})");
    CHECK(run_cli("synth --config " + dir + "/bad.json --out " + dir + "/c.csv") == 1);
}

TEST_CASE("cli fit writes machine-readable error JSON on failure") {
    const auto dir = testsup::temp_dir("cli_err");
    // Constant predictor duplicates the intercept -> SingularDesign.
    std::ofstream out(dir + "/d.csv");
    out << "y,x1\n";
    for (int i = 0; i < 10; ++i) out << i << ".0,1\n";
    out.close();
    nlohmann::json j;
    j["response"] = "y";
    j["predictors"] = {"x1"};
    j["family"] = "gaussian-identity";
    write_text(dir + "/spec.json", j.dump());

    const std::string cmd = std::string(DRGLM_CLI_PATH) + " fit --data " + dir +
                            "/d.csv --spec " + dir + "/spec.json --out " + dir +
                            "/r.json > " + dir + "/stdout.json 2>/dev/null";
    const int status = WEXITSTATUS(std::system(cmd.c_str()));
    CHECK(status == 1);
    const nlohmann::json err = nlohmann::json::parse(slurp(dir + "/stdout.json"));
    CHECK(err["error"]["type"] == "SingularDesign");
    CHECK(err["error"]["column"] == 1);
}

TEST_CASE("cleveland-style synthetic config reproduces the dataset header") {
    // 14 columns, mixed types, named like the public Cleveland synthetic
    // dataset.
    const std::string fixture = std::string(DRGLM_FIXTURE_DIR) + "/cleveland_like_synth.json";
    const auto dir = testsup::temp_dir("cli_cleveland");
    REQUIRE(run_cli("synth --config " + fixture + " --out " + dir + "/c.csv") == 0);
    std::ifstream in(dir + "/c.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "Age,Sex,Chest_Pain_Type,Resting_Blood_Pressure,Fasting_Blood_Sugar,Resting_ECG,"
          "Max_Heart_Rate_Achieved,Exercise_Induced_Angina,ST_Depression_Exercise,"
          "Peak_Exercise_ST_Segment,Num_Major_Vessles_Flouro,Thalassemia,"
          "Diagonosis_Heart_Disease,Serum_cholesterol");

    // The shipped model spec fits the linear model on this fixture.
    const std::string spec = std::string(DRGLM_FIXTURE_DIR) + "/cleveland_linear_spec.json";
    CHECK(run_cli("fit --data " + dir + "/c.csv --spec " + spec + " --subsets 4 --out " + dir +
                  "/r.json") == 0);
    const nlohmann::json r = nlohmann::json::parse(slurp(dir + "/r.json"));
    CHECK(r["coefficients"].size() == 19);
}
