#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "drglm/data_io.hpp"
#include "drglm/fit.hpp"
#include "drglm/partition.hpp"
#include "drglm/recombine.hpp"

namespace drglm {

struct FitOptions {
    std::string data_path;
    ModelSpec spec;
    int subsets = 1;
    DivisionStrategy division = DivisionStrategy::sequential;
    std::optional<std::uint64_t> seed; // required for replicate
    std::string strat_column;          // required for stratified
    long chunk_rows = 65536;
    int threads = 0;                   // 0 = DR_GLM_THREADS env or hardware
    bool exact_gaussian_variance = false;
    std::optional<std::string> schema_cache;
    FitConfig fit_config;
};

struct SubsetRecord {
    int index = 0;
    long rows = 0;
    bool converged = false;
    int iterations = 0;
    double final_gradient_norm = 0.0;
    double fit_ms = 0.0;
};

// Observability record for one run; timing fields are best-effort and
// excluded from determinism guarantees.
struct RunManifest {
    std::string tool_version;
    std::string input_path;
    std::uintmax_t input_bytes = 0;
    std::string input_digest;
    std::string model_digest;
    PartitionPlan plan;
    std::vector<SubsetRecord> subsets;
    double scan_ms = 0.0;
    double fit_total_ms = 0.0;
    double recombine_ms = 0.0;
    long peak_chunk_rows = 0;
    int threads = 1;

    nlohmann::json to_json() const;
};

struct FitOutcome {
    CombinedFit fit;
    RunManifest manifest;
};

// Full engine run: scan (or cached schema) -> plan -> parallel subset
// fits -> recombine -> Wald inference. Deterministic for fixed inputs at
// any thread count.
FitOutcome run_fit(const FitOptions& options);

// Result JSON (schema-stable; no timing fields).
nlohmann::json result_to_json(const CombinedFit& fit, const std::string& manifest_ref);
CombinedFit result_from_json(const nlohmann::json& j);

int default_threads();

} // namespace drglm
