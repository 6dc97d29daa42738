#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "drglm/recombine.hpp"

namespace drglm {

struct ModelSpec;

// Full-data baseline: the engine run with a single-subset plan, so every
// divided run can be checked against the classical fit.
CombinedFit fit_full(const std::string& csv_path, const ModelSpec& spec);

struct CompareTolerances {
    double tol_coef = 1e-2; // gate on coefficient rel_diff
    double tol_se = 5e-2;   // gate on SE rel_diff
};

struct ComparisonRow {
    std::string label;
    double dr_estimate = 0, full_estimate = 0;
    double abs_diff = 0, rel_diff = 0;
    double dr_se = 0, full_se = 0, se_rel_diff = 0;
    double dr_stat = 0, full_stat = 0;
    double dr_p = 0, full_p = 0;
    double dr_ci_low = 0, dr_ci_high = 0, full_ci_low = 0, full_ci_high = 0;
    bool p_equal = false; // both below 1e-8, or equal to report precision
    bool has_inference = true;
};

// Side-by-side diff of two fits over identical coefficient labels.
// rel_diff = |a - b| / max(|b|, 1e-12); p-values below 1e-8 on both sides
// count as equal (printed in the report legend).
struct ComparisonReport {
    std::vector<ComparisonRow> rows;
    double max_abs_diff = 0;
    double max_rel_diff = 0;
    double max_se_rel_diff = 0;
    CompareTolerances tolerances;
    bool pass = false;

    std::string render_text() const;
    nlohmann::json to_json() const;
};

ComparisonReport compare_fits(const CombinedFit& dr, const CombinedFit& full,
                              const CompareTolerances& tolerances);

// External baseline ingest: CSV with header label,estimate,se. Rows must
// cover exactly the fitted coefficient labels.
struct BaselineRow {
    std::string label;
    double estimate = 0;
    double se = 0;
};

std::vector<BaselineRow> load_baseline_csv(const std::string& path);

ComparisonReport compare_to_baseline(const CombinedFit& dr, const std::vector<BaselineRow>& baseline,
                                     const CompareTolerances& tolerances);

} // namespace drglm
