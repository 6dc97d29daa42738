#include "drglm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "drglm/data_io.hpp"
#include "drglm/errors.hpp"
#include "drglm/pipeline.hpp"

namespace drglm {

namespace {

constexpr double kRelEps = 1e-12;
constexpr double kPZero = 1e-8; // p-values below this are reported as equal

double rel_diff(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), kRelEps); }

void check_labels(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a == b) return;
    std::set<std::string> sa(a.begin(), a.end());
    std::set<std::string> sb(b.begin(), b.end());
    std::string only_a, only_b;
    for (const auto& s : sa)
        if (!sb.count(s)) only_a += " " + s;
    for (const auto& s : sb)
        if (!sa.count(s)) only_b += " " + s;
    if (only_a.empty() && only_b.empty())
        throw ConfigError("coefficient labels agree as sets but differ in order");
    throw ConfigError("coefficient labels differ; only in left:" +
                      (only_a.empty() ? " (none)" : only_a) + "; only in right:" +
                      (only_b.empty() ? " (none)" : only_b));
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

} // namespace

CombinedFit fit_full(const std::string& csv_path, const ModelSpec& spec) {
    FitOptions opt;
    opt.data_path = csv_path;
    opt.spec = spec;
    opt.subsets = 1;
    opt.division = DivisionStrategy::sequential;
    return run_fit(opt).fit;
}

namespace {

ComparisonReport build_report(const CombinedFit& dr, const std::vector<std::string>& full_labels,
                              const std::vector<double>& full_est, const std::vector<double>& full_se,
                              const CombinedFit* full, const CompareTolerances& tol) {
    std::vector<std::string> dr_labels = dr.labels;
    check_labels(dr_labels, full_labels);

    ComparisonReport report;
    report.tolerances = tol;
    for (Eigen::Index k = 0; k < dr.beta.size(); ++k) {
        const auto ku = static_cast<std::size_t>(k);
        ComparisonRow row;
        row.label = dr_labels[ku];
        row.dr_estimate = dr.beta[k];
        row.full_estimate = full_est[ku];
        row.abs_diff = std::fabs(row.dr_estimate - row.full_estimate);
        row.rel_diff = rel_diff(row.dr_estimate, row.full_estimate);
        row.dr_se = dr.se[k];
        row.full_se = full_se[ku];
        row.se_rel_diff = rel_diff(row.dr_se, row.full_se);
        row.dr_stat = dr.stat[k];
        row.dr_p = dr.p_value[k];
        row.dr_ci_low = dr.ci_low[k];
        row.dr_ci_high = dr.ci_high[k];
        if (full) {
            row.full_stat = full->stat[k];
            row.full_p = full->p_value[k];
            row.full_ci_low = full->ci_low[k];
            row.full_ci_high = full->ci_high[k];
            row.p_equal = (row.dr_p < kPZero && row.full_p < kPZero) || row.dr_p == row.full_p;
        } else {
            row.has_inference = false;
        }
        report.max_abs_diff = std::max(report.max_abs_diff, row.abs_diff);
        report.max_rel_diff = std::max(report.max_rel_diff, row.rel_diff);
        report.max_se_rel_diff = std::max(report.max_se_rel_diff, row.se_rel_diff);
        report.rows.push_back(std::move(row));
    }
    report.pass = report.max_rel_diff <= tol.tol_coef && report.max_se_rel_diff <= tol.tol_se;
    return report;
}

} // namespace

ComparisonReport compare_fits(const CombinedFit& dr, const CombinedFit& full,
                              const CompareTolerances& tolerances) {
    if (dr.beta.size() != full.beta.size())
        check_labels(dr.labels, full.labels); // throws with the symmetric difference
    std::vector<double> est(full.beta.data(), full.beta.data() + full.beta.size());
    std::vector<double> se(full.se.data(), full.se.data() + full.se.size());
    return build_report(dr, full.labels, est, se, &full, tolerances);
}

ComparisonReport compare_to_baseline(const CombinedFit& dr, const std::vector<BaselineRow>& baseline,
                                     const CompareTolerances& tolerances) {
    std::vector<std::string> labels;
    std::vector<double> est, se;
    for (const auto& row : baseline) {
        labels.push_back(row.label);
        est.push_back(row.estimate);
        se.push_back(row.se);
    }
    return build_report(dr, labels, est, se, nullptr, tolerances);
}

std::vector<BaselineRow> load_baseline_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open baseline '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("baseline '" + path + "' is empty");
    std::vector<BaselineRow> rows;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        BaselineRow row;
        std::string est, se;
        if (!std::getline(ss, row.label, ',') || !std::getline(ss, est, ',') || !std::getline(ss, se))
            throw DataError("baseline '" + path + "' line " + std::to_string(lineno) +
                            ": expected label,estimate,se");
        try {
            row.estimate = std::stod(est);
            row.se = std::stod(se);
        } catch (const std::exception&) {
            throw DataError("baseline '" + path + "' line " + std::to_string(lineno) +
                            ": non-numeric estimate or se");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("baseline '" + path + "' has no rows");
    return rows;
}

std::string ComparisonReport::render_text() const {
    // Aligned plain-text table; widths fitted to the content.
    const std::vector<std::string> headers = {"label",   "dr_est",  "full_est", "abs_diff",
                                              "rel_diff", "dr_se",   "full_se",  "se_rel_diff",
                                              "dr_stat",  "dr_p"};
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows) {
        cells.push_back({r.label, fmt(r.dr_estimate), fmt(r.full_estimate), fmt(r.abs_diff),
                         fmt(r.rel_diff), fmt(r.dr_se), fmt(r.full_se), fmt(r.se_rel_diff),
                         fmt(r.dr_stat), fmt(r.dr_p)});
    }
    std::vector<std::size_t> width(headers.size());
    for (std::size_t c = 0; c < headers.size(); ++c) {
        width[c] = headers[c].size();
        for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
    }
    std::string out;
    auto emit_row = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out += row[c];
            out.append(width[c] - row[c].size() + 2, ' ');
        }
        out += '\n';
    };
    emit_row(headers);
    for (const auto& row : cells) emit_row(row);
    out += "max_abs_diff=" + fmt(max_abs_diff) + "  max_rel_diff=" + fmt(max_rel_diff) +
           "  max_se_rel_diff=" + fmt(max_se_rel_diff) + "\n";
    out += std::string("verdict: ") + (pass ? "PASS" : "FAIL") +
           " (tol_coef=" + fmt(tolerances.tol_coef) + ", tol_se=" + fmt(tolerances.tol_se) + ")\n";
    out += "legend: rel_diff = |a-b|/max(|b|,1e-12); p-values below 1e-8 are reported as equal\n";
    return out;
}

nlohmann::json ComparisonReport::to_json() const {
    nlohmann::json j;
    nlohmann::json jrows = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json jr;
        jr["label"] = r.label;
        jr["dr_estimate"] = r.dr_estimate;
        jr["full_estimate"] = r.full_estimate;
        jr["abs_diff"] = r.abs_diff;
        jr["rel_diff"] = r.rel_diff;
        jr["dr_se"] = r.dr_se;
        jr["full_se"] = r.full_se;
        jr["se_rel_diff"] = r.se_rel_diff;
        jr["dr_stat"] = r.dr_stat;
        jr["dr_p"] = r.dr_p;
        jr["dr_ci"] = {r.dr_ci_low, r.dr_ci_high};
        if (r.has_inference) {
            jr["full_stat"] = r.full_stat;
            jr["full_p"] = r.full_p;
            jr["full_ci"] = {r.full_ci_low, r.full_ci_high};
            jr["p_equal"] = r.p_equal;
        }
        jrows.push_back(std::move(jr));
    }
    j["rows"] = std::move(jrows);
    j["max_abs_diff"] = max_abs_diff;
    j["max_rel_diff"] = max_rel_diff;
    j["max_se_rel_diff"] = max_se_rel_diff;
    j["tol_coef"] = tolerances.tol_coef;
    j["tol_se"] = tolerances.tol_se;
    j["pass"] = pass;
    j["legend"] = "rel_diff = |a-b|/max(|b|,1e-12); p-values below 1e-8 are reported as equal";
    return j;
}

} // namespace drglm
