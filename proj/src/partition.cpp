#include "drglm/partition.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include <json.hpp>

#include "drglm/digest.hpp"
#include "drglm/errors.hpp"
#include "drglm/rng.hpp"

namespace drglm {

std::string division_name(DivisionStrategy s) {
    switch (s) {
        case DivisionStrategy::sequential: return "sequential";
        case DivisionStrategy::replicate: return "replicate";
        case DivisionStrategy::stratified: return "stratified";
    }
    return "?";
}

DivisionStrategy parse_division(const std::string& name) {
    if (name == "sequential") return DivisionStrategy::sequential;
    if (name == "replicate") return DivisionStrategy::replicate;
    if (name == "stratified") return DivisionStrategy::stratified;
    throw UsageError("unknown division strategy '" + name + "'");
}

namespace {

// Size profile shared by sequential and replicate plans: the first
// n mod S subsets take floor(n/S) + 1 rows.
std::vector<long> size_profile(long n, int S) {
    if (S < 1) throw UsageError("number of subsets must be >= 1");
    if (n < S) throw UsageError("cannot split " + std::to_string(n) + " rows into " +
                                std::to_string(S) + " nonempty subsets");
    const long base = n / S;
    const long extra = n % S;
    std::vector<long> sizes(static_cast<std::size_t>(S), base);
    for (long k = 0; k < extra; ++k) sizes[static_cast<std::size_t>(k)] += 1;
    return sizes;
}

std::vector<std::pair<long, long>> ranges_from_sizes(const std::vector<long>& sizes) {
    std::vector<std::pair<long, long>> ranges;
    ranges.reserve(sizes.size());
    long offset = 0;
    for (long sz : sizes) {
        ranges.emplace_back(offset, offset + sz);
        offset += sz;
    }
    return ranges;
}

} // namespace

std::vector<long> PartitionPlan::subset_row_indices(int subset) const {
    const auto [lo, hi] = ranges.at(static_cast<std::size_t>(subset));
    std::vector<long> rows;
    rows.reserve(static_cast<std::size_t>(hi - lo));
    if (permutation.empty()) {
        for (long r = lo; r < hi; ++r) rows.push_back(r);
    } else {
        for (long k = lo; k < hi; ++k) rows.push_back(permutation[static_cast<std::size_t>(k)]);
    }
    return rows;
}

std::vector<int> PartitionPlan::subset_of_row() const {
    std::vector<int> owner(static_cast<std::size_t>(total_rows), -1);
    for (int s = 0; s < num_subsets; ++s) {
        const auto [lo, hi] = ranges[static_cast<std::size_t>(s)];
        for (long k = lo; k < hi; ++k) {
            const long row = permutation.empty() ? k : permutation[static_cast<std::size_t>(k)];
            owner[static_cast<std::size_t>(row)] = s;
        }
    }
    return owner;
}

nlohmann::json PartitionPlan::to_json() const {
    nlohmann::json j;
    j["n"] = total_rows;
    j["S"] = num_subsets;
    j["strategy"] = division_name(strategy);
    if (strategy == DivisionStrategy::replicate) j["seed"] = seed;
    if (strategy == DivisionStrategy::stratified) j["column"] = strat_column;
    nlohmann::json ranges_json = nlohmann::json::array();
    for (const auto& [lo, hi] : ranges) ranges_json.push_back({lo, hi});
    j["ranges"] = std::move(ranges_json);
    if (!permutation.empty()) {
        std::string bytes(reinterpret_cast<const char*>(permutation.data()),
                          permutation.size() * sizeof(long));
        j["permutation_fnv1a64"] = to_hex(fnv1a64(bytes));
    }
    if (!warnings.empty()) j["warnings"] = warnings;
    return j;
}

PartitionPlan sequential_plan(long n, int S) {
    PartitionPlan plan;
    plan.total_rows = n;
    plan.num_subsets = S;
    plan.strategy = DivisionStrategy::sequential;
    plan.ranges = ranges_from_sizes(size_profile(n, S));
    return plan;
}

PartitionPlan replicate_plan(long n, int S, std::uint64_t seed) {
    PartitionPlan plan;
    plan.total_rows = n;
    plan.num_subsets = S;
    plan.strategy = DivisionStrategy::replicate;
    plan.seed = seed;
    plan.ranges = ranges_from_sizes(size_profile(n, S));
    plan.permutation.resize(static_cast<std::size_t>(n));
    std::iota(plan.permutation.begin(), plan.permutation.end(), 0L);
    seeded_shuffle(plan.permutation, seed);
    return plan;
}

PartitionPlan stratified_plan(const std::vector<std::string>& column_values, long max_subset_rows,
                              long min_rows_warn) {
    const long n = static_cast<long>(column_values.size());
    if (n < 1) throw UsageError("stratified_plan: conditioning column is empty");
    if (max_subset_rows < 1) throw UsageError("stratified_plan: max_subset_rows must be >= 1");

    // Group rows by level, levels in lexicographic byte order (std::map).
    std::map<std::string, std::vector<long>> groups;
    for (long i = 0; i < n; ++i) groups[column_values[static_cast<std::size_t>(i)]].push_back(i);

    PartitionPlan plan;
    plan.total_rows = n;
    plan.strategy = DivisionStrategy::stratified;
    plan.permutation.reserve(static_cast<std::size_t>(n));
    for (const auto& [level, rows] : groups) {
        const long level_rows = static_cast<long>(rows.size());
        const int pieces = static_cast<int>((level_rows + max_subset_rows - 1) / max_subset_rows);
        const auto sizes = size_profile(level_rows, pieces);
        long consumed = 0;
        for (long sz : sizes) {
            const long start = static_cast<long>(plan.permutation.size());
            plan.ranges.emplace_back(start, start + sz);
            for (long k = 0; k < sz; ++k)
                plan.permutation.push_back(rows[static_cast<std::size_t>(consumed + k)]);
            consumed += sz;
            if (min_rows_warn > 0 && sz < min_rows_warn)
                plan.warnings.push_back("subset " + std::to_string(plan.ranges.size()) +
                                        " (level '" + level + "') has " + std::to_string(sz) +
                                        " rows, fewer than " + std::to_string(min_rows_warn));
        }
    }
    plan.num_subsets = static_cast<int>(plan.ranges.size());
    return plan;
}

} // namespace drglm
