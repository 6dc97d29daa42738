#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace drglm {

enum class DivisionStrategy { sequential, replicate, stratified };

std::string division_name(DivisionStrategy s);
DivisionStrategy parse_division(const std::string& name);

// Deterministic assignment of the n file rows to S subsets. Sequential
// plans are contiguous half-open ranges over row indices; replicate and
// stratified plans carry an explicit permutation, with ranges indexing
// into it. Subset k owns permutation[ranges[k].first .. ranges[k].second).
struct PartitionPlan {
    long total_rows = 0;
    int num_subsets = 0;
    DivisionStrategy strategy = DivisionStrategy::sequential;
    std::uint64_t seed = 0;            // replicate only
    std::string strat_column;          // stratified only
    std::vector<std::pair<long, long>> ranges;
    std::vector<long> permutation;     // empty for sequential
    std::vector<std::string> warnings; // stratified small-level notes

    long subset_rows(int subset) const { return ranges[subset].second - ranges[subset].first; }

    // Row indices owned by a subset, in delivery order.
    std::vector<long> subset_row_indices(int subset) const;

    // subset index (0-based) per file row; inverse of the assignment.
    std::vector<int> subset_of_row() const;

    nlohmann::json to_json() const;
};

// Contiguous split into S subsets; the first (n mod S) subsets take one
// extra row so sizes differ by at most one.
PartitionPlan sequential_plan(long n, int S);

// Seeded random assignment without replacement: a SplitMix64-driven
// Fisher-Yates permutation of [0, n) cut into the sequential size profile.
PartitionPlan replicate_plan(long n, int S, std::uint64_t seed);

// One subset per distinct value of the conditioning column (levels in
// lexicographic order), each level split sequentially when it exceeds
// max_subset_rows. Subsets smaller than min_rows_warn are recorded as
// warnings in the plan.
PartitionPlan stratified_plan(const std::vector<std::string>& column_values, long max_subset_rows,
                              long min_rows_warn = 0);

} // namespace drglm
