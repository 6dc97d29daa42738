#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "drglm/families.hpp"
#include "drglm/partition.hpp"

namespace drglm {

enum class ColumnType { numeric, categorical, count, binary };

std::string column_type_name(ColumnType t);
ColumnType parse_column_type(const std::string& name);

struct SchemaColumn {
    std::string name;
    ColumnType type = ColumnType::numeric;
    std::vector<std::string> levels; // sorted distinct raw values; empty when capped
    bool numeric_parseable = false;
    bool levels_capped = false;
};

// Result of the schema scan: resolved column types, discovered factor
// levels and the exact data row count. All subsets are encoded against
// one Schema so their design matrices share a single column layout.
struct Schema {
    std::vector<SchemaColumn> columns;
    long row_count = 0;

    int index_of(const std::string& name) const; // -1 when absent
    const SchemaColumn& column(const std::string& name) const;
};

struct ModelSpec {
    std::string response;
    std::vector<std::string> predictors;
    FamilyKind family_kind = FamilyKind::gaussian_identity;
    bool intercept = true;
    std::map<std::string, std::string> reference_levels; // per categorical predictor
    double confidence = 0.95;
    std::map<std::string, ColumnType> types; // optional declarations

    static ModelSpec from_json(const nlohmann::json& j);
    static ModelSpec load(const std::string& path);
    nlohmann::json to_json() const;
};

// One streaming pass over the CSV: collects factor levels, validates
// declared types cell by cell, and counts rows. Declarations win over
// inference; undeclared columns become numeric when every cell parses as
// a real, categorical otherwise.
Schema scan_schema(const std::string& csv_path, const std::map<std::string, ColumnType>& declarations);

// ModelSpec/Schema consistency checks (names exist, response level counts
// per family, reference levels observed).
void validate_model(const Schema& schema, const ModelSpec& spec);

// Family for this model over this schema; resolves the multinomial
// category count from the response's observed levels.
Family resolve_family(const Schema& schema, const ModelSpec& spec);

// Column labels of the encoded design matrix, in encoding order.
std::vector<std::string> design_labels(const Schema& schema, const ModelSpec& spec);

// Coefficient labels (design labels, or category-prefixed blocks for
// multinomial models).
std::vector<std::string> coefficient_labels(const Schema& schema, const ModelSpec& spec);

struct EncodedChunk {
    DesignBlock design;
    ResponseBlock response;
};

// Dense encoding of raw CSV rows: intercept column of ones, numeric
// passthrough, and reference-level dummy coding ("<name><level>") for
// categorical predictors. Pure function of (rows, schema, spec).
EncodedChunk encode_chunk(const std::vector<std::vector<std::string>>& rows, const Schema& schema,
                          const ModelSpec& spec);

// Streams (subset, design, response) chunks for a partition plan in one
// forward pass over the file. Non-sequential plans route rows through
// per-subset buffers; a buffer is flushed as a chunk when it reaches
// chunk_rows, so at most chunk_rows rows per active subset are resident.
class SubsetStreamer {
public:
    struct Chunk {
        int subset_index = 0; // 1-based
        EncodedChunk data;
        bool last_for_subset = false;
    };

    SubsetStreamer(const std::string& csv_path, const PartitionPlan& plan, const Schema& schema,
                   const ModelSpec& spec, long chunk_rows);
    ~SubsetStreamer();
    SubsetStreamer(const SubsetStreamer&) = delete;
    SubsetStreamer& operator=(const SubsetStreamer&) = delete;

    std::optional<Chunk> next();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Single-column extraction (for stratified planning).
std::vector<std::string> read_column(const std::string& csv_path, const std::string& column_name);

// Schema sidecar cache, invalidated by file size or mtime change.
void save_schema_cache(const std::string& cache_path, const std::string& csv_path, const Schema& schema);
std::optional<Schema> load_schema_cache(const std::string& cache_path, const std::string& csv_path);

} // namespace drglm
