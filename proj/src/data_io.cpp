#include "drglm/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>

#include <json.hpp>

#include "drglm/errors.hpp"

namespace drglm {

namespace {

constexpr std::size_t kLevelCap = 4096;

// CSV dialect: comma delimiter, header row, UTF-8, no quoting. Cells are
// trimmed of surrounding blanks and a trailing CR.
std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        const std::string_view cell =
            comma == std::string_view::npos ? line.substr(start) : line.substr(start, comma - start);
        cells.emplace_back(trim(cell));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

class CsvReader {
public:
    explicit CsvReader(const std::string& path) : path_(path), in_(path) {
        if (!in_) throw DataError("cannot open '" + path + "'");
        std::string line;
        if (!std::getline(in_, line)) throw DataError("'" + path + "' is empty (no header row)");
        header_ = split_line(line);
        std::set<std::string> seen;
        for (const auto& name : header_) {
            if (name.empty()) throw DataError("'" + path + "' has an empty column name");
            if (!seen.insert(name).second)
                throw DataError("'" + path + "' has a duplicate column '" + name + "'");
        }
    }

    const std::vector<std::string>& header() const { return header_; }

    // Next data row, or nullopt at EOF. Row indices are 0-based over data
    // rows; error messages use them directly.
    std::optional<std::vector<std::string>> next() {
        std::string line;
        while (std::getline(in_, line)) {
            if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
            auto cells = split_line(line);
            if (cells.size() != header_.size())
                throw DataError("'" + path_ + "' row " + std::to_string(row_) + " has " +
                                std::to_string(cells.size()) + " cells, expected " +
                                std::to_string(header_.size()));
            ++row_;
            return cells;
        }
        return std::nullopt;
    }

    long rows_read() const { return row_; }

private:
    std::string path_;
    std::ifstream in_;
    std::vector<std::string> header_;
    long row_ = 0;
};

} // namespace

std::string column_type_name(ColumnType t) {
    switch (t) {
        case ColumnType::numeric: return "numeric";
        case ColumnType::categorical: return "categorical";
        case ColumnType::count: return "count";
        case ColumnType::binary: return "binary";
    }
    return "?";
}

ColumnType parse_column_type(const std::string& name) {
    if (name == "numeric") return ColumnType::numeric;
    if (name == "categorical") return ColumnType::categorical;
    if (name == "count") return ColumnType::count;
    if (name == "binary") return ColumnType::binary;
    throw ConfigError("unknown column type '" + name + "'");
}

int Schema::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == name) return static_cast<int>(i);
    return -1;
}

const SchemaColumn& Schema::column(const std::string& name) const {
    const int i = index_of(name);
    if (i < 0) throw ConfigError("column '" + name + "' is not in the schema");
    return columns[static_cast<std::size_t>(i)];
}

Schema scan_schema(const std::string& csv_path, const std::map<std::string, ColumnType>& declarations) {
    CsvReader reader(csv_path);
    const auto& header = reader.header();
    for (const auto& [name, type] : declarations) {
        (void)type;
        bool found = std::find(header.begin(), header.end(), name) != header.end();
        if (!found) throw ConfigError("declared column '" + name + "' is not in '" + csv_path + "'");
    }

    const std::size_t ncols = header.size();
    std::vector<std::set<std::string>> values(ncols);
    std::vector<bool> capped(ncols, false);
    std::vector<bool> numeric_ok(ncols, true);

    long row = 0;
    while (auto cells = reader.next()) {
        for (std::size_t c = 0; c < ncols; ++c) {
            const std::string& cell = (*cells)[c];
            if (cell.empty())
                throw DataError("missing value at row " + std::to_string(row) + ", column '" +
                                header[c] + "'");
            double v;
            const bool is_num = parse_double(cell, v);
            if (!is_num) numeric_ok[c] = false;

            const auto decl = declarations.find(header[c]);
            if (decl != declarations.end()) {
                switch (decl->second) {
                    case ColumnType::numeric:
                        if (!is_num)
                            throw DataError("column '" + header[c] + "' is declared numeric but row " +
                                            std::to_string(row) + " holds '" + cell + "'");
                        break;
                    case ColumnType::count:
                        if (!is_num || v < 0.0 || v != std::floor(v))
                            throw DataError("column '" + header[c] + "' is declared count but row " +
                                            std::to_string(row) + " holds '" + cell + "'");
                        break;
                    case ColumnType::categorical:
                    case ColumnType::binary:
                        break;
                }
            }
            if (!capped[c]) {
                values[c].insert(cell);
                if (values[c].size() > kLevelCap) {
                    values[c].clear();
                    capped[c] = true;
                }
            }
        }
        ++row;
    }
    if (row == 0) throw DataError("'" + csv_path + "' has no data rows");

    Schema schema;
    schema.row_count = row;
    schema.columns.resize(ncols);
    for (std::size_t c = 0; c < ncols; ++c) {
        SchemaColumn& col = schema.columns[c];
        col.name = header[c];
        col.numeric_parseable = numeric_ok[c];
        col.levels_capped = capped[c];
        col.levels.assign(values[c].begin(), values[c].end()); // std::set is already sorted

        const auto decl = declarations.find(col.name);
        if (decl != declarations.end()) {
            col.type = decl->second;
            if (col.type == ColumnType::categorical && capped[c])
                throw DataError("categorical column '" + col.name + "' exceeds " +
                                std::to_string(kLevelCap) + " distinct levels");
            if (col.type == ColumnType::binary && col.levels.size() != 2)
                throw DataError("binary column '" + col.name + "' has " +
                                std::to_string(col.levels.size()) + " distinct values, expected 2");
        } else if (numeric_ok[c]) {
            col.type = ColumnType::numeric;
        } else {
            if (capped[c])
                throw DataError("column '" + col.name + "' is non-numeric with more than " +
                                std::to_string(kLevelCap) + " distinct values");
            col.type = ColumnType::categorical;
        }
    }
    return schema;
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
    ModelSpec spec;
    try {
        spec.response = j.at("response").get<std::string>();
        spec.predictors = j.at("predictors").get<std::vector<std::string>>();
        spec.family_kind = Family::parse(j.at("family").get<std::string>(), 0).kind;
        if (j.contains("intercept")) spec.intercept = j.at("intercept").get<bool>();
        if (j.contains("confidence")) spec.confidence = j.at("confidence").get<double>();
        if (j.contains("reference_levels"))
            for (const auto& [k, v] : j.at("reference_levels").items())
                spec.reference_levels[k] = v.get<std::string>();
        if (j.contains("types"))
            for (const auto& [k, v] : j.at("types").items())
                spec.types[k] = parse_column_type(v.get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad model spec: ") + e.what());
    }
    if (!(spec.confidence > 0.0 && spec.confidence < 1.0))
        throw ConfigError("model spec: confidence must lie in (0, 1)");
    for (const auto& pred : spec.predictors)
        if (pred == spec.response)
            throw ConfigError("model spec: response '" + spec.response + "' is also a predictor");
    return spec;
}

ModelSpec ModelSpec::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model spec '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("model spec '" + path + "' is not valid JSON: " + e.what());
    }
    return from_json(j);
}

nlohmann::json ModelSpec::to_json() const {
    nlohmann::json j;
    j["response"] = response;
    j["predictors"] = predictors;
    Family f;
    f.kind = family_kind;
    f.num_categories = family_kind == FamilyKind::multinomial_logit ? 3 : 0;
    j["family"] = f.name();
    j["intercept"] = intercept;
    j["confidence"] = confidence;
    if (!reference_levels.empty()) {
        nlohmann::json refs;
        for (const auto& [k, v] : reference_levels) refs[k] = v;
        j["reference_levels"] = std::move(refs);
    }
    if (!types.empty()) {
        nlohmann::json t;
        for (const auto& [k, v] : types) t[k] = column_type_name(v);
        j["types"] = std::move(t);
    }
    return j;
}

namespace {

bool factor_like(ColumnType t) { return t == ColumnType::categorical || t == ColumnType::binary; }

// Encoding layout shared by encode_chunk and the label helpers.
struct PredictorPlan {
    int csv_index;
    bool factor;
    std::vector<std::string> levels; // minus reference, for factors
    std::size_t reference;           // index into schema levels
};

struct EncoderLayout {
    std::vector<PredictorPlan> predictors;
    std::vector<std::string> labels; // design column labels
    int response_index;
    Eigen::Index design_cols;
    bool intercept;
};

EncoderLayout build_layout(const Schema& schema, const ModelSpec& spec) {
    EncoderLayout layout;
    layout.intercept = spec.intercept;
    layout.design_cols = spec.intercept ? 1 : 0;
    if (spec.intercept) layout.labels.emplace_back("(Intercept)");

    for (const auto& name : spec.predictors) {
        const int idx = schema.index_of(name);
        if (idx < 0) throw ConfigError("predictor '" + name + "' is not in the schema");
        const SchemaColumn& col = schema.columns[static_cast<std::size_t>(idx)];
        PredictorPlan plan;
        plan.csv_index = idx;
        plan.factor = factor_like(col.type);
        if (plan.factor) {
            if (col.levels.empty())
                throw ConfigError("categorical predictor '" + name + "' has no recorded levels");
            std::string ref = col.levels.front();
            const auto it = spec.reference_levels.find(name);
            if (it != spec.reference_levels.end()) ref = it->second;
            const auto pos = std::find(col.levels.begin(), col.levels.end(), ref);
            if (pos == col.levels.end())
                throw ConfigError("reference level '" + ref + "' of '" + name +
                                  "' was not observed in the data");
            plan.reference = static_cast<std::size_t>(pos - col.levels.begin());
            for (std::size_t l = 0; l < col.levels.size(); ++l) {
                if (l == plan.reference) continue;
                plan.levels.push_back(col.levels[l]);
                layout.labels.push_back(name + col.levels[l]);
            }
            layout.design_cols += static_cast<Eigen::Index>(plan.levels.size());
        } else {
            layout.labels.push_back(name);
            layout.design_cols += 1;
        }
        layout.predictors.push_back(std::move(plan));
    }

    layout.response_index = schema.index_of(spec.response);
    if (layout.response_index < 0)
        throw ConfigError("response '" + spec.response + "' is not in the schema");
    return layout;
}

} // namespace

void validate_model(const Schema& schema, const ModelSpec& spec) {
    build_layout(schema, spec); // throws on unknown names / bad references
    const SchemaColumn& resp = schema.column(spec.response);
    switch (spec.family_kind) {
        case FamilyKind::gaussian_identity:
            if (!resp.numeric_parseable)
                throw ConfigError("gaussian response '" + spec.response + "' is not numeric");
            break;
        case FamilyKind::binomial_logit:
            if (resp.levels_capped || resp.levels.size() != 2)
                throw ConfigError("binomial response '" + spec.response + "' must have exactly 2 levels");
            break;
        case FamilyKind::poisson_log:
            if (!resp.numeric_parseable)
                throw ConfigError("poisson response '" + spec.response + "' is not numeric");
            break;
        case FamilyKind::multinomial_logit:
            if (resp.levels_capped || resp.levels.size() < 3)
                throw ConfigError("multinomial response '" + spec.response +
                                  "' must have at least 3 levels");
            break;
    }
}

Family resolve_family(const Schema& schema, const ModelSpec& spec) {
    validate_model(schema, spec);
    if (spec.family_kind == FamilyKind::multinomial_logit)
        return Family::multinomial(static_cast<int>(schema.column(spec.response).levels.size()));
    Family f;
    f.kind = spec.family_kind;
    return f;
}

std::vector<std::string> design_labels(const Schema& schema, const ModelSpec& spec) {
    return build_layout(schema, spec).labels;
}

std::vector<std::string> coefficient_labels(const Schema& schema, const ModelSpec& spec) {
    const auto base = design_labels(schema, spec);
    if (spec.family_kind != FamilyKind::multinomial_logit) return base;
    const auto& levels = schema.column(spec.response).levels;
    std::vector<std::string> out;
    out.reserve(base.size() * (levels.size() - 1));
    for (std::size_t cat = 1; cat < levels.size(); ++cat)
        for (const auto& label : base) out.push_back(levels[cat] + ":" + label);
    return out;
}

EncodedChunk encode_chunk(const std::vector<std::vector<std::string>>& rows, const Schema& schema,
                          const ModelSpec& spec) {
    const EncoderLayout layout = build_layout(schema, spec);
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    if (n == 0) throw DimensionError("encode_chunk: empty chunk");

    EncodedChunk out;
    out.design.X.resize(n, layout.design_cols);
    out.design.labels = layout.labels;
    out.response.y.resize(n);

    const SchemaColumn& resp = schema.column(spec.response);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& cells = rows[static_cast<std::size_t>(i)];
        if (cells.size() != schema.columns.size())
            throw DataError("encode_chunk: row " + std::to_string(i) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(schema.columns.size()));
        Eigen::Index col = 0;
        if (layout.intercept) out.design.X(i, col++) = 1.0;
        for (const auto& plan : layout.predictors) {
            const std::string& cell = cells[static_cast<std::size_t>(plan.csv_index)];
            if (plan.factor) {
                for (const auto& level : plan.levels) out.design.X(i, col++) = cell == level ? 1.0 : 0.0;
                // scan_schema recorded every level, so an unseen value
                // means the file changed underfoot.
                const SchemaColumn& sc = schema.columns[static_cast<std::size_t>(plan.csv_index)];
                if (std::find(sc.levels.begin(), sc.levels.end(), cell) == sc.levels.end())
                    throw DataError("unseen level '" + cell + "' in column '" + sc.name + "'");
            } else {
                double v;
                if (!parse_double(cell, v))
                    throw DataError("cannot parse '" + cell + "' in numeric column '" +
                                    schema.columns[static_cast<std::size_t>(plan.csv_index)].name + "'");
                out.design.X(i, col++) = v;
            }
        }

        const std::string& rcell = cells[static_cast<std::size_t>(layout.response_index)];
        switch (spec.family_kind) {
            case FamilyKind::gaussian_identity: {
                double v;
                if (!parse_double(rcell, v))
                    throw DataError("cannot parse response '" + rcell + "' at row " + std::to_string(i));
                out.response.y[i] = v;
                break;
            }
            case FamilyKind::poisson_log: {
                double v;
                if (!parse_double(rcell, v) || v < 0.0 || v != std::floor(v))
                    throw DataError("poisson response '" + rcell + "' at row " + std::to_string(i) +
                                    " is not a non-negative integer");
                out.response.y[i] = v;
                break;
            }
            case FamilyKind::binomial_logit: {
                // First sorted level codes 0, the other 1.
                if (rcell == resp.levels[0]) out.response.y[i] = 0.0;
                else if (rcell == resp.levels[1]) out.response.y[i] = 1.0;
                else throw DataError("unseen response level '" + rcell + "' at row " + std::to_string(i));
                break;
            }
            case FamilyKind::multinomial_logit: {
                const auto pos = std::find(resp.levels.begin(), resp.levels.end(), rcell);
                if (pos == resp.levels.end())
                    throw DataError("unseen response level '" + rcell + "' at row " + std::to_string(i));
                out.response.y[i] = static_cast<double>(pos - resp.levels.begin()) + 1.0;
                break;
            }
        }
    }
    return out;
}

// --------------------------------------------------------------------------
// SubsetStreamer

struct SubsetStreamer::Impl {
    CsvReader reader;
    PartitionPlan plan;
    const Schema& schema;
    const ModelSpec& spec;
    long chunk_rows;

    std::vector<int> owner;                 // subset per file row (0-based)
    std::vector<std::vector<std::vector<std::string>>> buffers;
    std::vector<long> delivered;            // rows delivered per subset
    std::vector<long> buffered;             // rows currently buffered per subset
    std::vector<long> seen;                 // rows read per subset
    long next_row = 0;
    bool exhausted = false;
    std::vector<int> flush_queue;           // subsets to flush at EOF

    Impl(const std::string& path, const PartitionPlan& plan_, const Schema& schema_,
         const ModelSpec& spec_, long chunk_rows_)
        : reader(path), plan(plan_), schema(schema_), spec(spec_), chunk_rows(chunk_rows_) {
        if (chunk_rows < 1) throw UsageError("chunk_rows must be >= 1");
        if (plan.total_rows != schema.row_count)
            throw DataError("partition plan covers " + std::to_string(plan.total_rows) +
                            " rows but the schema recorded " + std::to_string(schema.row_count));
        owner = plan.subset_of_row();
        buffers.resize(static_cast<std::size_t>(plan.num_subsets));
        delivered.assign(static_cast<std::size_t>(plan.num_subsets), 0);
        buffered.assign(static_cast<std::size_t>(plan.num_subsets), 0);
        seen.assign(static_cast<std::size_t>(plan.num_subsets), 0);
    }

    Chunk flush(int s) {
        auto& buf = buffers[static_cast<std::size_t>(s)];
        Chunk chunk;
        chunk.subset_index = s + 1;
        chunk.data = encode_chunk(buf, schema, spec);
        delivered[static_cast<std::size_t>(s)] += static_cast<long>(buf.size());
        buffered[static_cast<std::size_t>(s)] = 0;
        chunk.last_for_subset = delivered[static_cast<std::size_t>(s)] == plan.subset_rows(s);
        buf.clear();
        return chunk;
    }

    std::optional<Chunk> next() {
        while (true) {
            if (!flush_queue.empty()) {
                const int s = flush_queue.front();
                flush_queue.erase(flush_queue.begin());
                if (buffered[static_cast<std::size_t>(s)] > 0) return flush(s);
                continue;
            }
            if (exhausted) return std::nullopt;

            auto cells = reader.next();
            if (!cells) {
                if (reader.rows_read() != plan.total_rows)
                    throw DataError("row count changed between scan and stream: expected " +
                                    std::to_string(plan.total_rows) + ", read " +
                                    std::to_string(reader.rows_read()));
                exhausted = true;
                // Flush remaining partial buffers in ascending subset order.
                for (int s = 0; s < plan.num_subsets; ++s)
                    if (buffered[static_cast<std::size_t>(s)] > 0) flush_queue.push_back(s);
                continue;
            }
            if (next_row >= plan.total_rows)
                throw DataError("row count changed between scan and stream: more than " +
                                std::to_string(plan.total_rows) + " rows present");
            const int s = owner[static_cast<std::size_t>(next_row)];
            ++next_row;
            buffers[static_cast<std::size_t>(s)].push_back(std::move(*cells));
            ++buffered[static_cast<std::size_t>(s)];
            ++seen[static_cast<std::size_t>(s)];
            // Flush on a full buffer, or as soon as the subset's final row
            // has been read (sequential plans then stream one subset at a
            // time and the consumer can start fitting immediately).
            if (buffered[static_cast<std::size_t>(s)] == chunk_rows ||
                seen[static_cast<std::size_t>(s)] == plan.subset_rows(s))
                return flush(s);
        }
    }
};

SubsetStreamer::SubsetStreamer(const std::string& csv_path, const PartitionPlan& plan,
                               const Schema& schema, const ModelSpec& spec, long chunk_rows)
    : impl_(std::make_unique<Impl>(csv_path, plan, schema, spec, chunk_rows)) {}

SubsetStreamer::~SubsetStreamer() = default;

std::optional<SubsetStreamer::Chunk> SubsetStreamer::next() { return impl_->next(); }

std::vector<std::string> read_column(const std::string& csv_path, const std::string& column_name) {
    CsvReader reader(csv_path);
    const auto& header = reader.header();
    const auto pos = std::find(header.begin(), header.end(), column_name);
    if (pos == header.end())
        throw ConfigError("column '" + column_name + "' is not in '" + csv_path + "'");
    const std::size_t idx = static_cast<std::size_t>(pos - header.begin());
    std::vector<std::string> out;
    while (auto cells = reader.next()) out.push_back(std::move((*cells)[idx]));
    return out;
}

// --------------------------------------------------------------------------
// Schema cache

namespace {

nlohmann::json schema_to_json(const Schema& schema) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : schema.columns) {
        nlohmann::json jc;
        jc["name"] = c.name;
        jc["type"] = column_type_name(c.type);
        jc["levels"] = c.levels;
        jc["numeric"] = c.numeric_parseable;
        jc["levels_capped"] = c.levels_capped;
        cols.push_back(std::move(jc));
    }
    return nlohmann::json{{"columns", std::move(cols)}, {"row_count", schema.row_count}};
}

Schema schema_from_json(const nlohmann::json& j) {
    Schema schema;
    schema.row_count = j.at("row_count").get<long>();
    for (const auto& jc : j.at("columns")) {
        SchemaColumn c;
        c.name = jc.at("name").get<std::string>();
        c.type = parse_column_type(jc.at("type").get<std::string>());
        c.levels = jc.at("levels").get<std::vector<std::string>>();
        c.numeric_parseable = jc.at("numeric").get<bool>();
        c.levels_capped = jc.at("levels_capped").get<bool>();
        schema.columns.push_back(std::move(c));
    }
    return schema;
}

std::pair<std::uintmax_t, long long> file_stamp(const std::string& path) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw DataError("cannot stat '" + path + "'");
    const auto mtime = std::filesystem::last_write_time(path, ec);
    if (ec) throw DataError("cannot stat '" + path + "'");
    return {size, static_cast<long long>(mtime.time_since_epoch().count())};
}

} // namespace

void save_schema_cache(const std::string& cache_path, const std::string& csv_path,
                       const Schema& schema) {
    const auto [size, mtime] = file_stamp(csv_path);
    nlohmann::json j = schema_to_json(schema);
    j["file_size"] = size;
    j["file_mtime"] = mtime;
    std::ofstream out(cache_path);
    if (!out) throw DataError("cannot write schema cache '" + cache_path + "'");
    out << j.dump(2) << '\n';
}

std::optional<Schema> load_schema_cache(const std::string& cache_path, const std::string& csv_path) {
    std::ifstream in(cache_path);
    if (!in) return std::nullopt;
    nlohmann::json j;
    try {
        in >> j;
        const auto [size, mtime] = file_stamp(csv_path);
        if (j.at("file_size").get<std::uintmax_t>() != size ||
            j.at("file_mtime").get<long long>() != mtime)
            return std::nullopt;
        return schema_from_json(j);
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

} // namespace drglm
