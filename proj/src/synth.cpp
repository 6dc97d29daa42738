#include "drglm/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "drglm/errors.hpp"
#include "drglm/rng.hpp"

namespace drglm {

namespace {

// Shortest round-trip representation; locale-independent so generated
// files are byte-stable.
std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw DomainError("cannot format value");
    return std::string(buf, ptr);
}

} // namespace

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
    SynthConfig cfg;
    try {
        cfg.n = j.at("n").get<long>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
        const std::string family = j.at("family").get<std::string>();
        const int r = j.contains("num_categories") ? j.at("num_categories").get<int>() : 0;
        cfg.family = Family::parse(family, r);
        if (cfg.family.is_multinomial() && r < 2)
            throw ConfigError("num_categories: required (>= 2) for multinomial configs");
        // Categories are written as "1".."r"; beyond 9 the lexicographic
        // level order read back from the file would no longer match the
        // generation blocks.
        if (cfg.family.is_multinomial() && r > 9)
            throw ConfigError("num_categories: at most 9 supported by the generator");
        if (j.contains("noise_sd")) cfg.noise_sd = j.at("noise_sd").get<double>();
        if (j.contains("response_name")) cfg.response_name = j.at("response_name").get<std::string>();

        std::size_t pi = 0;
        for (const auto& jp : j.at("predictors")) {
            const std::string where = "predictors[" + std::to_string(pi++) + "]";
            const std::string kind = jp.at("kind").get<std::string>();
            if (kind == "numeric") {
                NumericPredictorSpec p;
                p.name = jp.at("name").get<std::string>();
                if (jp.contains("mean")) p.mean = jp.at("mean").get<double>();
                if (jp.contains("sd")) p.sd = jp.at("sd").get<double>();
                if (!(p.sd >= 0)) throw ConfigError(where + ".sd: must be >= 0");
                cfg.predictors.emplace_back(std::move(p));
            } else if (kind == "categorical") {
                CategoricalPredictorSpec p;
                p.name = jp.at("name").get<std::string>();
                p.levels = jp.at("levels").get<std::vector<std::string>>();
                p.probs = jp.at("probs").get<std::vector<double>>();
                if (p.levels.size() < 2) throw ConfigError(where + ".levels: need at least 2");
                if (p.levels.size() != p.probs.size())
                    throw ConfigError(where + ": levels and probs differ in length");
                double sum = 0;
                for (double q : p.probs) {
                    if (!(q >= 0)) throw ConfigError(where + ".probs: negative probability");
                    sum += q;
                }
                if (std::fabs(sum - 1.0) > 1e-12)
                    throw ConfigError(where + ".probs: sum " + format_double(sum) + " != 1");
                cfg.predictors.emplace_back(std::move(p));
            } else {
                throw ConfigError(where + ".kind: unknown kind '" + kind + "'");
            }
        }

        const auto beta = j.at("beta").get<std::vector<double>>();
        cfg.beta_true = Eigen::Map<const Eigen::VectorXd>(beta.data(),
                                                          static_cast<Eigen::Index>(beta.size()));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad synth config: ") + e.what());
    }
    if (cfg.n < 1) throw ConfigError("n: must be >= 1");
    const Eigen::Index expected = cfg.family.coef_dim(cfg.design_cols());
    if (cfg.beta_true.size() != expected)
        throw ConfigError("beta: has length " + std::to_string(cfg.beta_true.size()) +
                          ", the encoded design implies " + std::to_string(expected));
    return cfg;
}

SynthConfig SynthConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open synth config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("synth config '" + path + "' is not valid JSON: " + e.what());
    }
    return from_json(j);
}

std::vector<std::string> SynthConfig::design_labels() const {
    std::vector<std::string> labels{"(Intercept)"};
    for (const auto& p : predictors) {
        if (const auto* num = std::get_if<NumericPredictorSpec>(&p)) {
            labels.push_back(num->name);
        } else {
            const auto& cat = std::get<CategoricalPredictorSpec>(p);
            // Reference level = first sorted level, matching the encoder.
            std::vector<std::string> sorted = cat.levels;
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t l = 1; l < sorted.size(); ++l) labels.push_back(cat.name + sorted[l]);
        }
    }
    return labels;
}

Eigen::Index SynthConfig::design_cols() const {
    return static_cast<Eigen::Index>(design_labels().size());
}

void generate_synthetic(const SynthConfig& config, const std::string& out_path) {
    std::ofstream out(out_path);
    if (!out) throw DataError("cannot write '" + out_path + "'");

    // Header: predictor columns in config order, response last.
    std::string header;
    for (const auto& p : config.predictors) {
        const std::string& name = std::holds_alternative<NumericPredictorSpec>(p)
                                      ? std::get<NumericPredictorSpec>(p).name
                                      : std::get<CategoricalPredictorSpec>(p).name;
        header += name;
        header += ',';
    }
    header += config.response_name;
    out << header << '\n';

    // Per-category sorted levels, reference first, as the encoder will see
    // them; the design row is built in encoded order.
    struct CatLayout {
        std::vector<std::string> sorted_levels;
        std::vector<std::size_t> sorted_of_config; // config level index -> sorted position
    };
    std::vector<CatLayout> cat_layouts(config.predictors.size());
    for (std::size_t c = 0; c < config.predictors.size(); ++c) {
        if (const auto* cat = std::get_if<CategoricalPredictorSpec>(&config.predictors[c])) {
            CatLayout& lay = cat_layouts[c];
            lay.sorted_levels = cat->levels;
            std::sort(lay.sorted_levels.begin(), lay.sorted_levels.end());
            lay.sorted_of_config.resize(cat->levels.size());
            for (std::size_t l = 0; l < cat->levels.size(); ++l) {
                const auto pos = std::find(lay.sorted_levels.begin(), lay.sorted_levels.end(),
                                           cat->levels[l]);
                lay.sorted_of_config[l] = static_cast<std::size_t>(pos - lay.sorted_levels.begin());
            }
        }
    }

    const Eigen::Index p_cols = config.design_cols();
    SplitMix64 rng(config.seed);
    Eigen::VectorXd xrow(p_cols);
    std::string line;
    for (long i = 0; i < config.n; ++i) {
        line.clear();
        xrow[0] = 1.0;
        Eigen::Index col = 1;
        for (std::size_t c = 0; c < config.predictors.size(); ++c) {
            if (const auto* num = std::get_if<NumericPredictorSpec>(&config.predictors[c])) {
                const double v = num->mean + num->sd * rng.next_normal();
                xrow[col++] = v;
                line += format_double(v);
                line += ',';
            } else {
                const auto& cat = std::get<CategoricalPredictorSpec>(config.predictors[c]);
                const std::size_t pick = rng.next_categorical(cat.probs);
                const std::size_t sorted_pos = cat_layouts[c].sorted_of_config[pick];
                // Dummy columns follow sorted levels with the first dropped.
                for (std::size_t l = 1; l < cat_layouts[c].sorted_levels.size(); ++l)
                    xrow[col++] = sorted_pos == l ? 1.0 : 0.0;
                line += cat.levels[pick];
                line += ',';
            }
        }

        switch (config.family.kind) {
            case FamilyKind::gaussian_identity: {
                const double eta = xrow.dot(config.beta_true);
                line += format_double(eta + config.noise_sd * rng.next_normal());
                break;
            }
            case FamilyKind::binomial_logit: {
                const double eta = xrow.dot(config.beta_true);
                const double mu = eta >= 0 ? 1.0 / (1.0 + std::exp(-eta))
                                           : std::exp(eta) / (1.0 + std::exp(eta));
                line += rng.next_double() < mu ? '1' : '0';
                break;
            }
            case FamilyKind::poisson_log: {
                const double eta = xrow.dot(config.beta_true);
                if (eta > 30.0)
                    throw DomainError("poisson rate exp(" + format_double(eta) +
                                      ") too large at row " + std::to_string(i) +
                                      "; reduce beta or predictor scale");
                line += std::to_string(rng.next_poisson(std::exp(eta)));
                break;
            }
            case FamilyKind::multinomial_logit: {
                const int r = config.family.num_categories;
                // Category probabilities at this row; category 1 is reference.
                std::vector<double> probs(static_cast<std::size_t>(r));
                double m = 0.0;
                std::vector<double> etas(static_cast<std::size_t>(r), 0.0);
                for (int j = 2; j <= r; ++j) {
                    etas[static_cast<std::size_t>(j - 1)] =
                        xrow.dot(config.beta_true.segment((j - 2) * p_cols, p_cols));
                    m = std::max(m, etas[static_cast<std::size_t>(j - 1)]);
                }
                double denom = 0.0;
                for (int j = 0; j < r; ++j) {
                    probs[static_cast<std::size_t>(j)] = std::exp(etas[static_cast<std::size_t>(j)] - m);
                    denom += probs[static_cast<std::size_t>(j)];
                }
                for (auto& q : probs) q /= denom;
                line += std::to_string(rng.next_categorical(probs) + 1);
                break;
            }
        }
        out << line << '\n';
    }
    out.flush();
    if (!out) throw DataError("write failure on '" + out_path + "'");

    nlohmann::json truth;
    truth["seed"] = config.seed;
    truth["family"] = config.family.name();
    truth["labels"] = config.design_labels();
    truth["beta_true"] = std::vector<double>(config.beta_true.data(),
                                             config.beta_true.data() + config.beta_true.size());
    std::ofstream tout(out_path + ".truth.json");
    if (!tout) throw DataError("cannot write '" + out_path + ".truth.json'");
    tout << truth.dump(2) << '\n';
}

} // namespace drglm
