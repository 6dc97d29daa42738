#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "drglm/families.hpp"

namespace drglm {

// Parametric synthetic-data generator: numeric predictors are gaussian,
// categorical predictors draw from fixed level probabilities, and the
// response is sampled from the model family at mu = invlink(X beta_true).

struct NumericPredictorSpec {
    std::string name;
    double mean = 0.0;
    double sd = 1.0;
};

struct CategoricalPredictorSpec {
    std::string name;
    std::vector<std::string> levels;
    std::vector<double> probs;
};

using PredictorSpec = std::variant<NumericPredictorSpec, CategoricalPredictorSpec>;

struct SynthConfig {
    long n = 0;
    std::uint64_t seed = 0;
    Family family;
    std::vector<PredictorSpec> predictors;
    Eigen::VectorXd beta_true; // encoded order: intercept, then predictors
    double noise_sd = 1.0;     // gaussian only
    std::string response_name = "y";

    static SynthConfig from_json(const nlohmann::json& j);
    static SynthConfig load(const std::string& path);

    // Labels of the encoded design columns this config implies.
    std::vector<std::string> design_labels() const;
    Eigen::Index design_cols() const;
};

// Writes the CSV (predictor columns then the response) and a
// "<out_path>.truth.json" sidecar with beta_true, the seed and labels.
// Byte-identical output for identical (config, seed).
void generate_synthetic(const SynthConfig& config, const std::string& out_path);

} // namespace drglm
