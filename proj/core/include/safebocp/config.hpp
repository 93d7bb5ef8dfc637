#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "safebocp/experiments.hpp"

namespace safebocp {

// Strict schema: unknown keys are fatal and reported with their full paths,
// values are range-checked with the violated constraint named. Defaults that
// depend on the benchmark (eta, horizon) are filled after the kind is known.
ExperimentConfig parse_config_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// Full effective form: every applicable field in a fixed order, suitable for
// the run manifest. Parsing it back yields the identical configuration.
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);

const char* benchmark_kind_name(BenchmarkKind kind);
const char* algorithm_kind_name(AlgorithmKind kind);

}  // namespace safebocp
