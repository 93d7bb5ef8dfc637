#include "safebocp/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "safebocp/errors.hpp"

namespace safebocp {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& prefix,
                const std::set<std::string>& allowed) {
    std::string unknown;
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.count(key)) {
            if (!unknown.empty()) unknown += ", ";
            unknown += prefix.empty() ? key : prefix + "." + key;
        }
    }
    if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
}

std::string path_of(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

double get_double(const json& obj, const std::string& prefix, const std::string& key,
                  double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(path_of(prefix, key) + " must be a number");
    return v.get<double>();
}

int get_int(const json& obj, const std::string& prefix, const std::string& key, int fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) throw ConfigError(path_of(prefix, key) + " must be an integer");
    return v.get<int>();
}

bool get_bool(const json& obj, const std::string& prefix, const std::string& key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) throw ConfigError(path_of(prefix, key) + " must be a boolean");
    return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& prefix, const std::string& key,
                       const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) throw ConfigError(path_of(prefix, key) + " must be a string");
    return v.get<std::string>();
}

std::vector<double> get_number_list(const json& obj, const std::string& prefix,
                                    const std::string& key) {
    if (!obj.contains(key)) return {};
    const json& v = obj.at(key);
    if (!v.is_array()) throw ConfigError(path_of(prefix, key) + " must be an array of numbers");
    std::vector<double> out;
    for (const json& e : v) {
        if (!e.is_number()) throw ConfigError(path_of(prefix, key) + " must be an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

void require_positive_finite(double v, const std::string& path) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(path + " must be positive and finite");
}

BenchmarkConfig parse_benchmark(const json& root) {
    BenchmarkConfig out;
    json obj = root.contains("benchmark") ? root.at("benchmark") : json::object();
    if (!obj.is_object()) throw ConfigError("benchmark must be an object");
    std::string kind = get_string(obj, "benchmark", "kind", "synthetic");
    if (kind == "synthetic") {
        out.kind = BenchmarkKind::Synthetic;
        check_keys(obj, "benchmark",
                   {"kind", "grid_size", "low", "high", "true_bandwidth", "surrogate_bandwidth",
                    "objective_noise_power", "horizon"});
        out.synthetic.grid_size = get_int(obj, "benchmark", "grid_size", 1000);
        if (out.synthetic.grid_size < 2) throw ConfigError("benchmark.grid_size must be at least 2");
        out.synthetic.low = get_double(obj, "benchmark", "low", -10.0);
        out.synthetic.high = get_double(obj, "benchmark", "high", 10.0);
        if (!(out.synthetic.high > out.synthetic.low)) {
            throw ConfigError("benchmark.high must exceed benchmark.low");
        }
        out.synthetic.true_bandwidth = get_double(obj, "benchmark", "true_bandwidth", 1.0 / 1.62);
        require_positive_finite(out.synthetic.true_bandwidth, "benchmark.true_bandwidth");
        out.synthetic.surrogate_bandwidth =
            get_double(obj, "benchmark", "surrogate_bandwidth", 1.0 / 1.62);
        require_positive_finite(out.synthetic.surrogate_bandwidth, "benchmark.surrogate_bandwidth");
        out.synthetic.objective_noise_power =
            get_double(obj, "benchmark", "objective_noise_power", 2.5e-3);
        if (!(out.synthetic.objective_noise_power >= 0.0)) {
            throw ConfigError("benchmark.objective_noise_power must be nonnegative");
        }
        out.horizon = get_int(obj, "benchmark", "horizon", 25);
    } else if (kind == "movielens") {
        out.kind = BenchmarkKind::Movielens;
        check_keys(obj, "benchmark",
                   {"kind", "data_path", "training_users", "test_users", "rank", "regularization",
                    "als_sweeps", "horizon"});
        out.data_path = get_string(obj, "benchmark", "data_path", "");
        out.training_users = get_int(obj, "benchmark", "training_users", 200);
        if (out.training_users < 1) throw ConfigError("benchmark.training_users must be positive");
        out.test_users = get_int(obj, "benchmark", "test_users", 10);
        if (out.test_users < 1) throw ConfigError("benchmark.test_users must be positive");
        out.factorization.rank = get_int(obj, "benchmark", "rank", 20);
        if (out.factorization.rank < 1) throw ConfigError("benchmark.rank must be positive");
        out.factorization.regularization = get_double(obj, "benchmark", "regularization", 0.1);
        require_positive_finite(out.factorization.regularization, "benchmark.regularization");
        out.factorization.sweeps = get_int(obj, "benchmark", "als_sweeps", 50);
        if (out.factorization.sweeps < 1) throw ConfigError("benchmark.als_sweeps must be positive");
        out.horizon = get_int(obj, "benchmark", "horizon", 100);
    } else {
        throw ConfigError("benchmark.kind must be \"synthetic\" or \"movielens\"");
    }
    if (out.horizon < 1) throw ConfigError("benchmark.horizon must be at least 1");
    return out;
}

AlgorithmConfig parse_algorithm(const json& root, const BenchmarkConfig& bench) {
    if (!root.contains("algorithm") || !root.at("algorithm").is_object()) {
        throw ConfigError("algorithm must be an object with a \"kind\"");
    }
    const json& obj = root.at("algorithm");
    AlgorithmConfig out;
    std::string kind = get_string(obj, "algorithm", "kind", "");
    if (kind == "safeopt") {
        out.kind = AlgorithmKind::SafeOpt;
        check_keys(obj, "algorithm", {"kind", "beta_f", "b", "b_ratio", "delta"});
    } else if (kind == "d-safe-bocp") {
        out.kind = AlgorithmKind::DSafeBocp;
        check_keys(obj, "algorithm", {"kind", "beta_f", "alpha", "eta", "delta_alpha_init"});
    } else if (kind == "p-safe-bocp") {
        out.kind = AlgorithmKind::PSafeBocp;
        check_keys(obj, "algorithm", {"kind", "beta_f", "alpha", "eta", "delta_alpha_init", "delta"});
    } else if (kind == "fixed-beta") {
        out.kind = AlgorithmKind::FixedBeta;
        check_keys(obj, "algorithm", {"kind", "beta_f", "beta", "infinite"});
    } else {
        throw ConfigError(
            "algorithm.kind must be one of \"safeopt\", \"d-safe-bocp\", \"p-safe-bocp\", "
            "\"fixed-beta\"");
    }

    out.beta_f = get_double(obj, "algorithm", "beta_f", 3.0);
    if (!(out.beta_f >= 0.0) || !std::isfinite(out.beta_f)) {
        throw ConfigError("algorithm.beta_f must be nonnegative and finite");
    }

    bool controller = out.kind == AlgorithmKind::DSafeBocp || out.kind == AlgorithmKind::PSafeBocp;
    if (controller) {
        out.alpha = get_double(obj, "algorithm", "alpha", 0.1);
        if (!(out.alpha > 0.0 && out.alpha <= 1.0)) {
            throw ConfigError("algorithm.alpha must lie in (0,1]");
        }
        double default_eta = bench.kind == BenchmarkKind::Movielens ? 10.0 : 2.0;
        out.eta = get_double(obj, "algorithm", "eta", default_eta);
        require_positive_finite(out.eta, "algorithm.eta");
        out.delta_alpha_init = get_double(obj, "algorithm", "delta_alpha_init", 0.0);
        if (!(out.delta_alpha_init < 1.0)) {
            throw ConfigError("algorithm.delta_alpha_init must satisfy delta_alpha_init < 1");
        }
        if (bench.horizon < 2) {
            throw ConfigError("benchmark.horizon must be at least 2 for controller algorithms");
        }
    }
    if (out.kind == AlgorithmKind::PSafeBocp) {
        out.delta = get_double(obj, "algorithm", "delta", 0.1);
        if (!(out.delta > 0.0 && out.delta < 1.0)) {
            throw ConfigError("algorithm.delta must lie in (0,1)");
        }
    }
    if (out.kind == AlgorithmKind::SafeOpt) {
        out.delta = get_double(obj, "algorithm", "delta", 0.1);
        if (!(out.delta > 0.0 && out.delta <= 1.0)) {
            throw ConfigError("algorithm.delta must lie in (0,1]");
        }
        if (obj.contains("b")) {
            out.b = get_double(obj, "algorithm", "b", 0.0);
            require_positive_finite(*out.b, "algorithm.b");
        }
        if (obj.contains("b_ratio")) {
            out.b_ratio = get_double(obj, "algorithm", "b_ratio", 0.0);
            require_positive_finite(*out.b_ratio, "algorithm.b_ratio");
        }
        if (out.b && out.b_ratio) {
            throw ConfigError("algorithm.b and algorithm.b_ratio are mutually exclusive");
        }
    }
    if (out.kind == AlgorithmKind::FixedBeta) {
        out.fixed_beta_infinite = get_bool(obj, "algorithm", "infinite", false);
        if (out.fixed_beta_infinite && obj.contains("beta")) {
            throw ConfigError("algorithm.beta conflicts with algorithm.infinite; remove one");
        }
        out.fixed_beta = get_double(obj, "algorithm", "beta", 0.0);
        if (!(out.fixed_beta >= 0.0) || !std::isfinite(out.fixed_beta)) {
            throw ConfigError("algorithm.beta must be nonnegative and finite");
        }
    }
    return out;
}

SweepAxes parse_sweep(const json& root, const BenchmarkConfig& bench, const AlgorithmConfig& algo) {
    SweepAxes out;
    if (!root.contains("sweep")) {
        if (algo.kind == AlgorithmKind::SafeOpt && !algo.b && !algo.b_ratio) {
            throw ConfigError("safeopt requires algorithm.b, algorithm.b_ratio or sweep.b_ratios");
        }
        return out;
    }
    const json& obj = root.at("sweep");
    if (!obj.is_object()) throw ConfigError("sweep must be an object");
    check_keys(obj, "sweep", {"b_ratios", "alphas", "sigma_q2s", "bandwidths"});
    out.b_ratios = get_number_list(obj, "sweep", "b_ratios");
    out.alphas = get_number_list(obj, "sweep", "alphas");
    out.sigma_q2s = get_number_list(obj, "sweep", "sigma_q2s");
    out.bandwidths = get_number_list(obj, "sweep", "bandwidths");

    bool controller = algo.kind == AlgorithmKind::DSafeBocp || algo.kind == AlgorithmKind::PSafeBocp;
    if (!out.b_ratios.empty()) {
        if (algo.kind != AlgorithmKind::SafeOpt) {
            throw ConfigError("sweep.b_ratios applies only to the safeopt algorithm");
        }
        if (algo.b || algo.b_ratio) {
            throw ConfigError("sweep.b_ratios conflicts with algorithm.b/b_ratio; remove one");
        }
        for (double v : out.b_ratios) require_positive_finite(v, "sweep.b_ratios entries");
    } else if (algo.kind == AlgorithmKind::SafeOpt && !algo.b && !algo.b_ratio) {
        throw ConfigError("safeopt requires algorithm.b, algorithm.b_ratio or sweep.b_ratios");
    }
    if (!out.alphas.empty()) {
        if (!controller) throw ConfigError("sweep.alphas applies only to controller algorithms");
        if (root.at("algorithm").contains("alpha")) {
            throw ConfigError("sweep.alphas conflicts with algorithm.alpha; remove one");
        }
        for (double v : out.alphas) {
            if (!(v > 0.0 && v <= 1.0)) throw ConfigError("sweep.alphas entries must lie in (0,1]");
        }
    }
    for (double v : out.sigma_q2s) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ConfigError("sweep.sigma_q2s entries must be nonnegative and finite");
        }
    }
    if (!out.bandwidths.empty()) {
        if (bench.kind != BenchmarkKind::Synthetic) {
            throw ConfigError("sweep.bandwidths applies only to the synthetic benchmark");
        }
        if (root.contains("benchmark") && root.at("benchmark").contains("surrogate_bandwidth")) {
            throw ConfigError(
                "sweep.bandwidths conflicts with benchmark.surrogate_bandwidth; remove one");
        }
        for (double v : out.bandwidths) require_positive_finite(v, "sweep.bandwidths entries");
    }
    return out;
}

}  // namespace

ExperimentConfig parse_config_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config root must be an object");
    check_keys(j, "",
               {"benchmark", "algorithm", "sweep", "replications", "replications_full", "seed",
                "out_dir"});
    ExperimentConfig out;
    out.benchmark = parse_benchmark(j);
    out.algorithm = parse_algorithm(j, out.benchmark);
    out.sweep = parse_sweep(j, out.benchmark, out.algorithm);

    bool movielens = out.benchmark.kind == BenchmarkKind::Movielens;
    for (double v : out.sweep.sigma_q2s) {
        if (movielens && v != 0.0) {
            throw ConfigError("movielens feedback is noiseless; sweep.sigma_q2s must be [0]");
        }
        if (out.algorithm.kind == AlgorithmKind::DSafeBocp && v != 0.0) {
            throw ConfigError("the deterministic variant requires sigma_q2 = 0");
        }
    }
    if (movielens && out.algorithm.b_ratio) {
        throw ConfigError("movielens has no reference constraint norm; use algorithm.b");
    }
    if (movielens && !out.sweep.b_ratios.empty()) {
        throw ConfigError("movielens has no reference constraint norm; use algorithm.b");
    }

    out.replications = get_int(j, "", "replications", 200);
    if (out.replications < 1) throw ConfigError("replications must be at least 1");
    out.replications_full = get_int(j, "", "replications_full", 1000);
    if (out.replications_full < 1) throw ConfigError("replications_full must be at least 1");
    if (j.contains("seed")) {
        const json& s = j.at("seed");
        if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() &&
                                       s.get<std::int64_t>() < 0)) {
            throw ConfigError("seed must be a nonnegative integer");
        }
        out.seed = s.get<std::uint64_t>();
    }
    out.out_dir = get_string(j, "", "out_dir", "results");
    if (out.out_dir.empty()) throw ConfigError("out_dir must not be empty");
    return out;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("config file is not readable: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    return parse_config_json(j);
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& config) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json bench;
    bench["kind"] = benchmark_kind_name(config.benchmark.kind);
    if (config.benchmark.kind == BenchmarkKind::Synthetic) {
        const SyntheticSpec& s = config.benchmark.synthetic;
        bench["grid_size"] = s.grid_size;
        bench["low"] = s.low;
        bench["high"] = s.high;
        bench["true_bandwidth"] = s.true_bandwidth;
        if (config.sweep.bandwidths.empty()) bench["surrogate_bandwidth"] = s.surrogate_bandwidth;
        bench["objective_noise_power"] = s.objective_noise_power;
    } else {
        bench["data_path"] = config.benchmark.data_path;
        bench["training_users"] = config.benchmark.training_users;
        bench["test_users"] = config.benchmark.test_users;
        bench["rank"] = config.benchmark.factorization.rank;
        bench["regularization"] = config.benchmark.factorization.regularization;
        bench["als_sweeps"] = config.benchmark.factorization.sweeps;
    }
    bench["horizon"] = config.benchmark.horizon;
    j["benchmark"] = std::move(bench);

    nlohmann::ordered_json algo;
    algo["kind"] = algorithm_kind_name(config.algorithm.kind);
    algo["beta_f"] = config.algorithm.beta_f;
    bool controller = config.algorithm.kind == AlgorithmKind::DSafeBocp ||
                      config.algorithm.kind == AlgorithmKind::PSafeBocp;
    if (controller) {
        if (config.sweep.alphas.empty()) algo["alpha"] = config.algorithm.alpha;
        algo["eta"] = config.algorithm.eta;
        algo["delta_alpha_init"] = config.algorithm.delta_alpha_init;
    }
    if (config.algorithm.kind == AlgorithmKind::PSafeBocp ||
        config.algorithm.kind == AlgorithmKind::SafeOpt) {
        algo["delta"] = config.algorithm.delta;
    }
    if (config.algorithm.kind == AlgorithmKind::SafeOpt) {
        if (config.algorithm.b) algo["b"] = *config.algorithm.b;
        if (config.algorithm.b_ratio) algo["b_ratio"] = *config.algorithm.b_ratio;
    }
    if (config.algorithm.kind == AlgorithmKind::FixedBeta) {
        if (config.algorithm.fixed_beta_infinite) {
            algo["infinite"] = true;
        } else {
            algo["beta"] = config.algorithm.fixed_beta;
        }
    }
    j["algorithm"] = std::move(algo);

    nlohmann::ordered_json sweep = nlohmann::ordered_json::object();
    if (!config.sweep.b_ratios.empty()) sweep["b_ratios"] = config.sweep.b_ratios;
    if (!config.sweep.alphas.empty()) sweep["alphas"] = config.sweep.alphas;
    if (!config.sweep.sigma_q2s.empty()) sweep["sigma_q2s"] = config.sweep.sigma_q2s;
    if (!config.sweep.bandwidths.empty()) sweep["bandwidths"] = config.sweep.bandwidths;
    j["sweep"] = std::move(sweep);
    j["replications"] = config.replications;
    j["replications_full"] = config.replications_full;
    j["seed"] = config.seed;
    j["out_dir"] = config.out_dir;
    return j;
}

const char* benchmark_kind_name(BenchmarkKind kind) {
    return kind == BenchmarkKind::Synthetic ? "synthetic" : "movielens";
}

const char* algorithm_kind_name(AlgorithmKind kind) {
    switch (kind) {
        case AlgorithmKind::SafeOpt: return "safeopt";
        case AlgorithmKind::DSafeBocp: return "d-safe-bocp";
        case AlgorithmKind::PSafeBocp: return "p-safe-bocp";
        case AlgorithmKind::FixedBeta: return "fixed-beta";
    }
    return "unknown";
}

}  // namespace safebocp
