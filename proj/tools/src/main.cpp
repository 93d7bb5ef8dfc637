#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fetch.hpp"
#include "safebocp/config.hpp"
#include "safebocp/errors.hpp"
#include "safebocp/experiments.hpp"
#include "safebocp/version.hpp"

namespace {

using namespace safebocp;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> replications;
    std::optional<std::string> out;
    bool full = false;
    int jobs = 1;
};

void apply_overrides(ExperimentConfig& config, const Overrides& ov) {
    if (ov.seed) config.seed = *ov.seed;
    if (ov.replications) config.replications = *ov.replications;
    if (ov.full) config.replications = config.replications_full;
    if (ov.out) config.out_dir = *ov.out;
}

ExperimentConfig config_from_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("manifest is not readable: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("manifest is not valid JSON: " + std::string(e.what()));
    }
    if (!j.contains("config")) throw ConfigError("manifest has no config block: " + path);
    return parse_config_json(j.at("config"));
}

int cmd_run(const ExperimentConfig& config, int point_index, int replication) {
    TrialRecord record = run_single_trial(config, point_index, replication);
    std::cout << trial_to_json(record).dump() << "\n";
    if (record.failed) {
        std::cerr << "trial failed: " << record.failure << "\n";
        return 1;
    }
    return 0;
}

int cmd_sweep(ExperimentConfig config, const Overrides& ov) {
    apply_overrides(config, ov);
    ExperimentResult result = run_experiment(config, ov.jobs);
    persist(config, result, config.out_dir);

    std::printf("%-64s %6s %5s %10s %7s %10s %9s\n", "sweep point", "trials", "fail",
                "viol_mean", "alpha", "ratio_mean", "guarantee");
    bool guarantee_failed = false;
    bool trial_failed = false;
    for (const AggregateRow& row : result.aggregates) {
        char viol[24], ratio[24], alpha[16];
        std::snprintf(viol, sizeof viol, "%.4f", row.violation_mean);
        if (std::isnan(row.ratio_mean)) {
            std::snprintf(ratio, sizeof ratio, "%s", "-");
        } else {
            std::snprintf(ratio, sizeof ratio, "%.4f", row.ratio_mean);
        }
        if (row.point.alpha) {
            std::snprintf(alpha, sizeof alpha, "%.3f", *row.point.alpha);
        } else {
            std::snprintf(alpha, sizeof alpha, "%s", "-");
        }
        const char* guarantee =
            row.guarantee_applicable ? (row.guarantee_ok ? "pass" : "FAIL") : "n/a";
        std::printf("%-64s %6d %5d %10s %7s %10s %9s\n", row.point.key.c_str(), row.trials,
                    row.failures, viol, alpha, ratio, guarantee);
        if (row.guarantee_applicable && !row.guarantee_ok) guarantee_failed = true;
        if (row.failures > 0) trial_failed = true;
    }
    std::printf("wrote %s/manifest.json (+ trials.ndjson, aggregates.csv)\n",
                config.out_dir.c_str());
    if (guarantee_failed) std::cerr << "hard guarantee violated\n";
    if (trial_failed) std::cerr << "some trials failed; see trials.ndjson\n";
    return guarantee_failed || trial_failed ? 1 : 0;
}

int cmd_inspect(const ExperimentConfig& config) {
    std::cout << config_to_json(config).dump(2) << "\n";
    std::vector<SweepPoint> points = expand_sweep(config);
    std::printf("%zu sweep point(s), %d replication(s) each:\n", points.size(),
                config.replications);
    for (size_t i = 0; i < points.size(); ++i) {
        std::printf("  [%zu] %s\n", i, points[i].key.c_str());
    }
    return 0;
}

std::string default_data_dir() {
    if (const char* dir = std::getenv("SAFEBOCP_DATA_DIR")) return dir;
    return "data";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Safe Bayesian optimization experiments over finite candidate sets"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    std::string config_path, manifest_path;
    int point_index = 0, replication = 0;
    Overrides ov;

    CLI::App* run = app.add_subcommand(
        "run", "Run one trial and print its record as a JSON line (replay tool)");
    CLI::Option* run_config = run->add_option("--config", config_path, "experiment config file");
    CLI::Option* run_manifest =
        run->add_option("--manifest", manifest_path, "manifest.json of a previous sweep");
    run_config->excludes(run_manifest);
    run->add_option("--point-index", point_index, "sweep point index")
        ->required()
        ->check(CLI::NonNegativeNumber);
    run->add_option("--replication", replication, "replication index")
        ->required()
        ->check(CLI::NonNegativeNumber);
    run->add_option("--seed", ov.seed, "override the experiment seed");

    CLI::App* sweep = app.add_subcommand("sweep", "Run the configured sweep and persist results");
    sweep->add_option("--config", config_path, "experiment config file")->required();
    sweep->add_option("--seed", ov.seed, "override the experiment seed");
    sweep->add_option("--replications", ov.replications, "override replications per sweep point")
        ->check(CLI::PositiveNumber);
    sweep->add_option("--out", ov.out, "override the output directory");
    sweep->add_flag("--full", ov.full, "use the full-scale replication count");
    sweep->add_option("--jobs", ov.jobs, "worker thread cap")->check(CLI::PositiveNumber);

    CLI::App* inspect =
        app.add_subcommand("inspect", "Print the effective config and sweep points, run nothing");
    inspect->add_option("--config", config_path, "experiment config file")->required();
    inspect->add_option("--seed", ov.seed, "override the experiment seed");
    inspect->add_option("--replications", ov.replications, "override replications per sweep point")
        ->check(CLI::PositiveNumber);

    cli::FetchOptions fetch_options;
    fetch_options.dest_dir = default_data_dir();
    CLI::App* fetch = app.add_subcommand("fetch-data", "Download and verify a benchmark dataset");
    fetch->add_option("--dataset", fetch_options.dataset, "dataset id (ml-100k)");
    fetch->add_option("--dest", fetch_options.dest_dir,
                      "target directory (default: $SAFEBOCP_DATA_DIR or ./data)");
    fetch->add_option("--url", fetch_options.url, "archive url");
    fetch->add_option("--md5", fetch_options.md5, "expected archive checksum");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (run->parsed()) {
            if (config_path.empty() == manifest_path.empty()) {
                std::cerr << "run needs exactly one of --config or --manifest\n";
                return 2;
            }
            ExperimentConfig config = manifest_path.empty() ? load_config(config_path)
                                                            : config_from_manifest(manifest_path);
            if (ov.seed) config.seed = *ov.seed;
            return cmd_run(config, point_index, replication);
        }
        if (sweep->parsed()) return cmd_sweep(load_config(config_path), ov);
        if (inspect->parsed()) {
            ExperimentConfig config = load_config(config_path);
            apply_overrides(config, ov);
            return cmd_inspect(config);
        }
        if (fetch->parsed()) return cli::cmd_fetch_data(fetch_options);
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
