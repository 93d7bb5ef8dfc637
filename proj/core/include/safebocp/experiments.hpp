#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safebocp/movielens.hpp"
#include "safebocp/synthetic.hpp"

namespace safebocp {

enum class BenchmarkKind { Synthetic, Movielens };
enum class AlgorithmKind { SafeOpt, DSafeBocp, PSafeBocp, FixedBeta };

struct BenchmarkConfig {
    BenchmarkKind kind = BenchmarkKind::Synthetic;
    int horizon = 25;  // feedback rounds per trial

    SyntheticSpec synthetic;  // synthetic only

    // movielens only
    std::string data_path;
    int training_users = 200;
    int test_users = 10;
    FactorizeOptions factorization;  // seed is derived from the experiment seed
};

struct AlgorithmConfig {
    AlgorithmKind kind = AlgorithmKind::DSafeBocp;
    double beta_f = 3.0;  // objective interval scaling, all algorithms

    // controller kinds
    double alpha = 0.1;
    double eta = 2.0;
    double delta_alpha_init = 0.0;
    double delta = 0.1;  // reliability tail mass (also sizes the safeopt schedule under noise)

    // safeopt: exactly one of the two bounds
    std::optional<double> b;        // absolute bound on the constraint norm
    std::optional<double> b_ratio;  // bound as a multiple of the true constraint norm

    // fixed-beta
    double fixed_beta = 0.0;
    bool fixed_beta_infinite = false;
};

// Cartesian sweep over the listed axes; an empty axis contributes the single
// value configured on the benchmark/algorithm. The bandwidth axis overrides
// the synthetic surrogate bandwidth.
struct SweepAxes {
    std::vector<double> b_ratios;
    std::vector<double> alphas;
    std::vector<double> sigma_q2s;
    std::vector<double> bandwidths;
};

struct ExperimentConfig {
    BenchmarkConfig benchmark;
    AlgorithmConfig algorithm;
    SweepAxes sweep;
    int replications = 200;
    int replications_full = 1000;  // used when the full-scale flag is set
    std::uint64_t seed = 1;
    std::string out_dir = "results";
};

struct SweepPoint {
    std::optional<double> b_ratio;
    std::optional<double> b;
    std::optional<double> alpha;
    double sigma_q2 = 0.0;
    std::optional<double> bandwidth;
    std::string key;  // canonical axis string; feeds per-trial seed derivation
};

std::vector<SweepPoint> expand_sweep(const ExperimentConfig& config);

struct StepLog {
    std::vector<int> x;          // candidate index per round
    std::vector<double> f_true;  // noiseless objective at the iterate
    std::vector<double> q_true;  // noiseless constraint at the iterate
    std::vector<int> err;        // controller error signal (observed-negative for fixed scalings)
    std::vector<double> beta;    // constraint scaling per round; +inf encodes INFINITE
};

struct TrialRecord {
    std::string sweep_key;
    int replication = 0;
    std::uint64_t seed = 0;
    std::optional<int> user;  // movielens test user
    bool failed = false;
    std::string failure;
    StepLog steps;
    int final_index = -1;
    double final_beta = 0.0;  // +inf encodes INFINITE
    int violations = 0;
    double violation_rate = 0.0;
    double f_opt = 0.0;
    double f_final = 0.0;
    std::optional<double> optimality_ratio;  // absent when f_opt <= 0
};

nlohmann::ordered_json trial_to_json(const TrialRecord& record);
TrialRecord trial_from_json(const nlohmann::json& j);

struct WilsonInterval {
    double lower;
    double upper;
};

// 95% Wilson score interval for a binomial proportion.
WilsonInterval wilson_interval(int successes, int n);

// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value (1-based).
double nearest_rank(std::vector<double> values, double percentile);

struct AggregateRow {
    SweepPoint point;
    int trials = 0;
    int failures = 0;
    int undefined_ratio = 0;
    double violation_mean = 0.0, violation_lo = 0.0, violation_hi = 0.0;
    double ratio_mean = 0.0, ratio_lo = 0.0, ratio_hi = 0.0;
    std::optional<double> excess_prob, excess_lo, excess_hi;  // Pr(violation_rate > alpha)
    bool guarantee_applicable = false;  // per-run hard bound asserted (deterministic variant)
    bool guarantee_ok = true;
};

std::vector<AggregateRow> aggregate(const ExperimentConfig& config,
                                    const std::vector<SweepPoint>& points,
                                    const std::vector<TrialRecord>& trials);

struct ExperimentResult {
    std::vector<SweepPoint> points;
    std::vector<TrialRecord> trials;  // point-major, replication-minor
    std::vector<AggregateRow> aggregates;
    nlohmann::ordered_json benchmark_metadata;
};

// Prepared shared state for one experiment: grids, Gram factors, schedules,
// and (for movielens) the ingested table and factorization.
class ExperimentContext {
public:
    static ExperimentContext build(const ExperimentConfig& config);
    ~ExperimentContext();
    ExperimentContext(ExperimentContext&&) noexcept;
    ExperimentContext& operator=(ExperimentContext&&) noexcept;

    const std::vector<SweepPoint>& points() const;
    int replications() const;
    TrialRecord run(int point_index, int replication) const;
    nlohmann::ordered_json benchmark_metadata() const;

private:
    ExperimentContext();
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

ExperimentResult run_experiment(const ExperimentConfig& config, int jobs = 1);
TrialRecord run_single_trial(const ExperimentConfig& config, int point_index, int replication);

// Writes trials.ndjson, aggregates.csv and manifest.json under out_dir.
void persist(const ExperimentConfig& config, const ExperimentResult& result,
             const std::string& out_dir);

std::string aggregates_csv(const ExperimentConfig& config,
                           const std::vector<AggregateRow>& rows);

// Exact-round-trip decimal formatting used in every emitted table.
std::string format_double(double value);

}  // namespace safebocp
