#include "safebocp/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <thread>

#include "safebocp/blackbox.hpp"
#include "safebocp/candidates.hpp"
#include "safebocp/config.hpp"
#include "safebocp/controller.hpp"
#include "safebocp/errors.hpp"
#include "safebocp/gp.hpp"
#include "safebocp/rng.hpp"
#include "safebocp/safeopt.hpp"
#include "safebocp/version.hpp"

namespace safebocp {

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void append_axis(std::string& key, const char* name, double value) {
    if (!key.empty()) key += ";";
    key += name;
    key += "=";
    key += format_double(value);
}

}  // namespace

std::vector<SweepPoint> expand_sweep(const ExperimentConfig& config) {
    const AlgorithmConfig& algo = config.algorithm;
    const SweepAxes& axes = config.sweep;
    bool safeopt = algo.kind == AlgorithmKind::SafeOpt;
    bool controller = algo.kind == AlgorithmKind::DSafeBocp || algo.kind == AlgorithmKind::PSafeBocp;

    std::vector<std::optional<double>> ratio_axis;
    if (safeopt && !axes.b_ratios.empty()) {
        for (double v : axes.b_ratios) ratio_axis.push_back(v);
    } else if (safeopt && algo.b_ratio) {
        ratio_axis.push_back(*algo.b_ratio);
    } else {
        ratio_axis.push_back(std::nullopt);
    }

    std::vector<std::optional<double>> alpha_axis;
    if (controller && !axes.alphas.empty()) {
        for (double v : axes.alphas) alpha_axis.push_back(v);
    } else if (controller) {
        alpha_axis.push_back(algo.alpha);
    } else {
        alpha_axis.push_back(std::nullopt);
    }

    std::vector<double> sigma_axis = axes.sigma_q2s.empty() ? std::vector<double>{0.0}
                                                            : axes.sigma_q2s;

    std::vector<std::optional<double>> bandwidth_axis;
    if (config.benchmark.kind == BenchmarkKind::Synthetic) {
        if (!axes.bandwidths.empty()) {
            for (double v : axes.bandwidths) bandwidth_axis.push_back(v);
        } else {
            bandwidth_axis.push_back(config.benchmark.synthetic.surrogate_bandwidth);
        }
    } else {
        bandwidth_axis.push_back(std::nullopt);
    }

    std::vector<SweepPoint> out;
    for (const auto& ratio : ratio_axis) {
        for (const auto& alpha : alpha_axis) {
            for (double sigma_q2 : sigma_axis) {
                for (const auto& bandwidth : bandwidth_axis) {
                    SweepPoint p;
                    p.b_ratio = ratio;
                    if (safeopt && !ratio) p.b = algo.b;
                    p.alpha = alpha;
                    p.sigma_q2 = sigma_q2;
                    p.bandwidth = bandwidth;
                    if (p.b_ratio) append_axis(p.key, "b_ratio", *p.b_ratio);
                    if (p.b) append_axis(p.key, "b", *p.b);
                    if (p.alpha) append_axis(p.key, "alpha", *p.alpha);
                    append_axis(p.key, "sigma_q2", p.sigma_q2);
                    if (p.bandwidth) append_axis(p.key, "bandwidth", *p.bandwidth);
                    out.push_back(std::move(p));
                }
            }
        }
    }
    return out;
}

nlohmann::ordered_json trial_to_json(const TrialRecord& record) {
    nlohmann::ordered_json j;
    j["sweep_key"] = record.sweep_key;
    j["replication"] = record.replication;
    j["seed"] = record.seed;
    if (record.user) j["user"] = *record.user;
    j["failed"] = record.failed;
    if (record.failed) j["failure"] = record.failure;
    nlohmann::ordered_json steps;
    steps["x"] = record.steps.x;
    steps["f_true"] = record.steps.f_true;
    steps["q_true"] = record.steps.q_true;
    steps["err"] = record.steps.err;
    nlohmann::ordered_json betas = nlohmann::ordered_json::array();
    for (double b : record.steps.beta) {
        if (std::isinf(b)) {
            betas.push_back("INFINITE");
        } else {
            betas.push_back(b);
        }
    }
    steps["beta"] = std::move(betas);
    j["steps"] = std::move(steps);
    if (!record.failed) {
        j["final_index"] = record.final_index;
        if (std::isinf(record.final_beta)) {
            j["final_beta"] = "INFINITE";
        } else {
            j["final_beta"] = record.final_beta;
        }
        j["violations"] = record.violations;
        j["violation_rate"] = record.violation_rate;
        j["f_opt"] = record.f_opt;
        j["f_final"] = record.f_final;
        if (record.optimality_ratio) {
            j["optimality_ratio"] = *record.optimality_ratio;
        } else {
            j["optimality_ratio"] = nullptr;
        }
    }
    return j;
}

TrialRecord trial_from_json(const nlohmann::json& j) {
    TrialRecord r;
    r.sweep_key = j.at("sweep_key").get<std::string>();
    r.replication = j.at("replication").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("user")) r.user = j.at("user").get<int>();
    r.failed = j.at("failed").get<bool>();
    if (j.contains("failure")) r.failure = j.at("failure").get<std::string>();
    const nlohmann::json& steps = j.at("steps");
    r.steps.x = steps.at("x").get<std::vector<int>>();
    r.steps.f_true = steps.at("f_true").get<std::vector<double>>();
    r.steps.q_true = steps.at("q_true").get<std::vector<double>>();
    r.steps.err = steps.at("err").get<std::vector<int>>();
    for (const nlohmann::json& b : steps.at("beta")) {
        r.steps.beta.push_back(b.is_string() ? kInf : b.get<double>());
    }
    if (!r.failed) {
        r.final_index = j.at("final_index").get<int>();
        const nlohmann::json& fb = j.at("final_beta");
        r.final_beta = fb.is_string() ? kInf : fb.get<double>();
        r.violations = j.at("violations").get<int>();
        r.violation_rate = j.at("violation_rate").get<double>();
        r.f_opt = j.at("f_opt").get<double>();
        r.f_final = j.at("f_final").get<double>();
        const nlohmann::json& ratio = j.at("optimality_ratio");
        if (!ratio.is_null()) r.optimality_ratio = ratio.get<double>();
    }
    return r;
}

WilsonInterval wilson_interval(int successes, int n) {
    if (n <= 0) throw ConfigError("wilson_interval: sample size must be positive");
    if (successes < 0 || successes > n) {
        throw ConfigError("wilson_interval: successes must lie in [0, n]");
    }
    const double z = 1.959963984540054;  // standard normal 97.5% quantile
    double nn = static_cast<double>(n);
    double p = static_cast<double>(successes) / nn;
    double z2 = z * z;
    double denom = 1.0 + z2 / nn;
    double center = (p + z2 / (2.0 * nn)) / denom;
    double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double nearest_rank(std::vector<double> values, double percentile) {
    if (values.empty()) throw ConfigError("nearest_rank: empty sample");
    if (!(percentile > 0.0 && percentile <= 100.0)) {
        throw ConfigError("nearest_rank: percentile must lie in (0,100]");
    }
    std::sort(values.begin(), values.end());
    auto rank = static_cast<size_t>(std::ceil(percentile / 100.0 * static_cast<double>(values.size())));
    if (rank < 1) rank = 1;
    if (rank > values.size()) rank = values.size();
    return values[rank - 1];
}

namespace {

// Per-sweep-point precomputation: surrogate kernel, shared candidate Gram, and
// either a fixed scaling schedule (rounds 1..T plus the final decision) or the
// controller configuration instantiated fresh per trial.
struct PointPlan {
    SweepPoint point;
    KernelSpec kernel;
    std::shared_ptr<const Eigen::MatrixXd> gram;  // synthetic only; movielens grams are per user
    std::vector<double> schedule;
    bool infinite = false;
    std::optional<ControllerConfig> controller;
};

struct SyntheticContext {
    Eigen::MatrixXd grid;
    std::optional<CandidateSet> candidates;
    Eigen::VectorXd q_values;
    double norm = 0.0;
    Eigen::MatrixXd factor;
    int s0 = 0;
};

struct UserContext {
    int user = 0;
    std::optional<CandidateSet> candidates;
    std::shared_ptr<const Eigen::MatrixXd> gram;
    TableBlackBox box;
    double f_opt = 0.0;
    int s0 = 0;
};

struct MovielensContext {
    std::int64_t rows = 0;
    int n_users = 0;
    int n_movies = 0;
    double train_rmse = 0.0;
    std::vector<int> training_users;
    std::vector<int> test_users;
    std::vector<int> skipped_users;
    std::vector<UserContext> users;
};

struct BetaProvider {
    std::optional<Controller> controller;
    const std::vector<double>* schedule = nullptr;
    bool infinite = false;
    int round = 0;

    ScalingBeta current() const {
        if (controller) return controller->beta();
        if (infinite) return ScalingBeta::infinite();
        return ScalingBeta::finite((*schedule)[static_cast<size_t>(round)]);
    }
    int feedback(double z) {
        int err;
        if (controller) {
            err = controller->error_signal(z) ? 1 : 0;
            controller->step(z);
        } else {
            err = z < 0.0 ? 1 : 0;
        }
        ++round;
        return err;
    }
};

void fill_algorithm_plan(PointPlan& plan, const ExperimentConfig& config,
                         const CandidateSet* candidates, double norm) {
    const AlgorithmConfig& algo = config.algorithm;
    const int horizon = config.benchmark.horizon;
    switch (algo.kind) {
        case AlgorithmKind::SafeOpt: {
            double bound = plan.point.b ? *plan.point.b : *plan.point.b_ratio * norm;
            double sigma_q = std::sqrt(plan.point.sigma_q2);
            if (sigma_q == 0.0) {
                plan.schedule.assign(static_cast<size_t>(horizon) + 1, bound);
            } else if (!candidates) {
                throw ConfigError("safeopt under noise needs a shared candidate set; "
                                  "movielens feedback is noiseless");
            } else {
                // round 1 sees zero observations' worth of information
                plan.schedule.push_back(bound +
                                        4.0 * sigma_q * std::sqrt(1.0 - std::log(algo.delta)));
                std::vector<double> tail =
                    rkhs_beta_schedule(bound, sigma_q, algo.delta, horizon, *candidates, plan.kernel);
                plan.schedule.insert(plan.schedule.end(), tail.begin(), tail.end());
            }
            break;
        }
        case AlgorithmKind::FixedBeta: {
            if (algo.fixed_beta_infinite) {
                plan.infinite = true;
            } else {
                plan.schedule.assign(static_cast<size_t>(horizon) + 1, algo.fixed_beta);
            }
            break;
        }
        case AlgorithmKind::DSafeBocp:
        case AlgorithmKind::PSafeBocp: {
            ControllerConfig cc;
            cc.variant = algo.kind == AlgorithmKind::DSafeBocp ? ErrorVariant::Deterministic
                                                               : ErrorVariant::Probabilistic;
            cc.alpha = *plan.point.alpha;
            cc.eta = algo.eta;
            cc.horizon = horizon;
            cc.delta_alpha_init = algo.delta_alpha_init;
            cc.noise_sd = std::sqrt(plan.point.sigma_q2);
            cc.delta = algo.delta;
            plan.controller = cc;
            break;
        }
    }
}

std::string resolve_data_path(const BenchmarkConfig& bench) {
    if (!bench.data_path.empty()) return bench.data_path;
    if (const char* dir = std::getenv("SAFEBOCP_DATA_DIR")) {
        return std::string(dir) + "/u.data";
    }
    return "data/u.data";
}

}  // namespace

struct ExperimentContext::Impl {
    ExperimentConfig config;
    std::vector<SweepPoint> sweep_points;
    std::vector<PointPlan> plans;
    std::optional<SyntheticContext> synthetic;
    std::optional<MovielensContext> movielens;
};

ExperimentContext::ExperimentContext() : impl_(new Impl) {}
ExperimentContext::~ExperimentContext() = default;
ExperimentContext::ExperimentContext(ExperimentContext&&) noexcept = default;
ExperimentContext& ExperimentContext::operator=(ExperimentContext&&) noexcept = default;

ExperimentContext ExperimentContext::build(const ExperimentConfig& config) {
    ExperimentContext ctx;
    Impl& im = *ctx.impl_;
    im.config = config;
    im.sweep_points = expand_sweep(config);

    if (config.benchmark.kind == BenchmarkKind::Synthetic) {
        SyntheticContext sc;
        const SyntheticSpec& spec = config.benchmark.synthetic;
        sc.grid = make_grid(spec);
        sc.q_values = constraint_values(spec, sc.grid);
        sc.s0 = initial_safe_index(spec, sc.grid);
        sc.norm = constraint_rkhs_norm(spec);
        sc.factor = objective_factor(spec, sc.grid);
        sc.candidates.emplace(sc.grid, std::vector<int>{sc.s0});
        im.synthetic = std::move(sc);

        std::map<double, std::shared_ptr<const Eigen::MatrixXd>> grams;
        for (const SweepPoint& point : im.sweep_points) {
            PointPlan plan;
            plan.point = point;
            double h = point.bandwidth.value_or(spec.surrogate_bandwidth);
            plan.kernel = KernelSpec::rbf(h);
            auto it = grams.find(h);
            if (it == grams.end()) {
                it = grams.emplace(h, std::make_shared<const Eigen::MatrixXd>(
                                          gram(plan.kernel, im.synthetic->grid)))
                         .first;
            }
            plan.gram = it->second;
            fill_algorithm_plan(plan, config, &*im.synthetic->candidates, im.synthetic->norm);
            im.plans.push_back(std::move(plan));
        }
    } else {
        RatingsTable table = ingest(resolve_data_path(config.benchmark));
        MovielensContext mc;
        mc.rows = table.report.rows_kept;
        mc.n_users = static_cast<int>(table.users.size());
        mc.n_movies = static_cast<int>(table.movies.size());
        mc.training_users = select_training_users(
            table, config.benchmark.training_users,
            derive_seed(config.seed, "movielens-train-split", 0));
        FactorizeOptions options = config.benchmark.factorization;
        options.seed = derive_seed(config.seed, "movielens-factorization", 0);
        FactorizationModel model = factorize(table, mc.training_users, options);
        mc.train_rmse = model.train_rmse;
        mc.test_users = select_test_users(table, mc.training_users, config.benchmark.test_users);
        if (mc.test_users.empty()) {
            throw DataError("movielens: no eligible test user outside the training split");
        }
        for (int user : mc.test_users) {
            auto data = build_user_blackbox(model, table, user,
                                            derive_seed(config.seed, "movielens-seed-movie",
                                                        static_cast<std::uint64_t>(user)));
            if (!data) {
                mc.skipped_users.push_back(user);
                continue;
            }
            UserContext uc;
            uc.user = user;
            uc.s0 = data->seed_safe_index;
            uc.candidates.emplace(data->points, std::vector<int>{data->seed_safe_index});
            uc.gram = std::make_shared<const Eigen::MatrixXd>(
                gram(KernelSpec::linear(), data->points));
            uc.box = TableBlackBox(data->values, data->values, 0.0, 0.0);
            uc.f_opt = *uc.box.feasible_optimum();  // the seed movie is feasible by construction
            mc.users.push_back(std::move(uc));
        }
        if (mc.users.empty()) {
            throw DataError("movielens: every test user lacks a rating-4 seed movie");
        }
        im.movielens = std::move(mc);
        for (const SweepPoint& point : im.sweep_points) {
            PointPlan plan;
            plan.point = point;
            plan.kernel = KernelSpec::linear();
            fill_algorithm_plan(plan, config, nullptr, 0.0);
            im.plans.push_back(std::move(plan));
        }
    }
    return ctx;
}

const std::vector<SweepPoint>& ExperimentContext::points() const { return impl_->sweep_points; }

int ExperimentContext::replications() const { return impl_->config.replications; }

TrialRecord ExperimentContext::run(int point_index, int replication) const {
    const Impl& im = *impl_;
    if (point_index < 0 || point_index >= static_cast<int>(im.plans.size())) {
        throw ConfigError("trial: sweep point index out of range");
    }
    if (replication < 0) throw ConfigError("trial: replication must be nonnegative");
    const PointPlan& plan = im.plans[static_cast<size_t>(point_index)];
    const int horizon = im.config.benchmark.horizon;

    TrialRecord record;
    record.sweep_key = plan.point.key;
    record.replication = replication;
    record.seed = derive_seed(im.config.seed, plan.point.key,
                              static_cast<std::uint64_t>(replication));
    try {
        Rng rng(record.seed);
        const CandidateSet* candidates = nullptr;
        const TableBlackBox* box = nullptr;
        TableBlackBox local_box;
        std::shared_ptr<const Eigen::MatrixXd> g = plan.gram;
        double objective_noise_power = 0.0;

        if (im.synthetic) {
            const SyntheticContext& sc = *im.synthetic;
            Eigen::VectorXd f = sample_objective(sc.factor, rng);
            objective_noise_power = im.config.benchmark.synthetic.objective_noise_power;
            local_box = TableBlackBox(std::move(f), sc.q_values,
                                      std::sqrt(objective_noise_power),
                                      std::sqrt(plan.point.sigma_q2));
            box = &local_box;
            candidates = &*sc.candidates;
        } else {
            const MovielensContext& mc = *im.movielens;
            const UserContext& uc =
                mc.users[static_cast<size_t>(replication) % mc.users.size()];
            record.user = uc.user;
            box = &uc.box;
            candidates = &*uc.candidates;
            g = uc.gram;
        }

        GpPrior f_prior{0.0, plan.kernel, objective_noise_power};
        GpPrior q_prior{0.0, plan.kernel, plan.point.sigma_q2};
        GpModel f_model(f_prior);
        GpModel q_model(q_prior);
        SafeOptCache cache{g, g, {}};
        for (int s : candidates->seed_safe()) {
            Observation obs = box->query(s, rng);
            f_model = f_model.extend(candidates->point(s), obs.y);
            q_model = q_model.extend(candidates->point(s), obs.z);
            cache.observed.push_back(s);
        }

        BetaProvider provider;
        if (plan.controller) {
            provider.controller.emplace(*plan.controller);
        } else if (plan.infinite) {
            provider.infinite = true;
        } else {
            provider.schedule = &plan.schedule;
        }

        for (int t = 0; t < horizon; ++t) {
            ScalingBeta beta_q = provider.current();
            SafeOptState state{f_model, q_model, im.config.algorithm.beta_f, beta_q};
            int x = acquire(state, *candidates, &cache);
            Observation obs = box->query(x, rng);
            int err = provider.feedback(obs.z);
            record.steps.x.push_back(x);
            record.steps.f_true.push_back(box->objective(x));
            record.steps.q_true.push_back(box->constraint(x));
            record.steps.err.push_back(err);
            record.steps.beta.push_back(beta_q.is_infinite() ? kInf : beta_q.value());
            if (box->constraint(x) < 0.0) ++record.violations;
            f_model = f_model.extend(candidates->point(x), obs.y);
            q_model = q_model.extend(candidates->point(x), obs.z);
            cache.observed.push_back(x);
        }

        ScalingBeta final_beta = provider.current();
        record.final_beta = final_beta.is_infinite() ? kInf : final_beta.value();
        SafeOptState state{f_model, q_model, im.config.algorithm.beta_f, final_beta};
        record.final_index = final_decision(state, *candidates, &cache);
        record.violation_rate = static_cast<double>(record.violations) / horizon;
        auto f_opt = box->feasible_optimum();
        if (!f_opt) throw DataError("trial: no feasible candidate exists");
        record.f_opt = *f_opt;
        record.f_final = box->objective(record.final_index);
        if (record.f_opt > 0.0) record.optimality_ratio = record.f_final / record.f_opt;
    } catch (const std::exception& e) {
        record.failed = true;
        record.failure = e.what();
    }
    return record;
}

nlohmann::ordered_json ExperimentContext::benchmark_metadata() const {
    const Impl& im = *impl_;
    nlohmann::ordered_json j;
    if (im.synthetic) {
        const SyntheticContext& sc = *im.synthetic;
        const SyntheticSpec& spec = im.config.benchmark.synthetic;
        j["kind"] = "synthetic";
        j["grid_size"] = spec.grid_size;
        j["low"] = spec.low;
        j["high"] = spec.high;
        j["step"] = (spec.high - spec.low) / (spec.grid_size - 1);
        j["true_bandwidth"] = spec.true_bandwidth;
        j["constraint_rkhs_norm"] = sc.norm;
        j["initial_safe_index"] = sc.s0;
        j["constraint_at_seed"] = sc.q_values(sc.s0);
    } else {
        const MovielensContext& mc = *im.movielens;
        j["kind"] = "movielens";
        j["rows"] = mc.rows;
        j["users"] = mc.n_users;
        j["movies"] = mc.n_movies;
        j["train_rmse"] = mc.train_rmse;
        j["training_users"] = static_cast<int>(mc.training_users.size());
        j["test_users"] = mc.test_users;
        j["skipped_users"] = mc.skipped_users;
        nlohmann::ordered_json per_user = nlohmann::ordered_json::array();
        for (const UserContext& uc : mc.users) {
            nlohmann::ordered_json u;
            u["user"] = uc.user;
            u["candidates"] = uc.candidates->size();
            u["seed_safe_index"] = uc.s0;
            u["f_opt"] = uc.f_opt;
            per_user.push_back(std::move(u));
        }
        j["per_user"] = std::move(per_user);
    }
    return j;
}

std::vector<AggregateRow> aggregate(const ExperimentConfig& config,
                                    const std::vector<SweepPoint>& points,
                                    const std::vector<TrialRecord>& trials) {
    const int horizon = config.benchmark.horizon;
    std::map<std::string, size_t> index_of;
    for (size_t i = 0; i < points.size(); ++i) index_of[points[i].key] = i;
    std::vector<std::vector<const TrialRecord*>> grouped(points.size());
    for (const TrialRecord& t : trials) {
        auto it = index_of.find(t.sweep_key);
        if (it == index_of.end()) {
            throw DataError("aggregate: trial references unknown sweep point " + t.sweep_key);
        }
        grouped[it->second].push_back(&t);
    }

    std::vector<AggregateRow> rows(points.size());
    for (size_t i = 0; i < points.size(); ++i) {
        AggregateRow& row = rows[i];
        row.point = points[i];
        row.trials = static_cast<int>(grouped[i].size());
        row.guarantee_applicable = config.algorithm.kind == AlgorithmKind::DSafeBocp;
        std::vector<double> violation, ratio;
        double violation_sum = 0.0, ratio_sum = 0.0;
        int successes = 0, excess = 0;
        for (const TrialRecord* t : grouped[i]) {
            if (t->failed) {
                ++row.failures;
                continue;
            }
            ++successes;
            violation.push_back(t->violation_rate);
            violation_sum += t->violation_rate;
            if (t->optimality_ratio) {
                ratio.push_back(*t->optimality_ratio);
                ratio_sum += *t->optimality_ratio;
            } else {
                ++row.undefined_ratio;
            }
            if (points[i].alpha) {
                bool over = static_cast<double>(t->violations) > *points[i].alpha * horizon + 1e-9;
                if (over) {
                    ++excess;
                    if (row.guarantee_applicable) row.guarantee_ok = false;
                }
            }
        }
        if (!violation.empty()) {
            row.violation_mean = violation_sum / static_cast<double>(violation.size());
            row.violation_lo = nearest_rank(violation, 2.5);
            row.violation_hi = nearest_rank(violation, 97.5);
        } else {
            row.violation_mean = row.violation_lo = row.violation_hi = kNan;
        }
        if (!ratio.empty()) {
            row.ratio_mean = ratio_sum / static_cast<double>(ratio.size());
            row.ratio_lo = nearest_rank(ratio, 2.5);
            row.ratio_hi = nearest_rank(ratio, 97.5);
        } else {
            row.ratio_mean = row.ratio_lo = row.ratio_hi = kNan;
        }
        if (points[i].alpha && successes > 0) {
            row.excess_prob = static_cast<double>(excess) / successes;
            WilsonInterval w = wilson_interval(excess, successes);
            row.excess_lo = w.lower;
            row.excess_hi = w.upper;
        }
    }
    return rows;
}

ExperimentResult run_experiment(const ExperimentConfig& config, int jobs) {
    ExperimentContext ctx = ExperimentContext::build(config);
    ExperimentResult result;
    result.points = ctx.points();
    result.benchmark_metadata = ctx.benchmark_metadata();
    const int replications = config.replications;
    const size_t total = result.points.size() * static_cast<size_t>(replications);
    result.trials.resize(total);

    auto body = [&](size_t i) {
        result.trials[i] = ctx.run(static_cast<int>(i / static_cast<size_t>(replications)),
                                   static_cast<int>(i % static_cast<size_t>(replications)));
    };
    if (jobs <= 1 || total <= 1) {
        for (size_t i = 0; i < total; ++i) body(i);
    } else {
        std::atomic<size_t> next{0};
        size_t workers = std::min(static_cast<size_t>(jobs), total);
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (true) {
                    size_t i = next.fetch_add(1);
                    if (i >= total) break;
                    body(i);
                }
            });
        }
        for (std::thread& t : pool) t.join();
    }
    result.aggregates = aggregate(config, result.points, result.trials);
    return result;
}

TrialRecord run_single_trial(const ExperimentConfig& config, int point_index, int replication) {
    ExperimentContext ctx = ExperimentContext::build(config);
    return ctx.run(point_index, replication);
}

std::string aggregates_csv(const ExperimentConfig& config, const std::vector<AggregateRow>& rows) {
    (void)config;
    std::string out =
        "point_index,sweep_key,b_ratio,b,alpha,sigma_q2,bandwidth,trials,failures,"
        "undefined_ratio,violation_mean,violation_lo,violation_hi,ratio_mean,ratio_lo,ratio_hi,"
        "excess_prob,excess_lo,excess_hi,guarantee\n";
    auto opt_cell = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string();
    };
    auto num_cell = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
    int index = 0;
    for (const AggregateRow& r : rows) {
        out += std::to_string(index++) + "," + r.point.key + "," + opt_cell(r.point.b_ratio) +
               "," + opt_cell(r.point.b) + "," + opt_cell(r.point.alpha) + "," +
               format_double(r.point.sigma_q2) + "," + opt_cell(r.point.bandwidth) + "," +
               std::to_string(r.trials) + "," + std::to_string(r.failures) + "," +
               std::to_string(r.undefined_ratio) + "," + num_cell(r.violation_mean) + "," +
               num_cell(r.violation_lo) + "," + num_cell(r.violation_hi) + "," +
               num_cell(r.ratio_mean) + "," + num_cell(r.ratio_lo) + "," +
               num_cell(r.ratio_hi) + "," + opt_cell(r.excess_prob) + "," +
               opt_cell(r.excess_lo) + "," + opt_cell(r.excess_hi) + "," +
               (r.guarantee_applicable ? (r.guarantee_ok ? "pass" : "fail") : "n/a") + "\n";
    }
    return out;
}

void persist(const ExperimentConfig& config, const ExperimentResult& result,
             const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw DataError("cannot create output directory " + out_dir + ": " + ec.message());
    }
    auto write_file = [&](const std::string& name, const std::string& content) {
        fs::path path = fs::path(out_dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot open for writing: " + path.string());
        out << content;
        out.flush();
        if (!out.good()) throw DataError("write failed: " + path.string());
    };

    int failures = 0;
    for (const TrialRecord& t : result.trials) {
        if (t.failed) ++failures;
    }

    bool have_trials = !result.trials.empty();
    if (have_trials) {
        std::string nd;
        for (const TrialRecord& t : result.trials) {
            nd += trial_to_json(t).dump();
            nd += "\n";
        }
        write_file("trials.ndjson", nd);
        write_file("aggregates.csv", aggregates_csv(config, result.aggregates));
    }

    nlohmann::ordered_json manifest;
    manifest["version"] = kVersion;
    manifest["config"] = config_to_json(config);
    auto opt_json = [](const std::optional<double>& v) {
        return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    nlohmann::ordered_json points = nlohmann::ordered_json::array();
    for (const SweepPoint& p : result.points) {
        nlohmann::ordered_json pj;
        pj["key"] = p.key;
        pj["b_ratio"] = opt_json(p.b_ratio);
        pj["b"] = opt_json(p.b);
        pj["alpha"] = opt_json(p.alpha);
        pj["sigma_q2"] = p.sigma_q2;
        pj["bandwidth"] = opt_json(p.bandwidth);
        points.push_back(std::move(pj));
    }
    manifest["sweep_points"] = std::move(points);
    manifest["benchmark"] = result.benchmark_metadata;
    manifest["replications"] = config.replications;
    manifest["failures"] = failures;
    if (have_trials) {
        manifest["trials_file"] = "trials.ndjson";
        manifest["aggregates_file"] = "aggregates.csv";
    } else {
        manifest["trials_file"] = nullptr;
        manifest["aggregates_file"] = nullptr;
    }
    write_file("manifest.json", manifest.dump(2) + "\n");
}

}  // namespace safebocp
