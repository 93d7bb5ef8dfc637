#include <benchmark/benchmark.h>

#include "safebocp/experiments.hpp"
#include "safebocp/gp.hpp"
#include "safebocp/rng.hpp"
#include "safebocp/safeopt.hpp"
#include "safebocp/synthetic.hpp"

namespace {

using namespace safebocp;

SyntheticSpec spec_1000() { return SyntheticSpec{}; }

GpModel model_with_history(const Eigen::MatrixXd& grid, const Eigen::VectorXd& values,
                           int observations, double noise_power) {
    GpModel model(GpPrior{0.0, KernelSpec::rbf(1.0 / 1.62), noise_power});
    Rng rng(7);
    int n = static_cast<int>(grid.rows());
    for (int i = 0; i < observations; ++i) {
        int idx = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n));
        model = model.extend(grid.row(idx).transpose(), values(idx));
    }
    return model;
}

void bm_batch_posterior(benchmark::State& state) {
    SyntheticSpec spec = spec_1000();
    Eigen::MatrixXd grid = make_grid(spec);
    Eigen::VectorXd q = constraint_values(spec, grid);
    GpModel model = model_with_history(grid, q, 25, 0.01);
    for (auto _ : state) {
        BatchPosterior post = model.posterior_batch(grid);
        benchmark::DoNotOptimize(post.mean.sum() + post.sd.sum());
    }
}
BENCHMARK(bm_batch_posterior);

void bm_acquire_step(benchmark::State& state) {
    SyntheticSpec spec = spec_1000();
    Eigen::MatrixXd grid = make_grid(spec);
    Eigen::VectorXd q = constraint_values(spec, grid);
    int s0 = initial_safe_index(spec, grid);
    CandidateSet candidates(grid, {s0});
    KernelSpec kernel = KernelSpec::rbf(spec.surrogate_bandwidth);
    auto shared = std::make_shared<const Eigen::MatrixXd>(gram(kernel, grid));

    SafeOptCache cache{shared, shared, {}};
    GpModel f_model(GpPrior{0.0, kernel, spec.objective_noise_power});
    GpModel q_model(GpPrior{0.0, kernel, 0.01});
    Rng pick(11);
    for (int i = 0; i < 12; ++i) {
        int idx = static_cast<int>(pick.next_u64() % static_cast<std::uint64_t>(grid.rows()));
        f_model = f_model.extend(grid.row(idx).transpose(), q(idx));
        q_model = q_model.extend(grid.row(idx).transpose(), q(idx));
        cache.observed.push_back(idx);
    }
    SafeOptState st{f_model, q_model, 3.0, ScalingBeta::finite(2.0)};
    for (auto _ : state) {
        benchmark::DoNotOptimize(acquire(st, candidates, &cache));
    }
}
BENCHMARK(bm_acquire_step);

void bm_synthetic_trial(benchmark::State& state) {
    ExperimentConfig config;
    config.benchmark.kind = BenchmarkKind::Synthetic;
    config.algorithm.kind = AlgorithmKind::DSafeBocp;
    config.algorithm.eta = 2.0;
    config.replications = 1;
    ExperimentContext ctx = ExperimentContext::build(config);
    int rep = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(ctx.run(0, rep++));
    }
}
BENCHMARK(bm_synthetic_trial)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
