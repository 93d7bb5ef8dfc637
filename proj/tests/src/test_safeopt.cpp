#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "approx.hpp"

#include <cmath>
#include <memory>

#include "oracles.hpp"
#include "safebocp/errors.hpp"
#include "safebocp/rng.hpp"
#include "safebocp/safeopt.hpp"

using namespace safebocp;

namespace {

struct SmallCase {
    CandidateSet candidates;
    SafeOptState state;
    oracles::DenseState oracle;
    SafeOptCache cache;
};

// <= 7 candidates, shared histories for both surrogates, assorted scalings.
SmallCase random_case(Rng& rng) {
    int n = 3 + static_cast<int>(rng.next_u64() % 5);
    int dim = 1 + static_cast<int>(rng.next_u64() % 2);
    Eigen::MatrixXd pts(n, dim);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < dim; ++d) {
            pts(i, d) = 0.9 * (d == 0 ? i : static_cast<double>(rng.next_u64() % 5)) +
                        0.2 * rng.uniform();
        }
    }
    std::vector<int> seeds{static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n))};
    if (rng.next_u64() % 3 == 0) {
        seeds.push_back(static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n)));
    }
    CandidateSet candidates(pts, seeds);

    KernelSpec kernel = KernelSpec::rbf(0.3 + rng.uniform());
    double f_noises[] = {1e-4, 1e-2};
    double q_noises[] = {0.0, 1e-2, 0.1};
    GpPrior f_prior{0.0, kernel, f_noises[rng.next_u64() % 2]};
    GpPrior q_prior{0.0, kernel, q_noises[rng.next_u64() % 3]};

    // shared observation sites; kept distinct so the zero-noise surrogate
    // stays on the zero-jitter rung and the rank-1 shortcut matches a rebuild
    int n_obs = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n - 1));
    std::vector<int> sites;
    for (int i = 0; i < n && static_cast<int>(sites.size()) < n_obs; ++i) {
        if (rng.next_u64() % 2 == 0) sites.push_back(i);
    }

    GpModel f_model(f_prior), q_model(q_prior);
    oracles::DenseGp f_oracle(f_prior), q_oracle(q_prior);
    for (int s : sites) {
        double y = 0.8 * rng.normal();
        double z = 0.8 * rng.normal();
        f_model = f_model.extend(candidates.point(s), y);
        q_model = q_model.extend(candidates.point(s), z);
        f_oracle = f_oracle.extended(candidates.point(s), y);
        q_oracle = q_oracle.extended(candidates.point(s), z);
    }

    double betas[] = {0.0, 0.3, 1.0, 2.0};
    ScalingBeta beta_q = rng.next_u64() % 5 == 0 ? ScalingBeta::infinite()
                                                 : ScalingBeta::finite(betas[rng.next_u64() % 4]);
    double beta_f = rng.next_u64() % 2 == 0 ? 1.5 : 3.0;

    auto g = std::make_shared<const Eigen::MatrixXd>(gram(kernel, pts));
    return SmallCase{std::move(candidates),
                     SafeOptState{f_model, q_model, beta_f, beta_q},
                     oracles::DenseState{f_oracle, q_oracle, beta_f, beta_q},
                     SafeOptCache{g, g, sites}};
}

double oracle_score(const SmallCase& c, int i) {
    Eigen::VectorXd x = c.candidates.point(i);
    return std::max(c.oracle.f.sd(x), c.oracle.q.sd(x));
}

}  // namespace

TEST_CASE("set computations match exhaustive oracle on 100 small cases") {
    Rng rng(661);
    int acquire_checked = 0;
    for (int rep = 0; rep < 100; ++rep) {
        SmallCase c = random_case(rng);
        CAPTURE(rep);

        std::vector<int> safe = safe_set(c.candidates, c.state.q_model, c.state.beta_q, &c.cache);
        std::vector<int> safe_nc = safe_set(c.candidates, c.state.q_model, c.state.beta_q);
        std::vector<int> safe_oracle = oracles::safe_set(c.oracle, c.candidates);
        CHECK(safe == safe_oracle);
        CHECK(safe_nc == safe_oracle);

        std::vector<int> m = potential_optimizers(c.state, c.candidates, safe, &c.cache);
        CHECK(m == oracles::potential_optimizers(c.oracle, c.candidates, safe));
        CHECK(!m.empty());

        std::vector<int> g = expanders(c.state, c.candidates, safe, &c.cache);
        std::vector<int> g_nc = expanders(c.state, c.candidates, safe);
        std::vector<int> g_oracle = oracles::expanders(c.oracle, c.candidates, safe);
        CHECK(g == g_oracle);
        CHECK(g_nc == g_oracle);

        // the oracle's score resolution cannot distinguish an all-degenerate
        // pool (every member at an observed, noiseless site); skip those
        int want = oracles::acquire(c.oracle, c.candidates);
        if (oracle_score(c, want) > 1e-7) {
            CHECK(acquire(c.state, c.candidates, &c.cache) == want);
            CHECK(acquire(c.state, c.candidates) == want);
            ++acquire_checked;
        }
        CHECK(final_decision(c.state, c.candidates, &c.cache) ==
              oracles::final_decision(c.oracle, c.candidates));
    }
    CHECK(acquire_checked >= 85);
}

TEST_CASE("infinite scaling pins the safe set to the seeds") {
    Eigen::MatrixXd pts(4, 1);
    pts << 0.1, 1.0, 2.0, 3.0;
    CandidateSet c(pts, {1, 3});
    GpPrior prior{0.0, KernelSpec::rbf(1.0), 0.0};
    GpModel q(prior);
    q = q.extend(c.point(0), 5.0);  // strongly positive evidence everywhere nearby
    CHECK(safe_set(c, q, ScalingBeta::infinite()) == std::vector<int>{1, 3});

    GpModel f(prior);
    SafeOptState st{f, q, 3.0, ScalingBeta::infinite()};
    CHECK(expanders(st, c, {1, 3}).empty());
    int x = acquire(st, c);
    CHECK((x == 1 || x == 3));
}

TEST_CASE("zero scaling accepts on the posterior mean alone") {
    Eigen::MatrixXd pts(3, 1);
    pts << 0.0, 1.0, 2.0;
    CandidateSet c(pts, {0});
    GpPrior prior{0.0, KernelSpec::rbf(1.0), 0.0};
    GpModel up = GpModel(prior).extend(c.point(1), 1.0);
    // a positive observation drags every nearby posterior mean above zero
    CHECK(safe_set(c, up, ScalingBeta::finite(0.0)) == std::vector<int>{0, 1, 2});
    GpModel down = GpModel(prior).extend(c.point(1), -1.0);
    // a negative one drags them below; only the seed survives
    CHECK(safe_set(c, down, ScalingBeta::finite(0.0)) == std::vector<int>{0});
}

TEST_CASE("acquire ties resolve to the lowest index") {
    Eigen::MatrixXd pts(3, 1);
    pts << -1.0, 0.0, 1.0;
    CandidateSet c(pts, {1});
    GpPrior prior{0.0, KernelSpec::rbf(0.8), 0.0};
    GpModel q = GpModel(prior).extend(c.point(1), 2.0);
    GpModel f = GpModel(prior).extend(c.point(1), 0.0);
    SafeOptState st{f, q, 3.0, ScalingBeta::finite(1.0)};
    // symmetric candidates 0 and 2 score identically; 0 must win
    std::vector<int> safe = safe_set(c, st.q_model, st.beta_q);
    REQUIRE(safe == std::vector<int>{0, 1, 2});
    CHECK(acquire(st, c) == 0);
}

TEST_CASE("potential optimizers require a nonempty safe set") {
    Eigen::MatrixXd pts(2, 1);
    pts << 0.0, 1.0;
    CandidateSet c(pts, {0});
    GpPrior prior{0.0, KernelSpec::rbf(1.0), 0.0};
    SafeOptState st{GpModel(prior), GpModel(prior), 3.0, ScalingBeta::finite(1.0)};
    CHECK_THROWS_AS(potential_optimizers(st, c, {}), ConfigError);
}

TEST_CASE("expanders are empty once everything is safe") {
    Eigen::MatrixXd pts(3, 1);
    pts << 0.0, 1.0, 2.0;
    CandidateSet c(pts, {0});
    GpPrior prior{0.0, KernelSpec::rbf(1.0), 0.0};
    GpModel q(prior);  // prior mean 0 >= 0: all safe at beta 0
    SafeOptState st{GpModel(prior), q, 3.0, ScalingBeta::finite(0.0)};
    std::vector<int> safe = safe_set(c, q, st.beta_q);
    REQUIRE(static_cast<int>(safe.size()) == c.size());
    CHECK(expanders(st, c, safe).empty());
}

TEST_CASE("schedule is flat at the norm bound under zero noise") {
    Eigen::MatrixXd pts(5, 1);
    pts << 0.0, 1.0, 2.0, 3.0, 4.0;
    CandidateSet c(pts, {0});
    std::vector<double> sched = rkhs_beta_schedule(2.5, 0.0, 0.1, 6, c, KernelSpec::rbf(1.0));
    REQUIRE(sched.size() == 6);
    for (double v : sched) CHECK(v == 2.5);
}

TEST_CASE("schedule matches greedy information-gain oracle") {
    Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        int n = 3 + static_cast<int>(rng.next_u64() % 4);
        Eigen::MatrixXd pts(n, 1);
        for (int i = 0; i < n; ++i) pts(i, 0) = 0.8 * i + 0.3 * rng.uniform();
        CandidateSet c(pts, {0});
        KernelSpec kernel = KernelSpec::rbf(0.4 + 0.8 * rng.uniform());
        double sigma = 0.05 + 0.4 * rng.uniform();
        double b = 1.0 + rng.uniform();
        double delta = 0.05 + 0.2 * rng.uniform();
        int count = 4;

        std::vector<double> sched = rkhs_beta_schedule(b, sigma, delta, count, c, kernel);
        oracles::GammaTrace trace = oracles::greedy_gamma(c, kernel, sigma, count);
        REQUIRE(sched.size() == static_cast<size_t>(count));
        for (int k = 0; k < count; ++k) {
            double want = b + 4.0 * sigma * std::sqrt(trace.gamma[static_cast<size_t>(k)] + 1.0 -
                                                      std::log(delta));
            CHECK(sched[static_cast<size_t>(k)] == testutil::Approx(want).abs(1e-9));
        }
        // the greedy cumulative gain telescopes into the log-determinant
        double direct = oracles::logdet_information(c, kernel, sigma, trace.picks);
        CHECK(trace.gamma.back() == testutil::Approx(direct).abs(1e-9));
        for (size_t k = 1; k < sched.size(); ++k) CHECK(sched[k] >= sched[k - 1]);
    }
}

TEST_CASE("schedule validation") {
    Eigen::MatrixXd pts(2, 1);
    pts << 0.0, 1.0;
    CandidateSet c(pts, {0});
    KernelSpec k = KernelSpec::rbf(1.0);
    CHECK_THROWS_AS(rkhs_beta_schedule(-1.0, 0.1, 0.1, 3, c, k), ConfigError);
    CHECK_THROWS_AS(rkhs_beta_schedule(1.0, -0.1, 0.1, 3, c, k), ConfigError);
    CHECK_THROWS_AS(rkhs_beta_schedule(1.0, 0.1, 0.0, 3, c, k), ConfigError);
    CHECK_THROWS_AS(rkhs_beta_schedule(1.0, 0.1, 1.5, 3, c, k), ConfigError);
    CHECK_THROWS_AS(rkhs_beta_schedule(1.0, 0.1, 0.1, -1, c, k), ConfigError);
    CHECK(rkhs_beta_schedule(1.0, 0.1, 0.1, 0, c, k).empty());
}
