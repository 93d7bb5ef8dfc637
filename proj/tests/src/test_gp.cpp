#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "approx.hpp"

#include <cmath>

#include "oracles.hpp"
#include "safebocp/errors.hpp"
#include "safebocp/gp.hpp"
#include "safebocp/rng.hpp"

using namespace safebocp;

namespace {

// Random regression case with well-separated inputs so the zero-jitter rung
// always factorizes and the dense-inverse oracle is well conditioned.
struct Case {
    GpPrior prior;
    Eigen::MatrixXd inputs;
    Eigen::VectorXd outputs;
    Eigen::MatrixXd queries;
};

Case random_case(Rng& rng) {
    Case c;
    int dim = 1 + static_cast<int>(rng.next_u64() % 3);
    int n = static_cast<int>(rng.next_u64() % 21);  // history length 0..20
    int m = 3 + static_cast<int>(rng.next_u64() % 5);
    bool linear = rng.next_u64() % 4 == 0;
    c.prior.mean = 2.0 * rng.uniform() - 1.0;
    if (linear) {
        c.prior.kernel = KernelSpec::linear();
        double noises[] = {1e-2, 0.1, 0.5};
        c.prior.noise_power = noises[rng.next_u64() % 3];
    } else {
        c.prior.kernel = KernelSpec::rbf(0.3 + rng.uniform());
        double noises[] = {1e-4, 1e-2, 0.1, 0.5};
        c.prior.noise_power = noises[rng.next_u64() % 4];
    }

    c.inputs.resize(n, dim);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < dim; ++d) {
            // rbf inputs on a jittered lattice with separation >= 0.6 along
            // dimension 0, keeping the zero-jitter rung and the dense inverse
            // both well conditioned
            c.inputs(i, d) = linear ? rng.normal()
                                    : 0.8 * (d == 0 ? i : static_cast<double>(rng.next_u64() % 7)) +
                                          0.2 * rng.uniform();
        }
    }
    c.outputs.resize(n);
    for (int i = 0; i < n; ++i) c.outputs(i) = 2.0 * rng.normal();
    c.queries.resize(m, dim);
    for (int i = 0; i < m; ++i) {
        for (int d = 0; d < dim; ++d) {
            c.queries(i, d) = linear ? rng.normal() : 17.0 * rng.uniform() - 1.0;
        }
    }
    return c;
}

}  // namespace

TEST_CASE("posterior matches dense-inverse oracle on 100 random cases") {
    Rng rng(20240801);
    int compared = 0;
    for (int rep = 0; rep < 100; ++rep) {
        Case c = random_case(rng);
        GpModel model(c.prior, c.inputs, c.outputs);
        REQUIRE(model.jitter_used() == 0.0);
        oracles::DenseGp oracle(c.prior, c.inputs, c.outputs);
        BatchPosterior batch = model.posterior_batch(c.queries);
        for (Eigen::Index i = 0; i < c.queries.rows(); ++i) {
            Eigen::VectorXd x = c.queries.row(i).transpose();
            double om = oracle.mean(x);
            double ov = oracle.var(x);
            double scale = std::max({std::abs(om), std::sqrt(std::max(ov, 0.0)), 1e-6});
            CHECK(batch.mean(i) == testutil::Approx(om).epsilon(0).scale(0).abs(1e-8 * scale));
            if (ov > 1e-9) {
                CHECK(batch.sd(i) == testutil::Approx(std::sqrt(ov)).abs(1e-8 * std::sqrt(ov)));
            }
            ++compared;
        }
    }
    CHECK(compared >= 300);
}

TEST_CASE("prior model returns prior mean and prior sd") {
    GpModel model(GpPrior{1.5, KernelSpec::rbf(1.0), 0.01});
    PointPosterior p = model.posterior(Eigen::VectorXd::Constant(1, 3.0));
    CHECK(p.mean == 1.5);
    CHECK(p.sd == 1.0);
    GpModel lin(GpPrior{0.0, KernelSpec::linear(), 0.0});
    Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 2.0);
    CHECK(lin.posterior(x).sd == 2.0);
}

TEST_CASE("extend reproduces batch construction") {
    Rng rng(99);
    Case c = random_case(rng);
    while (c.inputs.rows() < 3) c = random_case(rng);
    GpModel incremental(c.prior);
    for (Eigen::Index i = 0; i < c.inputs.rows(); ++i) {
        incremental = incremental.extend(c.inputs.row(i).transpose(), c.outputs(i));
    }
    GpModel direct(c.prior, c.inputs, c.outputs);
    BatchPosterior a = incremental.posterior_batch(c.queries);
    BatchPosterior b = direct.posterior_batch(c.queries);
    for (Eigen::Index i = 0; i < c.queries.rows(); ++i) {
        CHECK(a.mean(i) == b.mean(i));
        CHECK(a.sd(i) == b.sd(i));
    }
}

TEST_CASE("posterior interpolates noiseless observations") {
    GpModel model(GpPrior{0.0, KernelSpec::rbf(0.7), 0.0});
    Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, 0.5);
    Eigen::VectorXd x1 = Eigen::VectorXd::Constant(1, 2.0);
    model = model.extend(x0, 1.0).extend(x1, -0.5);
    CHECK(model.posterior(x0).mean == testutil::Approx(1.0).abs(1e-9));
    CHECK(model.posterior(x1).mean == testutil::Approx(-0.5).abs(1e-9));
    // variance at an observed point collapses to exactly zero via the floor
    CHECK(model.posterior(x0).sd == 0.0);
    CHECK(model.posterior(x1).sd == 0.0);
    CHECK(model.posterior(Eigen::VectorXd::Constant(1, 1.2)).sd > 0.05);
}

TEST_CASE("variance floor clamps tiny negatives to zero, not NaN") {
    GpModel model(GpPrior{0.0, KernelSpec::rbf(2.0), 0.0});
    for (int i = 0; i < 8; ++i) {
        Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.1 * i);
        model = model.extend(x, std::sin(0.1 * i));
    }
    Eigen::MatrixXd grid(50, 1);
    for (int i = 0; i < 50; ++i) grid(i, 0) = 0.02 * i - 0.1;
    BatchPosterior p = model.posterior_batch(grid);
    for (Eigen::Index i = 0; i < 50; ++i) {
        CHECK(std::isfinite(p.sd(i)));
        CHECK(p.sd(i) >= 0.0);
    }
}

TEST_CASE("jitter ladder engages on duplicate noiseless inputs") {
    GpModel model(GpPrior{0.0, KernelSpec::rbf(1.0), 0.0});
    Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 1.0);
    model = model.extend(x, 0.7).extend(x, 0.7);
    CHECK(model.jitter_used() > 0.0);
    CHECK(model.posterior(x).mean == testutil::Approx(0.7).abs(1e-4));
    GpModel noisy(GpPrior{0.0, KernelSpec::rbf(1.0), 0.1});
    noisy = noisy.extend(x, 0.7).extend(x, 0.7);
    CHECK(noisy.jitter_used() == 0.0);
}

TEST_CASE("whitened columns encode posterior covariance") {
    Rng rng(4242);
    Case c = random_case(rng);
    while (c.inputs.rows() < 5) c = random_case(rng);
    GpModel model(c.prior, c.inputs, c.outputs);
    oracles::DenseGp oracle(c.prior, c.inputs, c.outputs);
    BatchPosterior p = model.posterior_batch(c.queries);
    for (Eigen::Index i = 0; i < c.queries.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < c.queries.rows(); ++j) {
            double prior_ij = kernel_eval(c.prior.kernel, c.queries.row(i).transpose(),
                                          c.queries.row(j).transpose());
            double post_ij = prior_ij - p.whitened.col(i).dot(p.whitened.col(j));
            double want = oracle.cov(c.queries.row(i).transpose(), c.queries.row(j).transpose());
            CHECK(post_ij == testutil::Approx(want).abs(1e-8 * std::max(1.0, std::abs(want))));
        }
    }
}

TEST_CASE("posterior_with_cross agrees with posterior_batch") {
    Rng rng(77);
    Case c = random_case(rng);
    while (c.inputs.rows() < 2) c = random_case(rng);
    GpModel model(c.prior, c.inputs, c.outputs);
    Eigen::MatrixXd cross = cross_gram(c.prior.kernel, c.inputs, c.queries);
    BatchPosterior a = model.posterior_with_cross(cross, gram_diag(c.prior.kernel, c.queries));
    BatchPosterior b = model.posterior_batch(c.queries);
    for (Eigen::Index i = 0; i < c.queries.rows(); ++i) {
        CHECK(a.mean(i) == b.mean(i));
        CHECK(a.sd(i) == b.sd(i));
    }
    CHECK_THROWS_AS(model.posterior_with_cross(cross.topRows(1),
                                               gram_diag(c.prior.kernel, c.queries)),
                    ConfigError);
}

TEST_CASE("nonzero prior mean shifts predictions") {
    GpPrior prior{5.0, KernelSpec::rbf(0.5), 1e-4};
    GpModel model(prior);
    Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.0);
    model = model.extend(x, 4.0);
    oracles::DenseGp oracle(prior, x.transpose(), Eigen::VectorXd::Constant(1, 4.0));
    Eigen::VectorXd far = Eigen::VectorXd::Constant(1, 30.0);
    CHECK(model.posterior(far).mean == testutil::Approx(5.0).abs(1e-9));
    Eigen::VectorXd near = Eigen::VectorXd::Constant(1, 0.4);
    CHECK(model.posterior(near).mean == testutil::Approx(oracle.mean(near)).abs(1e-10));
}

TEST_CASE("model validation") {
    CHECK_THROWS_AS(GpModel(GpPrior{0.0, KernelSpec::rbf(1.0), -0.1}), ConfigError);
    CHECK_THROWS_AS(GpModel(GpPrior{0.0, KernelSpec::rbf(1.0), 0.1}, Eigen::MatrixXd(2, 1),
                            Eigen::VectorXd(3)),
                    ConfigError);
    GpModel model(GpPrior{0.0, KernelSpec::rbf(1.0), 0.1});
    model = model.extend(Eigen::VectorXd::Constant(2, 1.0), 0.0);
    CHECK_THROWS_AS(model.extend(Eigen::VectorXd::Constant(1, 1.0), 0.0), ConfigError);
    CHECK_THROWS_AS(model.posterior_batch(Eigen::MatrixXd(2, 1)), ConfigError);
}

TEST_CASE("ladder cholesky reports attempted rungs on failure") {
    Eigen::MatrixXd bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;  // indefinite
    CHECK_THROWS_AS(ladder_cholesky(bad), NumericError);
    Eigen::MatrixXd good(2, 2);
    good << 2.0, 0.5, 0.5, 1.0;
    CholeskyResult r = ladder_cholesky(good);
    CHECK(r.jitter == 0.0);
    CHECK((r.lower * r.lower.transpose() - good).norm() < 1e-12);
}
