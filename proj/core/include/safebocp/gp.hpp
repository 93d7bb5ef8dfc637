#pragma once

#include <Eigen/Dense>

#include "safebocp/kernel.hpp"

namespace safebocp {

struct GpPrior {
    double mean = 0.0;
    KernelSpec kernel;
    double noise_power = 0.0;  // observation noise variance sigma^2
};

struct PointPosterior {
    double mean;
    double sd;
};

struct BatchPosterior {
    Eigen::VectorXd mean;      // per query point
    Eigen::VectorXd sd;
    Eigen::MatrixXd whitened;  // L^{-1} * cross-covariances, n_obs x m; the posterior
                               // covariance of queries i,j is prior(i,j) - col_i . col_j
};

struct CholeskyResult {
    Eigen::MatrixXd lower;
    double jitter;  // diagonal boost that made the factorization succeed
};

// Cholesky with escalating diagonal jitter {0, 1e-10, 1e-8, 1e-6} x mean(diag).
// Throws NumericError listing the attempted levels if every rung fails.
CholeskyResult ladder_cholesky(const Eigen::MatrixXd& sym);

// First nonzero jitter ladder rung, also used when a zero-noise observation
// needs a nonsingular update elsewhere.
inline constexpr double kJitterBase = 1e-10;

// Raw posterior variance below this fraction of the prior variance collapses to
// exactly 0, so degenerate points compare equal regardless of rounding direction.
inline constexpr double kVarianceFloor = 1e-12;

// Immutable GP regression state: posterior queries never mutate, extend()
// returns a new model with the full factorization recomputed.
class GpModel {
public:
    explicit GpModel(GpPrior prior);
    GpModel(GpPrior prior, Eigen::MatrixXd inputs, Eigen::VectorXd outputs);

    GpModel extend(const Eigen::VectorXd& x, double y) const;

    PointPosterior posterior(const Eigen::VectorXd& x) const;
    BatchPosterior posterior_batch(const Eigen::MatrixXd& points) const;

    // Fast path for callers that already hold the cross-covariances between the
    // observations (rows) and m query points, plus the queries' prior variances.
    BatchPosterior posterior_with_cross(const Eigen::MatrixXd& cross,
                                        const Eigen::VectorXd& prior_var) const;

    const GpPrior& prior() const { return prior_; }
    const Eigen::MatrixXd& inputs() const { return inputs_; }
    const Eigen::VectorXd& outputs() const { return outputs_; }
    Eigen::Index count() const { return inputs_.rows(); }
    double jitter_used() const { return jitter_; }

private:
    void factorize();

    GpPrior prior_;
    Eigen::MatrixXd inputs_;   // n x d
    Eigen::VectorXd outputs_;  // n
    Eigen::MatrixXd chol_;     // lower factor of K + sigma^2 I (+ jitter I)
    Eigen::VectorXd weights_;  // (K + sigma^2 I)^{-1} (y - mean)
    double jitter_ = 0.0;
};

}  // namespace safebocp
