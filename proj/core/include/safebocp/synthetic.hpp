#pragma once

#include <Eigen/Dense>

#include "safebocp/kernel.hpp"
#include "safebocp/rng.hpp"

namespace safebocp {

// One-dimensional benchmark: a fixed kernel-expansion constraint on an evenly
// spaced grid, with objectives drawn per trial from a zero-mean GP under the
// true kernel. The surrogate bandwidth is what the optimizer's models assume;
// runs are "well specified" when it equals the true bandwidth.
struct SyntheticSpec {
    int grid_size = 1000;
    double low = -10.0;
    double high = 10.0;
    double true_bandwidth = 1.0 / 1.62;
    double surrogate_bandwidth = 1.0 / 1.62;
    double objective_noise_power = 2.5e-3;
};

// The constraint is sum_i a_i * exp(-h_true * (x - c_i)^2) with ten fixed
// (a_i, c_i) pairs; it is positive near the origin and changes sign six times
// across [-10, 10].
Eigen::VectorXd constraint_coefficients();
Eigen::VectorXd constraint_centers();

Eigen::MatrixXd make_grid(const SyntheticSpec& spec);  // grid_size x 1
Eigen::VectorXd constraint_values(const SyntheticSpec& spec, const Eigen::MatrixXd& grid);
double constraint_rkhs_norm(const SyntheticSpec& spec);

// Grid index closest to the origin, ties to the lower index. The point must
// lie within half a grid step of 0 or the grid does not cover the seed.
int initial_safe_index(const SyntheticSpec& spec, const Eigen::MatrixXd& grid);

// Lower Cholesky factor of the true-kernel Gram over the grid; computed once
// per experiment and reused for every objective draw.
Eigen::MatrixXd objective_factor(const SyntheticSpec& spec, const Eigen::MatrixXd& grid);

// One zero-mean GP sample path: factor * iid standard normals.
Eigen::VectorXd sample_objective(const Eigen::MatrixXd& factor, Rng& rng);

}  // namespace safebocp
