#include "safebocp/synthetic.hpp"

#include <cmath>

#include "safebocp/errors.hpp"
#include "safebocp/gp.hpp"

namespace safebocp {

namespace {

void validate_grid_spec(const SyntheticSpec& spec) {
    if (spec.grid_size < 2) throw ConfigError("synthetic: grid_size must be at least 2");
    if (!(spec.high > spec.low)) throw ConfigError("synthetic: high must exceed low");
    if (!(spec.true_bandwidth > 0.0)) throw ConfigError("synthetic: true_bandwidth must be positive");
}

}  // namespace

Eigen::VectorXd constraint_coefficients() {
    Eigen::VectorXd a(10);
    a << -0.1, -0.2, 0.6, -0.6, 1.0, 1.0, -0.6, 0.6, -0.2, -0.1;
    return a;
}

Eigen::VectorXd constraint_centers() {
    Eigen::VectorXd c(10);
    c << -9.6, -7.4, -5.5, -3.3, -1.1, 1.1, 3.3, 5.5, 7.4, 9.6;
    return c;
}

Eigen::MatrixXd make_grid(const SyntheticSpec& spec) {
    validate_grid_spec(spec);
    Eigen::MatrixXd grid(spec.grid_size, 1);
    grid.col(0) = Eigen::VectorXd::LinSpaced(spec.grid_size, spec.low, spec.high);
    return grid;
}

Eigen::VectorXd constraint_values(const SyntheticSpec& spec, const Eigen::MatrixXd& grid) {
    validate_grid_spec(spec);
    Eigen::MatrixXd centers = constraint_centers();
    return cross_gram(KernelSpec::rbf(spec.true_bandwidth), grid, centers) *
           constraint_coefficients();
}

double constraint_rkhs_norm(const SyntheticSpec& spec) {
    if (!(spec.true_bandwidth > 0.0)) throw ConfigError("synthetic: true_bandwidth must be positive");
    return rkhs_norm(constraint_coefficients(), constraint_centers(),
                     KernelSpec::rbf(spec.true_bandwidth));
}

int initial_safe_index(const SyntheticSpec& spec, const Eigen::MatrixXd& grid) {
    if (grid.rows() < 1 || grid.cols() != 1) {
        throw ConfigError("synthetic: grid must be a nonempty single-column matrix");
    }
    int best = 0;
    for (int i = 1; i < grid.rows(); ++i) {
        if (std::abs(grid(i, 0)) < std::abs(grid(best, 0))) best = i;
    }
    double half_step = 0.5 * (spec.high - spec.low) / (spec.grid_size - 1);
    if (std::abs(grid(best, 0)) > half_step * (1.0 + 1e-9)) {
        throw DataError("synthetic: no grid point lies within half a step of the origin");
    }
    return best;
}

Eigen::MatrixXd objective_factor(const SyntheticSpec& spec, const Eigen::MatrixXd& grid) {
    validate_grid_spec(spec);
    return ladder_cholesky(gram(KernelSpec::rbf(spec.true_bandwidth), grid)).lower;
}

Eigen::VectorXd sample_objective(const Eigen::MatrixXd& factor, Rng& rng) {
    Eigen::VectorXd draws(factor.cols());
    for (Eigen::Index i = 0; i < draws.size(); ++i) draws(i) = rng.normal();
    return factor * draws;
}

}  // namespace safebocp
