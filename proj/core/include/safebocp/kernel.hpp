#pragma once

#include <Eigen/Dense>

namespace safebocp {

// Positive-definite kernel over R^d. Rbf is exp(-h * ||x - x'||^2) with h > 0
// (no 1/2 factor); Linear is the plain inner product x . x'.
struct KernelSpec {
    enum class Kind { Rbf, Linear };

    Kind kind = Kind::Rbf;
    double bandwidth = 1.0;  // h for Rbf, ignored for Linear

    static KernelSpec rbf(double bandwidth);
    static KernelSpec linear();

    bool operator==(const KernelSpec&) const = default;
};

double kernel_eval(const KernelSpec& k, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Gram matrix of the row-vectors of `points` (n x d) -> exactly symmetric n x n.
Eigen::MatrixXd gram(const KernelSpec& k, const Eigen::MatrixXd& points);

// Cross-covariances: (a.rows() x b.rows()).
Eigen::MatrixXd cross_gram(const KernelSpec& k, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// k(x_i, x_i) for every row of `points`.
Eigen::VectorXd gram_diag(const KernelSpec& k, const Eigen::MatrixXd& points);

// Norm of sum_i coeffs_i * k(., x_i) in the kernel's function space:
// sqrt(coeffs^T K coeffs), clamped at 0 against roundoff.
double rkhs_norm(const Eigen::VectorXd& coeffs, const Eigen::MatrixXd& points, const KernelSpec& k);

}  // namespace safebocp
