#include "safebocp/kernel.hpp"

#include <cmath>
#include <string>

#include "safebocp/errors.hpp"

namespace safebocp {

KernelSpec KernelSpec::rbf(double bandwidth) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
        throw ConfigError("KernelSpec: rbf bandwidth must be positive and finite, got " +
                          std::to_string(bandwidth));
    }
    return KernelSpec{Kind::Rbf, bandwidth};
}

KernelSpec KernelSpec::linear() { return KernelSpec{Kind::Linear, 0.0}; }

double kernel_eval(const KernelSpec& k, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) {
        throw ConfigError("kernel_eval: dimension mismatch (" + std::to_string(x.size()) +
                          " vs " + std::to_string(y.size()) + ")");
    }
    if (k.kind == KernelSpec::Kind::Linear) {
        return x.dot(y);
    }
    return std::exp(-k.bandwidth * (x - y).squaredNorm());
}

Eigen::MatrixXd cross_gram(const KernelSpec& k, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.cols() != b.cols()) {
        throw ConfigError("cross_gram: dimension mismatch (" + std::to_string(a.cols()) +
                          " vs " + std::to_string(b.cols()) + ")");
    }
    if (k.kind == KernelSpec::Kind::Linear) {
        return a * b.transpose();
    }
    Eigen::VectorXd na = a.rowwise().squaredNorm();
    Eigen::VectorXd nb = b.rowwise().squaredNorm();
    Eigen::MatrixXd d2 = (-2.0 * a * b.transpose()).colwise() + na;
    d2.rowwise() += nb.transpose();
    return (-k.bandwidth * d2.cwiseMax(0.0)).array().exp();
}

Eigen::MatrixXd gram(const KernelSpec& k, const Eigen::MatrixXd& points) {
    Eigen::MatrixXd g = cross_gram(k, points, points);
    // enforce exact symmetry (broadcasted distance roundoff is not symmetric)
    g = 0.5 * (g + g.transpose()).eval();
    if (k.kind == KernelSpec::Kind::Rbf) {
        g.diagonal().setOnes();
    }
    return g;
}

Eigen::VectorXd gram_diag(const KernelSpec& k, const Eigen::MatrixXd& points) {
    if (k.kind == KernelSpec::Kind::Linear) {
        return points.rowwise().squaredNorm();
    }
    return Eigen::VectorXd::Ones(points.rows());
}

double rkhs_norm(const Eigen::VectorXd& coeffs, const Eigen::MatrixXd& points, const KernelSpec& k) {
    if (coeffs.size() != points.rows()) {
        throw ConfigError("rkhs_norm: coefficient count must match point count");
    }
    double sq = coeffs.dot(gram(k, points) * coeffs);
    return std::sqrt(std::max(sq, 0.0));
}

}  // namespace safebocp
