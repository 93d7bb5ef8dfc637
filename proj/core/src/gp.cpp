#include "safebocp/gp.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "safebocp/errors.hpp"

namespace safebocp {

namespace {

// LLT can report success on a nearly singular matrix while its triangular
// solves are useless. Probe with Kx = K*1 and demand x ~ 1 before a rung is
// accepted, so predictions never come from an unstable factor.
bool factor_is_reliable(const Eigen::MatrixXd& m, const Eigen::LLT<Eigen::MatrixXd>& llt) {
    Eigen::VectorXd probe = m * Eigen::VectorXd::Ones(m.rows());
    Eigen::VectorXd solved = llt.solve(probe);
    return (solved.array() - 1.0).abs().maxCoeff() <= 1e-6;
}

}  // namespace

CholeskyResult ladder_cholesky(const Eigen::MatrixXd& sym) {
    const double scale = sym.rows() > 0 ? sym.diagonal().mean() : 0.0;
    const double rungs[] = {0.0, 1e-10, 1e-8, 1e-6};
    std::string attempted;
    for (double rung : rungs) {
        double jitter = rung * scale;
        Eigen::MatrixXd m = sym;
        if (jitter > 0.0) {
            m.diagonal().array() += jitter;
        }
        Eigen::LLT<Eigen::MatrixXd> llt(m);
        if (llt.info() == Eigen::Success && factor_is_reliable(m, llt)) {
            return {llt.matrixL(), jitter};
        }
        if (!attempted.empty()) attempted += ", ";
        attempted += std::to_string(jitter);
    }
    throw NumericError("ladder_cholesky: factorization failed at jitter levels {" + attempted + "}");
}

GpModel::GpModel(GpPrior prior) : prior_(std::move(prior)), inputs_(0, 0), outputs_(0) {
    if (prior_.noise_power < 0.0 || !std::isfinite(prior_.noise_power)) {
        throw ConfigError("GpModel: noise power must be finite and nonnegative");
    }
}

GpModel::GpModel(GpPrior prior, Eigen::MatrixXd inputs, Eigen::VectorXd outputs)
    : GpModel(std::move(prior)) {
    if (inputs.rows() != outputs.size()) {
        throw ConfigError("GpModel: observation count mismatch between inputs and outputs");
    }
    inputs_ = std::move(inputs);
    outputs_ = std::move(outputs);
    factorize();
}

void GpModel::factorize() {
    if (inputs_.rows() == 0) {
        chol_.resize(0, 0);
        weights_.resize(0);
        jitter_ = 0.0;
        return;
    }
    Eigen::MatrixXd k = gram(prior_.kernel, inputs_);
    k.diagonal().array() += prior_.noise_power;
    CholeskyResult f = ladder_cholesky(k);
    chol_ = std::move(f.lower);
    jitter_ = f.jitter;
    Eigen::VectorXd centered = outputs_.array() - prior_.mean;
    weights_ = chol_.triangularView<Eigen::Lower>().solve(centered);
    chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(weights_);
}

GpModel GpModel::extend(const Eigen::VectorXd& x, double y) const {
    if (count() > 0 && x.size() != inputs_.cols()) {
        throw ConfigError("GpModel::extend: point dimension mismatch");
    }
    Eigen::MatrixXd inputs(count() + 1, x.size());
    if (count() > 0) inputs.topRows(count()) = inputs_;
    inputs.row(count()) = x.transpose();
    Eigen::VectorXd outputs(count() + 1);
    if (count() > 0) outputs.head(count()) = outputs_;
    outputs(count()) = y;
    return GpModel(prior_, std::move(inputs), std::move(outputs));
}

BatchPosterior GpModel::posterior_with_cross(const Eigen::MatrixXd& cross,
                                             const Eigen::VectorXd& prior_var) const {
    if (cross.rows() != count() || cross.cols() != prior_var.size()) {
        throw ConfigError("GpModel: cross-covariance shape mismatch");
    }
    BatchPosterior out;
    const Eigen::Index m = prior_var.size();
    if (count() == 0) {
        out.mean = Eigen::VectorXd::Constant(m, prior_.mean);
        out.sd = prior_var.cwiseMax(0.0).cwiseSqrt();
        out.whitened.resize(0, m);
        return out;
    }
    out.mean = (cross.transpose() * weights_).array() + prior_.mean;
    out.whitened = chol_.triangularView<Eigen::Lower>().solve(cross);
    Eigen::VectorXd var = prior_var - out.whitened.colwise().squaredNorm().transpose();
    for (Eigen::Index j = 0; j < m; ++j) {
        double floor = kVarianceFloor * std::max(prior_var(j), 0.0);
        if (!(var(j) > floor)) var(j) = 0.0;
    }
    out.sd = var.cwiseSqrt();
    return out;
}

BatchPosterior GpModel::posterior_batch(const Eigen::MatrixXd& points) const {
    if (count() > 0 && points.cols() != inputs_.cols()) {
        throw ConfigError("GpModel: query dimension mismatch");
    }
    Eigen::MatrixXd cross = count() > 0 ? cross_gram(prior_.kernel, inputs_, points)
                                        : Eigen::MatrixXd(0, points.rows());
    return posterior_with_cross(cross, gram_diag(prior_.kernel, points));
}

PointPosterior GpModel::posterior(const Eigen::VectorXd& x) const {
    BatchPosterior b = posterior_batch(x.transpose());
    return {b.mean(0), b.sd(0)};
}

}  // namespace safebocp
