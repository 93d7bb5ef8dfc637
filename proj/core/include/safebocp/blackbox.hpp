#pragma once

#include <optional>
#include <utility>

#include <Eigen/Dense>

#include "safebocp/errors.hpp"
#include "safebocp/rng.hpp"

namespace safebocp {

struct Observation {
    double y;  // noisy objective feedback
    double z;  // noisy constraint feedback
};

// Ground truth for one trial: objective and constraint values per candidate
// index plus independent Gaussian observation noise. Queries draw objective
// noise first, then constraint noise, and skip the draw entirely when the
// corresponding noise level is zero.
class TableBlackBox {
public:
    TableBlackBox() = default;
    TableBlackBox(Eigen::VectorXd objective, Eigen::VectorXd constraint,
                  double objective_noise_sd, double constraint_noise_sd)
        : f_(std::move(objective)),
          q_(std::move(constraint)),
          f_sd_(objective_noise_sd),
          q_sd_(constraint_noise_sd) {
        if (f_.size() != q_.size()) {
            throw ConfigError("black box: objective and constraint tables differ in length");
        }
        if (!(f_sd_ >= 0.0) || !(q_sd_ >= 0.0)) {
            throw ConfigError("black box: noise levels must be nonnegative");
        }
    }

    int size() const { return static_cast<int>(f_.size()); }
    double objective(int i) const { return f_(i); }
    double constraint(int i) const { return q_(i); }

    Observation query(int i, Rng& rng) const {
        Observation obs{f_(i), q_(i)};
        if (f_sd_ > 0.0) obs.y += f_sd_ * rng.normal();
        if (q_sd_ > 0.0) obs.z += q_sd_ * rng.normal();
        return obs;
    }

    // max objective over {constraint >= 0}; empty when nothing is feasible
    std::optional<double> feasible_optimum() const {
        std::optional<double> best;
        for (int i = 0; i < size(); ++i) {
            if (q_(i) >= 0.0 && (!best || f_(i) > *best)) best = f_(i);
        }
        return best;
    }

private:
    Eigen::VectorXd f_;
    Eigen::VectorXd q_;
    double f_sd_ = 0.0;
    double q_sd_ = 0.0;
};

}  // namespace safebocp
