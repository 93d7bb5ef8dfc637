#include "safebocp/controller.hpp"

#include <cmath>
#include <stdexcept>

#include "safebocp/errors.hpp"
#include "safebocp/normal.hpp"

namespace safebocp {

NoiseMargin noise_margin(double delta, int horizon) {
    if (!(delta > 0.0 && delta < 1.0)) {
        throw ConfigError("noise_margin: delta must lie in (0,1)");
    }
    if (horizon < 1) {
        throw ConfigError("noise_margin: horizon must be positive");
    }
    double level = std::pow(1.0 - delta, 1.0 / horizon);
    if (level <= 0.5) return {0.0, true};
    return {normal_inv_cdf(level), false};
}

double alpha_algo(const ControllerConfig& config) {
    return (config.horizon * config.alpha - 1.0 - 1.0 / config.eta +
            config.delta_alpha_init / config.eta) /
           (config.horizon - 1);
}

ScalingBeta phi(double delta_alpha) {
    if (delta_alpha <= 0.0) return ScalingBeta::finite(0.0);
    if (delta_alpha >= 1.0) return ScalingBeta::infinite();
    return ScalingBeta::finite(normal_inv_cdf((delta_alpha + 1.0) / 2.0));
}

Controller::Controller(ControllerConfig config) : config_(config) {
    if (!(config_.alpha > 0.0 && config_.alpha <= 1.0)) {
        throw ConfigError("controller: alpha must lie in (0,1]");
    }
    if (!(config_.eta > 0.0) || !std::isfinite(config_.eta)) {
        throw ConfigError("controller: eta must be positive and finite");
    }
    if (config_.horizon < 2) {
        throw ConfigError("controller: horizon must be at least 2");
    }
    if (!(config_.delta_alpha_init < 1.0)) {
        throw ConfigError("controller: initial delta_alpha must be below 1");
    }
    if (!(config_.noise_sd >= 0.0) || !std::isfinite(config_.noise_sd)) {
        throw ConfigError("controller: noise_sd must be nonnegative and finite");
    }
    if (config_.variant == ErrorVariant::Deterministic && config_.noise_sd != 0.0) {
        throw ConfigError(
            "controller: the deterministic error signal requires noiseless feedback "
            "(noise_sd = 0)");
    }
    if (config_.variant == ErrorVariant::Probabilistic) {
        NoiseMargin m = noise_margin(config_.delta, config_.horizon);
        omega_ = m.omega;
        omega_clamped_ = m.clamped;
    }
    alpha_algo_ = alpha_algo(config_);
    delta_alpha_ = config_.delta_alpha_init;
}

bool Controller::error_signal(double z) const {
    if (config_.variant == ErrorVariant::Deterministic) return z < 0.0;
    return z < config_.noise_sd * omega_;
}

void Controller::step(double z) {
    if (steps_ >= config_.horizon) {
        throw std::logic_error("controller: feedback past the configured horizon");
    }
    double err = error_signal(z) ? 1.0 : 0.0;
    delta_alpha_ += config_.eta * (err - alpha_algo_);
    ++steps_;
}

}  // namespace safebocp
