#pragma once

#include "safebocp/scaling.hpp"

namespace safebocp {

// How a feedback value z_t is turned into the binary error signal err_t.
// Deterministic: err = 1(z < 0), only valid for noiseless constraint feedback.
// Probabilistic: err = 1(z < noise_sd * omega), with omega sized so that a
// clean round stays error-free with probability (1 - delta)^(1/horizon).
enum class ErrorVariant { Deterministic, Probabilistic };

struct NoiseMargin {
    double omega;
    bool clamped;  // quantile level fell at or below 1/2, omega forced to 0
};

NoiseMargin noise_margin(double delta, int horizon);

struct ControllerConfig {
    ErrorVariant variant = ErrorVariant::Deterministic;
    double alpha = 0.1;            // target error rate across the horizon
    double eta = 10.0;             // update step size
    int horizon = 2;               // number of feedback rounds
    double delta_alpha_init = 0.0;
    double noise_sd = 0.0;         // constraint observation noise sd
    double delta = 0.1;            // Probabilistic margin tail mass
};

// Internal target rate that makes the worst-case empirical error rate across
// the horizon come out at exactly alpha.
double alpha_algo(const ControllerConfig& config);

// Coverage parameter -> interval scaling: <= 0 maps to 0, >= 1 maps to
// INFINITE, anything between to the standard normal quantile at (v + 1) / 2.
ScalingBeta phi(double delta_alpha);

// Online update Dalpha_{t+1} = Dalpha_t + eta * (err_t - alpha_algo), queried
// as beta_t = phi(Dalpha_t) before each round's feedback arrives.
class Controller {
public:
    explicit Controller(ControllerConfig config);

    ScalingBeta beta() const { return phi(delta_alpha_); }
    double delta_alpha() const { return delta_alpha_; }
    int steps_taken() const { return steps_; }
    double target_rate() const { return alpha_algo_; }
    double omega() const { return omega_; }
    bool omega_clamped() const { return omega_clamped_; }
    const ControllerConfig& config() const { return config_; }

    bool error_signal(double z) const;
    void step(double z);

private:
    ControllerConfig config_;
    double alpha_algo_;
    double delta_alpha_;
    double omega_ = 0.0;
    bool omega_clamped_ = false;
    int steps_ = 0;
};

}  // namespace safebocp
