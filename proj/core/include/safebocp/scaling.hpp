#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace safebocp {

// Credible-interval scaling. INFINITE is a distinguished symbol, not a float:
// it pins the safe set to the seed set and empties the expander set, so no
// interval arithmetic ever touches an IEEE infinity by accident.
class ScalingBeta {
public:
    ScalingBeta() = default;  // finite 0

    static ScalingBeta finite(double v) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("ScalingBeta: finite value must be nonnegative and finite");
        }
        ScalingBeta b;
        b.value_ = v;
        return b;
    }

    static ScalingBeta infinite() {
        ScalingBeta b;
        b.infinite_ = true;
        return b;
    }

    bool is_infinite() const { return infinite_; }

    double value() const {
        if (infinite_) {
            throw std::logic_error("ScalingBeta: no finite value, scaling is INFINITE");
        }
        return value_;
    }

    bool operator==(const ScalingBeta& o) const {
        return infinite_ == o.infinite_ && (infinite_ || value_ == o.value_);
    }

private:
    double value_ = 0.0;
    bool infinite_ = false;
};

struct CredibleInterval {
    double lower;
    double upper;
};

inline CredibleInterval credible_interval(double mean, double sd, const ScalingBeta& beta) {
    if (beta.is_infinite()) {
        return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    }
    return {mean - beta.value() * sd, mean + beta.value() * sd};
}

}  // namespace safebocp
