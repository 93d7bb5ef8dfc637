#include "safebocp/candidates.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "safebocp/errors.hpp"

namespace safebocp {

CandidateSet::CandidateSet(Eigen::MatrixXd points, std::vector<int> seed_safe)
    : points_(std::move(points)), seed_safe_(std::move(seed_safe)) {
    const int n = static_cast<int>(points_.rows());
    if (n == 0) {
        throw ConfigError("CandidateSet: candidate list is empty");
    }
    if (seed_safe_.empty()) {
        throw ConfigError("CandidateSet: seed safe set is empty");
    }
    std::sort(seed_safe_.begin(), seed_safe_.end());
    seed_safe_.erase(std::unique(seed_safe_.begin(), seed_safe_.end()), seed_safe_.end());
    for (int i : seed_safe_) {
        if (i < 0 || i >= n) {
            throw ConfigError("CandidateSet: seed safe index " + std::to_string(i) +
                              " out of range [0," + std::to_string(n) + ")");
        }
    }
    constexpr double min_dist2 = 1e-12 * 1e-12;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if ((points_.row(i) - points_.row(j)).squaredNorm() <= min_dist2) {
                throw ConfigError("CandidateSet: candidates " + std::to_string(i) + " and " +
                                  std::to_string(j) + " coincide within 1e-12");
            }
        }
    }
}

}  // namespace safebocp
