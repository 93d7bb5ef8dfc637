#pragma once

#include <vector>

#include <Eigen/Dense>

namespace safebocp {

// Finite decision domain: candidates are addressed by index everywhere so that
// safe sets, acquisitions and final decisions identify solutions exactly.
class CandidateSet {
public:
    // points: n x d, one candidate per row; seed_safe: indices known safe a priori.
    // Rejects empty sets, out-of-range seeds, and candidate pairs closer than 1e-12.
    CandidateSet(Eigen::MatrixXd points, std::vector<int> seed_safe);

    const Eigen::MatrixXd& points() const { return points_; }
    Eigen::VectorXd point(int i) const { return points_.row(i).transpose(); }
    int size() const { return static_cast<int>(points_.rows()); }
    int dim() const { return static_cast<int>(points_.cols()); }
    const std::vector<int>& seed_safe() const { return seed_safe_; }  // sorted, unique

private:
    Eigen::MatrixXd points_;
    std::vector<int> seed_safe_;
};

}  // namespace safebocp
