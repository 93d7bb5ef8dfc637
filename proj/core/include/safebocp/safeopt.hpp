#pragma once

#include <memory>
#include <vector>

#include "safebocp/candidates.hpp"
#include "safebocp/gp.hpp"
#include "safebocp/scaling.hpp"

namespace safebocp {

// Surrogate state for one optimization session. beta_f scales the objective
// interval (fixed), beta_q scales the constraint interval (schedule- or
// controller-driven, possibly INFINITE).
struct SafeOptState {
    GpModel f_model;
    GpModel q_model;
    double beta_f = 3.0;
    ScalingBeta beta_q;
};

// Optional precomputed tables for the hot path. `observed` lists the candidate
// index of every model observation in order; the grams are full candidate
// self-covariance matrices for each surrogate's kernel. Functions fall back to
// direct kernel evaluation whenever the cache does not match the model.
struct SafeOptCache {
    std::shared_ptr<const Eigen::MatrixXd> gram_f;
    std::shared_ptr<const Eigen::MatrixXd> gram_q;
    std::vector<int> observed;
};

// {i : lower constraint bound >= 0} union the seed set; INFINITE scaling pins
// the result to exactly the seed set. Sorted indices.
std::vector<int> safe_set(const CandidateSet& candidates, const GpModel& q_model,
                          const ScalingBeta& beta_q, const SafeOptCache* cache = nullptr);

// Safe candidates whose upper objective bound reaches the best lower objective
// bound within the safe set. Never empty for a nonempty safe set.
std::vector<int> potential_optimizers(const SafeOptState& state, const CandidateSet& candidates,
                                      const std::vector<int>& safe,
                                      const SafeOptCache* cache = nullptr);

// Safe candidates whose optimistic hypothetical observation would certify at
// least one currently-unsafe candidate. Empty when scaling is INFINITE or the
// safe set already covers every candidate.
std::vector<int> expanders(const SafeOptState& state, const CandidateSet& candidates,
                           const std::vector<int>& safe, const SafeOptCache* cache = nullptr);

// Next iterate: the most uncertain candidate among optimizers and expanders
// (max of the two posterior standard deviations), ties to the lowest index.
int acquire(const SafeOptState& state, const CandidateSet& candidates,
            const SafeOptCache* cache = nullptr);

// Reported solution: the safe candidate with the best lower objective bound,
// ties to the lowest index.
int final_decision(const SafeOptState& state, const CandidateSet& candidates,
                   const SafeOptCache* cache = nullptr);

// Fixed scaling schedule for `count` feedback rounds: entry k (0-based) equals
// B + 4*sigma_q*sqrt(gamma_{k+1} + 1 - ln(delta)), where gamma_t is the greedy
// max-information approximation over the candidate set under noise sigma_q^2.
// With sigma_q = 0 every entry is exactly B. Entries are nondecreasing.
std::vector<double> rkhs_beta_schedule(double b, double sigma_q, double delta, int count,
                                       const CandidateSet& candidates, const KernelSpec& kernel);

}  // namespace safebocp
