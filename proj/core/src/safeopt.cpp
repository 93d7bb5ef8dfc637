#include "safebocp/safeopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "safebocp/errors.hpp"

namespace safebocp {

namespace {

bool cache_usable(const GpModel& model, const std::shared_ptr<const Eigen::MatrixXd>& g,
                  const SafeOptCache* cache, int n_candidates) {
    return cache && g && g->rows() == n_candidates && g->cols() == n_candidates &&
           static_cast<Eigen::Index>(cache->observed.size()) == model.count();
}

BatchPosterior candidate_posterior(const GpModel& model, const CandidateSet& candidates,
                                   const std::shared_ptr<const Eigen::MatrixXd>& g,
                                   const SafeOptCache* cache) {
    if (cache_usable(model, g, cache, candidates.size())) {
        Eigen::MatrixXd cross(model.count(), candidates.size());
        for (Eigen::Index r = 0; r < model.count(); ++r) {
            cross.row(r) = g->row(cache->observed[static_cast<size_t>(r)]);
        }
        return model.posterior_with_cross(cross, g->diagonal());
    }
    return model.posterior_batch(candidates.points());
}

std::shared_ptr<const Eigen::MatrixXd> candidate_gram(const GpModel& model,
                                                      const CandidateSet& candidates,
                                                      const std::shared_ptr<const Eigen::MatrixXd>& g) {
    if (g && g->rows() == candidates.size() && g->cols() == candidates.size()) return g;
    return std::make_shared<const Eigen::MatrixXd>(
        gram(model.prior().kernel, candidates.points()));
}

std::vector<int> safe_from(const BatchPosterior& q, double beta, const CandidateSet& candidates) {
    std::vector<int> safe;
    const auto& seeds = candidates.seed_safe();
    size_t next_seed = 0;
    for (int i = 0; i < candidates.size(); ++i) {
        bool is_seed = next_seed < seeds.size() && seeds[next_seed] == i;
        if (is_seed) ++next_seed;
        if (is_seed || q.mean(i) - beta * q.sd(i) >= 0.0) {
            safe.push_back(i);
        }
    }
    return safe;
}

std::vector<int> optimizers_from(const BatchPosterior& f, double beta_f,
                                 const std::vector<int>& safe) {
    double best_lower = -std::numeric_limits<double>::infinity();
    for (int i : safe) {
        best_lower = std::max(best_lower, f.mean(i) - beta_f * f.sd(i));
    }
    std::vector<int> out;
    for (int i : safe) {
        if (f.mean(i) + beta_f * f.sd(i) >= best_lower) out.push_back(i);
    }
    return out;
}

// Would an optimistic hypothetical observation at safe candidate i certify at
// least one currently-unsafe candidate? `unsafe_whitened` and `unsafe_prior`
// are the whitened columns / prior gram columns of the unsafe candidates.
bool certifies_any(int i, const BatchPosterior& q, double beta, double noise_power,
                   const Eigen::MatrixXd& prior_gram, const std::vector<int>& unsafe,
                   const Eigen::MatrixXd& unsafe_whitened) {
    double sd_i = q.sd(i);
    double denom = sd_i * sd_i + noise_power;
    if (!(denom > 0.0)) return false;  // a hypothetical observation here adds nothing
    // conditioning on the value mean_i + beta*sd_i moves candidate j's posterior
    // mean by cov_ij * beta * sd_i / denom and variance by -cov_ij^2 / denom
    Eigen::VectorXd cov(static_cast<Eigen::Index>(unsafe.size()));
    for (size_t u = 0; u < unsafe.size(); ++u) {
        cov(static_cast<Eigen::Index>(u)) = prior_gram(i, unsafe[u]);
    }
    if (q.whitened.rows() > 0) {
        cov.noalias() -= unsafe_whitened.transpose() * q.whitened.col(i);
    }
    double shift_scale = beta * sd_i / denom;
    for (size_t u = 0; u < unsafe.size(); ++u) {
        int j = unsafe[u];
        double c = cov(static_cast<Eigen::Index>(u));
        double new_mean = q.mean(j) + c * shift_scale;
        double new_var = q.sd(j) * q.sd(j) - c * c / denom;
        if (!(new_var > kVarianceFloor * std::max(prior_gram(j, j), 0.0))) new_var = 0.0;
        if (new_mean - beta * std::sqrt(new_var) >= 0.0) return true;
    }
    return false;
}

struct ExpanderScan {
    std::vector<int> unsafe;
    Eigen::MatrixXd unsafe_whitened;
};

ExpanderScan make_scan(const BatchPosterior& q, const CandidateSet& candidates,
                       const std::vector<int>& safe) {
    ExpanderScan scan;
    std::vector<char> is_safe(static_cast<size_t>(candidates.size()), 0);
    for (int i : safe) is_safe[static_cast<size_t>(i)] = 1;
    for (int i = 0; i < candidates.size(); ++i) {
        if (!is_safe[static_cast<size_t>(i)]) scan.unsafe.push_back(i);
    }
    scan.unsafe_whitened.resize(q.whitened.rows(), static_cast<Eigen::Index>(scan.unsafe.size()));
    for (size_t u = 0; u < scan.unsafe.size(); ++u) {
        scan.unsafe_whitened.col(static_cast<Eigen::Index>(u)) = q.whitened.col(scan.unsafe[u]);
    }
    return scan;
}

struct StepTables {
    BatchPosterior f;
    BatchPosterior q;
    std::shared_ptr<const Eigen::MatrixXd> gram_q;
};

StepTables make_tables(const SafeOptState& state, const CandidateSet& candidates,
                       const SafeOptCache* cache) {
    StepTables t;
    t.f = candidate_posterior(state.f_model, candidates, cache ? cache->gram_f : nullptr, cache);
    t.q = candidate_posterior(state.q_model, candidates, cache ? cache->gram_q : nullptr, cache);
    t.gram_q = candidate_gram(state.q_model, candidates, cache ? cache->gram_q : nullptr);
    return t;
}

std::vector<int> safe_of(const StepTables& t, const ScalingBeta& beta_q,
                         const CandidateSet& candidates) {
    if (beta_q.is_infinite()) return candidates.seed_safe();
    return safe_from(t.q, beta_q.value(), candidates);
}

}  // namespace

std::vector<int> safe_set(const CandidateSet& candidates, const GpModel& q_model,
                          const ScalingBeta& beta_q, const SafeOptCache* cache) {
    if (beta_q.is_infinite()) return candidates.seed_safe();
    BatchPosterior q =
        candidate_posterior(q_model, candidates, cache ? cache->gram_q : nullptr, cache);
    return safe_from(q, beta_q.value(), candidates);
}

std::vector<int> potential_optimizers(const SafeOptState& state, const CandidateSet& candidates,
                                      const std::vector<int>& safe, const SafeOptCache* cache) {
    if (safe.empty()) throw ConfigError("potential_optimizers: safe set is empty");
    BatchPosterior f =
        candidate_posterior(state.f_model, candidates, cache ? cache->gram_f : nullptr, cache);
    return optimizers_from(f, state.beta_f, safe);
}

std::vector<int> expanders(const SafeOptState& state, const CandidateSet& candidates,
                           const std::vector<int>& safe, const SafeOptCache* cache) {
    if (state.beta_q.is_infinite()) return {};
    BatchPosterior q =
        candidate_posterior(state.q_model, candidates, cache ? cache->gram_q : nullptr, cache);
    auto g = candidate_gram(state.q_model, candidates, cache ? cache->gram_q : nullptr);
    ExpanderScan scan = make_scan(q, candidates, safe);
    std::vector<int> out;
    if (scan.unsafe.empty()) return out;
    double beta = state.beta_q.value();
    double noise = state.q_model.prior().noise_power;
    for (int i : safe) {
        if (certifies_any(i, q, beta, noise, *g, scan.unsafe, scan.unsafe_whitened)) {
            out.push_back(i);
        }
    }
    return out;
}

int acquire(const SafeOptState& state, const CandidateSet& candidates, const SafeOptCache* cache) {
    StepTables t = make_tables(state, candidates, cache);
    std::vector<int> safe = safe_of(t, state.beta_q, candidates);
    std::vector<int> m = optimizers_from(t.f, state.beta_f, safe);
    std::vector<char> in_m(static_cast<size_t>(candidates.size()), 0);
    for (int i : m) in_m[static_cast<size_t>(i)] = 1;

    // argmax of max{sd_f, sd_q} over optimizers-union-expanders: walk safe
    // candidates from highest score (ties to lowest index) and stop at the
    // first member; expander status is only computed until the walk stops.
    std::vector<std::pair<double, int>> order;
    order.reserve(safe.size());
    for (int i : safe) order.emplace_back(-std::max(t.f.sd(i), t.q.sd(i)), i);
    std::sort(order.begin(), order.end());

    const bool expanders_possible = !state.beta_q.is_infinite();
    ExpanderScan scan;
    bool scan_ready = false;
    for (const auto& [neg_score, i] : order) {
        if (in_m[static_cast<size_t>(i)]) return i;
        if (!expanders_possible) continue;
        if (!scan_ready) {
            scan = make_scan(t.q, candidates, safe);
            scan_ready = true;
        }
        if (scan.unsafe.empty()) continue;
        if (certifies_any(i, t.q, state.beta_q.value(), state.q_model.prior().noise_power,
                          *t.gram_q, scan.unsafe, scan.unsafe_whitened)) {
            return i;
        }
    }
    throw ConfigError("acquire: no safe candidate available");
}

int final_decision(const SafeOptState& state, const CandidateSet& candidates,
                   const SafeOptCache* cache) {
    BatchPosterior f =
        candidate_posterior(state.f_model, candidates, cache ? cache->gram_f : nullptr, cache);
    std::vector<int> safe =
        safe_set(candidates, state.q_model, state.beta_q, cache);
    int best = -1;
    double best_lower = -std::numeric_limits<double>::infinity();
    for (int i : safe) {
        double lower = f.mean(i) - state.beta_f * f.sd(i);
        if (lower > best_lower) {
            best_lower = lower;
            best = i;
        }
    }
    return best;
}

std::vector<double> rkhs_beta_schedule(double b, double sigma_q, double delta, int count,
                                       const CandidateSet& candidates, const KernelSpec& kernel) {
    if (!(b >= 0.0) || !std::isfinite(b)) {
        throw ConfigError("rkhs_beta_schedule: bound B must be nonnegative and finite");
    }
    if (!(sigma_q >= 0.0)) {
        throw ConfigError("rkhs_beta_schedule: sigma_q must be nonnegative");
    }
    if (!(delta > 0.0 && delta <= 1.0)) {
        throw ConfigError("rkhs_beta_schedule: delta must lie in (0,1]");
    }
    if (count < 0) {
        throw ConfigError("rkhs_beta_schedule: count must be nonnegative");
    }
    if (sigma_q == 0.0) {
        return std::vector<double>(static_cast<size_t>(count), b);
    }

    const int n = candidates.size();
    const double s2 = sigma_q * sigma_q;
    Eigen::MatrixXd g = gram(kernel, candidates.points());
    Eigen::VectorXd resid = g.diagonal();
    Eigen::MatrixXd whitened(count, n);  // one row per greedy pick
    std::vector<double> out;
    out.reserve(static_cast<size_t>(count));
    double gamma = 0.0;
    for (int k = 0; k < count; ++k) {
        int pick = 0;
        for (int i = 1; i < n; ++i) {
            if (resid(i) > resid(pick)) pick = i;
        }
        gamma += 0.5 * std::log1p(std::max(resid(pick), 0.0) / s2);
        Eigen::VectorXd cov = g.col(pick);
        if (k > 0) {
            cov.noalias() -= whitened.topRows(k).transpose() * whitened.topRows(k).col(pick);
        }
        whitened.row(k) = cov.transpose() / std::sqrt(std::max(resid(pick), 0.0) + s2);
        resid = (resid - whitened.row(k).transpose().cwiseAbs2()).cwiseMax(0.0);
        out.push_back(b + 4.0 * sigma_q * std::sqrt(gamma + 1.0 - std::log(delta)));
    }
    return out;
}

}  // namespace safebocp
