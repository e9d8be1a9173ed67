#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bisim/errors.hpp"
#include "bisim/mdp.hpp"
#include "bisim/rng.hpp"
#include "bisim/wasserstein.hpp"

namespace bisim {

/// One replay element: (s, a, r, s', done).
struct TransitionRecord {
    int s = 0;
    int a = 0;
    double r = 0.0;
    int s_next = 0;
    bool done = false;
};

/// Multi-step Monte-Carlo return sum_{k=0}^{n_step-1} gamma^k r_{t+k} over a
/// contiguous trajectory slice, truncated at episode termination.
inline double mc_target(const std::vector<TransitionRecord>& records, int t, int n_step,
                        double gamma) {
    if (n_step < 1) throw std::invalid_argument("mc_target: n_step must be >= 1");
    if (t < 0 || t >= static_cast<int>(records.size()))
        throw std::out_of_range("mc_target: index " + std::to_string(t) + " out of range");
    double acc = 0.0;
    double g = 1.0;
    for (int k = 0; k < n_step && t + k < static_cast<int>(records.size()); ++k) {
        acc += g * records[t + k].r;
        if (records[t + k].done) break;
        g *= gamma;
    }
    return acc;
}

/// Per-(s,a) Gaussian reward predictor with clamped standard deviation.
/// Unseen cells are served from the prior (prior_mean, prior_std).
class GaussianRewardModel {
public:
    GaussianRewardModel(int n_states, int n_actions, double sigma_min, double sigma_max,
                        double prior_mean, double prior_std)
        : n_states_(n_states), n_actions_(n_actions), sigma_min_(sigma_min),
          sigma_max_(sigma_max), prior_mean_(prior_mean), prior_std_(prior_std),
          mean_(static_cast<std::size_t>(n_states) * n_actions, 0.0),
          std_(static_cast<std::size_t>(n_states) * n_actions, 0.0),
          count_(static_cast<std::size_t>(n_states) * n_actions, 0) {
        if (!(sigma_min >= 0.0 && sigma_min <= sigma_max))
            throw std::invalid_argument("GaussianRewardModel: need 0 <= sigma_min <= sigma_max");
    }

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    double sigma_min() const { return sigma_min_; }
    double sigma_max() const { return sigma_max_; }

    bool seen(int s, int a) const { return count_[cell(s, a)] > 0; }
    long count(int s, int a) const { return count_[cell(s, a)]; }

    /// Fitted (mu, sigma) for seen cells, (prior_mean, prior_std) otherwise.
    std::pair<double, double> predict(int s, int a) const {
        const std::size_t i = cell(s, a);
        if (count_[i] == 0) return {prior_mean_, prior_std_};
        return {mean_[i], std_[i]};
    }

    void set_cell(int s, int a, double mean, double std_dev, long count) {
        const std::size_t i = cell(s, a);
        mean_[i] = mean;
        std_[i] = std::clamp(std_dev, sigma_min_, sigma_max_);
        count_[i] = count;
    }

private:
    std::size_t cell(int s, int a) const {
        return static_cast<std::size_t>(s) * n_actions_ + a;
    }

    int n_states_;
    int n_actions_;
    double sigma_min_;
    double sigma_max_;
    double prior_mean_;
    double prior_std_;
    std::vector<double> mean_;
    std::vector<double> std_;
    std::vector<long> count_;
};

/// Per-cell Gaussian maximum-likelihood fit: mu is the sample mean and sigma
/// the population (1/n) standard deviation clamped to [sigma_min, sigma_max];
/// exactly the per-cell minimizer of the Gaussian negative log-likelihood
/// under the clamp. Cells with no targets are omitted and served by the prior.
struct RewardSample {
    int s;
    int a;
    double target;
};

inline GaussianRewardModel fit_reward_model(int n_states, int n_actions,
                                            const std::vector<RewardSample>& dataset,
                                            double sigma_min = 1e-4, double sigma_max = 1.0,
                                            double prior_mean = 0.0) {
    if (!(sigma_min > 0.0 && sigma_min <= sigma_max))
        throw std::invalid_argument("fit_reward_model: need 0 < sigma_min <= sigma_max");
    GaussianRewardModel model(n_states, n_actions, sigma_min, sigma_max, prior_mean, sigma_max);
    std::vector<double> sum(static_cast<std::size_t>(n_states) * n_actions, 0.0);
    std::vector<double> sumsq(sum.size(), 0.0);
    std::vector<long> cnt(sum.size(), 0);
    for (const RewardSample& d : dataset) {
        if (d.s < 0 || d.s >= n_states || d.a < 0 || d.a >= n_actions)
            throw std::invalid_argument("fit_reward_model: sample cell out of range");
        const std::size_t i = static_cast<std::size_t>(d.s) * n_actions + d.a;
        sum[i] += d.target;
        sumsq[i] += d.target * d.target;
        cnt[i] += 1;
    }
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            const std::size_t i = static_cast<std::size_t>(s) * n_actions + a;
            if (cnt[i] == 0) continue;
            const double mu = sum[i] / static_cast<double>(cnt[i]);
            const double var = std::max(0.0, sumsq[i] / static_cast<double>(cnt[i]) - mu * mu);
            model.set_cell(s, a, mu, std::sqrt(var), cnt[i]);
        }
    }
    return model;
}

/// Empirical per-cell Gaussian negative log-likelihood (up to constants):
/// mean over targets of (r - mu)^2 / (2 sigma^2) + log(sigma).
inline double gaussian_nll(const std::vector<double>& targets, double mu, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_nll: sigma must be positive");
    double acc = 0.0;
    for (double r : targets) acc += (r - mu) * (r - mu) / (2.0 * sigma * sigma) + std::log(sigma);
    return acc / static_cast<double>(targets.size());
}

/// Reparameterized predictive sample mu + sigma * xi, xi ~ N(0,1).
inline double sample_reward(const GaussianRewardModel& model, int s, int a, Rng& rng) {
    const auto [mu, sigma] = model.predict(s, a);
    return mu + sigma * rng.normal();
}

/// Tabular next-state model from visit counts with optional additive
/// smoothing. Unseen cells fall back to a self-transition, flagged low
/// confidence.
class EmpiricalTransitionModel {
public:
    EmpiricalTransitionModel(int n_states, int n_actions, double smoothing = 0.0)
        : n_states_(n_states), n_actions_(n_actions), smoothing_(smoothing),
          counts_(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0) {
        if (smoothing < 0.0)
            throw std::invalid_argument("EmpiricalTransitionModel: smoothing must be >= 0");
    }

    static EmpiricalTransitionModel fit(int n_states, int n_actions,
                                        const std::vector<TransitionRecord>& dataset,
                                        double smoothing = 0.0) {
        EmpiricalTransitionModel m(n_states, n_actions, smoothing);
        for (const TransitionRecord& rec : dataset) m.observe(rec.s, rec.a, rec.s_next);
        return m;
    }

    /// Model whose rows equal the true transition distribution exactly;
    /// stands in for a model fitted on unbounded data.
    static EmpiricalTransitionModel exact(const TabularMdp& mdp) {
        EmpiricalTransitionModel m(mdp.n_states(), mdp.n_actions(), 0.0);
        for (int s = 0; s < mdp.n_states(); ++s)
            for (int a = 0; a < mdp.n_actions(); ++a) {
                const double* row = mdp.transition_row(s, a);
                for (int t = 0; t < mdp.n_states(); ++t) m.counts_[m.cell(s, a) + t] = row[t];
            }
        return m;
    }

    void observe(int s, int a, int s_next, double weight = 1.0) {
        counts_[cell(s, a) + s_next] += weight;
    }

    bool seen(int s, int a) const {
        const std::size_t base = cell(s, a);
        for (int t = 0; t < n_states_; ++t)
            if (counts_[base + t] > 0.0) return true;
        return false;
    }

    /// Normalized (and smoothed) next-state row; self-transition for unseen
    /// cells. Sets low_confidence when serving the fallback.
    std::vector<double> row(int s, int a, bool* low_confidence = nullptr) const {
        std::vector<double> out(n_states_, 0.0);
        const std::size_t base = cell(s, a);
        double total = 0.0;
        for (int t = 0; t < n_states_; ++t) total += counts_[base + t] + smoothing_;
        if (total <= 0.0) {
            out[s] = 1.0;
            if (low_confidence) *low_confidence = true;
            return out;
        }
        for (int t = 0; t < n_states_; ++t) out[t] = (counts_[base + t] + smoothing_) / total;
        if (low_confidence) *low_confidence = false;
        return out;
    }

    DiscreteDistribution query(int s, int a, bool* low_confidence = nullptr) const {
        const std::vector<double> r = row(s, a, low_confidence);
        return DiscreteDistribution::from_dense(r.data(), n_states_);
    }

    /// Policy-marginal next-state row sum_a pi(a|s) P_hat(.|s,a).
    std::vector<double> policy_row(int s, const Policy& pi) const {
        std::vector<double> out(n_states_, 0.0);
        for (int a = 0; a < n_actions_; ++a) {
            const double w = pi.prob(s, a);
            if (w == 0.0) continue;
            const std::vector<double> r = row(s, a);
            for (int t = 0; t < n_states_; ++t) out[t] += w * r[t];
        }
        return out;
    }

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }

private:
    std::size_t cell(int s, int a) const {
        return (static_cast<std::size_t>(s) * n_actions_ + a) * n_states_;
    }

    int n_states_;
    int n_actions_;
    double smoothing_;
    std::vector<double> counts_;
};

/// Reward model whose means equal the true rewards with a uniform std; the
/// mean-unbiased stand-in used by the theorem-checking suites.
inline GaussianRewardModel exact_reward_model(const TabularMdp& mdp, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("exact_reward_model: sigma must be >= 0");
    GaussianRewardModel model(mdp.n_states(), mdp.n_actions(), 0.0, std::max(sigma, 1.0), 0.0,
                              std::max(sigma, 1.0));
    for (int s = 0; s < mdp.n_states(); ++s)
        for (int a = 0; a < mdp.n_actions(); ++a) model.set_cell(s, a, mdp.reward(s, a), sigma, 1);
    return model;
}

/// Seeded on-policy rollout through a tabular MDP; the replay source for
/// fitting models when no environment interaction is available.
inline std::vector<TransitionRecord> simulate_replay(const TabularMdp& mdp, const Policy& pi,
                                                     int n_steps, std::uint64_t seed,
                                                     int episode_length = 0) {
    detail::check_compatible(mdp, pi);
    Rng rng(splitmix64(seed ^ 0x7265706c6179ULL));
    std::vector<TransitionRecord> out;
    out.reserve(n_steps);
    int s = 0;
    int t_ep = 0;
    for (int t = 0; t < n_steps; ++t) {
        double u = rng.uniform();
        int a = mdp.n_actions() - 1;
        for (int cand = 0; cand < mdp.n_actions(); ++cand) {
            u -= pi.prob(s, cand);
            if (u < 0.0) {
                a = cand;
                break;
            }
        }
        double v = rng.uniform();
        const double* row = mdp.transition_row(s, a);
        int s_next = mdp.n_states() - 1;
        for (int cand = 0; cand < mdp.n_states(); ++cand) {
            v -= row[cand];
            if (v < 0.0) {
                s_next = cand;
                break;
            }
        }
        ++t_ep;
        const bool done = episode_length > 0 && t_ep >= episode_length;
        out.push_back({s, a, mdp.reward(s, a), s_next, done});
        if (done) {
            s = 0;
            t_ep = 0;
        } else {
            s = s_next;
        }
    }
    return out;
}

/// n-step Monte-Carlo targets for every position of a replay sequence.
inline std::vector<RewardSample> reward_samples_from_replay(
    const std::vector<TransitionRecord>& records, int n_step, double gamma) {
    std::vector<RewardSample> out;
    out.reserve(records.size());
    for (int t = 0; t < static_cast<int>(records.size()); ++t)
        out.push_back({records[t].s, records[t].a, mc_target(records, t, n_step, gamma)});
    return out;
}

/// Running mean of observed next-state features per (cell, action); the
/// deterministic next-feature predictor of the continuous pipeline. Unseen
/// cells fall back to the cell's own (identity) feature.
class NextFeatureModel {
public:
    NextFeatureModel(int n_cells, int n_actions, FeatureMap identity_features)
        : n_cells_(n_cells), n_actions_(n_actions), identity_(std::move(identity_features)),
          dim_(identity_.empty() ? 0 : identity_[0].size()),
          sum_(static_cast<std::size_t>(n_cells) * n_actions * dim_, 0.0),
          count_(static_cast<std::size_t>(n_cells) * n_actions, 0) {
        if (static_cast<int>(identity_.size()) != n_cells)
            throw std::invalid_argument("NextFeatureModel: one identity feature per cell");
    }

    void observe(int cell_id, int action, const std::vector<double>& next_feature,
                 double weight = 1.0) {
        double* s = sum_.data() + base(cell_id, action);
        for (std::size_t k = 0; k < dim_; ++k) s[k] += weight * next_feature[k];
        count_[static_cast<std::size_t>(cell_id) * n_actions_ + action] +=
            static_cast<long>(weight);
    }

    void retract(int cell_id, int action, const std::vector<double>& next_feature) {
        double* s = sum_.data() + base(cell_id, action);
        for (std::size_t k = 0; k < dim_; ++k) s[k] -= next_feature[k];
        count_[static_cast<std::size_t>(cell_id) * n_actions_ + action] -= 1;
    }

    bool seen(int cell_id, int action) const {
        return count_[static_cast<std::size_t>(cell_id) * n_actions_ + action] > 0;
    }

    std::vector<double> predict(int cell_id, int action, bool* low_confidence = nullptr) const {
        const long c = count_[static_cast<std::size_t>(cell_id) * n_actions_ + action];
        if (c <= 0) {
            if (low_confidence) *low_confidence = true;
            return identity_[cell_id];
        }
        if (low_confidence) *low_confidence = false;
        const double* s = sum_.data() + base(cell_id, action);
        std::vector<double> out(dim_);
        for (std::size_t k = 0; k < dim_; ++k) out[k] = s[k] / static_cast<double>(c);
        return out;
    }

    /// Allocation-free 2-D prediction for hot loops.
    void predict2(int cell_id, int action, double& out_x, double& out_y) const {
        const long c = count_[static_cast<std::size_t>(cell_id) * n_actions_ + action];
        if (c <= 0) {
            out_x = identity_[cell_id][0];
            out_y = identity_[cell_id][1];
            return;
        }
        const double* s = sum_.data() + base(cell_id, action);
        out_x = s[0] / static_cast<double>(c);
        out_y = s[1] / static_cast<double>(c);
    }

    std::size_t dim() const { return dim_; }
    int n_cells() const { return n_cells_; }
    int n_actions() const { return n_actions_; }

private:
    std::size_t base(int cell_id, int action) const {
        return (static_cast<std::size_t>(cell_id) * n_actions_ + action) * dim_;
    }

    int n_cells_;
    int n_actions_;
    FeatureMap identity_;
    std::size_t dim_;
    std::vector<double> sum_;
    std::vector<long> count_;
};

} // namespace bisim
