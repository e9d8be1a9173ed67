#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bisim/errors.hpp"
#include "bisim/mdp.hpp"
#include "bisim/reward_model.hpp"
#include "bisim/rng.hpp"
#include "bisim/stats.hpp"
#include "bisim/wasserstein.hpp"

namespace bisim {

/// Symmetric pseudometric over state pairs with a zero diagonal.
class MetricMatrix {
public:
    explicit MetricMatrix(int n) : n_(n), d_(static_cast<std::size_t>(n) * n, 0.0) {}

    static MetricMatrix zeros(int n) { return MetricMatrix(n); }

    /// Constant off-diagonal value; diagonal stays zero.
    static MetricMatrix constant(int n, double value) {
        MetricMatrix m(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j) m.d_[static_cast<std::size_t>(i) * n + j] = value;
        return m;
    }

    /// Seeded random symmetric matrix with entries in [0, scale).
    static MetricMatrix random(int n, std::uint64_t seed, double scale = 2.0) {
        Rng rng(splitmix64(seed ^ 0x6d657472696373ULL));
        MetricMatrix m(n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) m.set(i, j, rng.uniform(0.0, scale));
        return m;
    }

    int n() const { return n_; }
    double at(int i, int j) const { return d_[static_cast<std::size_t>(i) * n_ + j]; }
    double operator()(int i, int j) const { return at(i, j); }

    /// Writes both (i,j) and (j,i); symmetry holds by construction.
    void set(int i, int j, double value) {
        d_[static_cast<std::size_t>(i) * n_ + j] = value;
        d_[static_cast<std::size_t>(j) * n_ + i] = value;
    }

    void validate(double tol = 1e-9) const {
        for (int i = 0; i < n_; ++i) {
            if (at(i, i) != 0.0)
                throw std::invalid_argument("MetricMatrix: nonzero diagonal at " +
                                            std::to_string(i));
            for (int j = 0; j < n_; ++j) {
                const double v = at(i, j);
                if (!(v >= 0.0) || !std::isfinite(v))
                    throw std::invalid_argument("MetricMatrix: entries must be finite and >= 0");
                if (std::abs(v - at(j, i)) > tol)
                    throw std::invalid_argument("MetricMatrix: asymmetric at (" +
                                                std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }

    double sup_distance(const MetricMatrix& other) const {
        double m = 0.0;
        for (std::size_t k = 0; k < d_.size(); ++k)
            m = std::max(m, std::abs(d_[k] - other.d_[k]));
        return m;
    }

    const std::vector<double>& data() const { return d_; }

private:
    int n_;
    std::vector<double> d_;
};

/// Largest pairwise distance within a state subset.
inline double diameter(const MetricMatrix& d, const std::vector<int>& subset) {
    if (subset.empty()) throw std::invalid_argument("diameter: empty subset");
    double m = 0.0;
    for (std::size_t x = 0; x < subset.size(); ++x)
        for (std::size_t y = x + 1; y < subset.size(); ++y)
            m = std::max(m, d.at(subset[x], subset[y]));
    return m;
}

inline double diameter(const MetricMatrix& d) {
    std::vector<int> all(d.n());
    for (int i = 0; i < d.n(); ++i) all[i] = i;
    return diameter(d, all);
}

/// Mean off-diagonal distance; the expected pairwise separation used by the
/// sparse-reward non-degeneracy checks.
inline double mean_pairwise_distance(const MetricMatrix& d) {
    if (d.n() < 2) return 0.0;
    double acc = 0.0;
    long cnt = 0;
    for (int i = 0; i < d.n(); ++i)
        for (int j = i + 1; j < d.n(); ++j) {
            acc += d.at(i, j);
            ++cnt;
        }
    return acc / static_cast<double>(cnt);
}

enum class OperatorMode { classic, predictive };
enum class DiscrepancyMode { closed_form, monte_carlo };

/// Coefficients and evaluation options for the metric operators.
struct OperatorConfig {
    double c_R = 1.0;
    double c_T = 0.99;
    OperatorMode mode = OperatorMode::classic;
    DiscrepancyMode discrepancy = DiscrepancyMode::closed_form;
    long mc_samples = 100000;
    std::uint64_t mc_seed = 1;
    /// When set, the predictive operator rejects cells the model never saw
    /// instead of serving prior/self-transition fallbacks.
    bool strict_model_coverage = false;

    void validate() const {
        if (!(c_R > 0.0)) throw std::invalid_argument("OperatorConfig: c_R must be > 0");
        if (!(c_T >= 0.0 && c_T < 1.0))
            throw std::invalid_argument("OperatorConfig: c_T must lie in [0, 1)");
        if (discrepancy == DiscrepancyMode::monte_carlo && mc_samples < 1)
            throw std::invalid_argument("OperatorConfig: mc_samples must be >= 1");
    }
};

/// Expected absolute difference of two independent Gaussian predictions,
/// marginalized over the policy's action choices at both states. The closed
/// form is the folded-normal mean with m = mu_i - mu_j, v = sigma_i^2 +
/// sigma_j^2; Monte Carlo averages |x - y| over reparameterized draws.
inline double delta_r_predictive(const GaussianRewardModel& model, const Policy& pi, int s_i,
                                 int s_j, const OperatorConfig& cfg) {
    cfg.validate();
    double acc = 0.0;
    for (int ai = 0; ai < pi.n_actions(); ++ai) {
        const double wi = pi.prob(s_i, ai);
        if (wi == 0.0) continue;
        for (int aj = 0; aj < pi.n_actions(); ++aj) {
            const double wj = pi.prob(s_j, aj);
            if (wj == 0.0) continue;
            const auto [mu_i, sd_i] = model.predict(s_i, ai);
            const auto [mu_j, sd_j] = model.predict(s_j, aj);
            double term;
            if (cfg.discrepancy == DiscrepancyMode::closed_form) {
                term = folded_normal_mean(mu_i - mu_j, sd_i * sd_i + sd_j * sd_j);
            } else {
                Rng rng(splitmix64(cfg.mc_seed) ^ splitmix64(0x9e3779b9ULL * (s_i + 1) +
                                                             0x85ebca6bULL * (s_j + 1) +
                                                             0xc2b2ae35ULL * (ai * 31 + aj)));
                double sum = 0.0;
                for (long k = 0; k < cfg.mc_samples; ++k) {
                    const double x = mu_i + sd_i * rng.normal();
                    const double y = mu_j + sd_j * rng.normal();
                    sum += std::abs(x - y);
                }
                term = sum / static_cast<double>(cfg.mc_samples);
            }
            acc += wi * wj * term;
        }
    }
    return acc;
}

/// One application of the on-policy bisimulation operator:
/// d'(i,j) = c_R |r^pi_i - r^pi_j| + c_T W1(d)(P^pi(.|i), P^pi(.|j)).
/// Evaluated on unordered pairs and mirrored; the diagonal stays zero.
inline MetricMatrix apply_classic_operator(const TabularMdp& mdp, const Policy& pi,
                                           const MetricMatrix& d, const OperatorConfig& cfg) {
    cfg.validate();
    detail::check_compatible(mdp, pi);
    if (d.n() != mdp.n_states())
        throw std::invalid_argument("apply_classic_operator: metric size mismatch");
    d.validate();
    const int n = mdp.n_states();
    const std::vector<double> r_pi = policy_reward(mdp, pi);
    const std::vector<double> p_pi = policy_transition(mdp, pi);
    std::vector<DiscreteDistribution> rows(n);
    for (int s = 0; s < n; ++s)
        rows[s] = DiscreteDistribution::from_dense(p_pi.data() + static_cast<std::size_t>(s) * n, n);
    MetricMatrix out(n);
    auto cost = [&d](int x, int y) { return d.at(x, y); };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double w1 = w1_discrete(rows[i], rows[j], cost);
            out.set(i, j, cfg.c_R * std::abs(r_pi[i] - r_pi[j]) + cfg.c_T * w1);
        }
    return out;
}

/// One application of the predictive bisimulation operator:
/// d'(i,j) = c_R Delta_R(i,j) + c_T W1(d)(P_hat^pi(.|i), P_hat^pi(.|j)),
/// with the reward term from the Gaussian predictor and the transition term
/// from the fitted empirical model. With an exact model (zero-std means equal
/// to the true rewards, exact transition rows) and a deterministic policy this
/// coincides with the classic operator.
inline MetricMatrix apply_predictive_operator(const TabularMdp& mdp, const Policy& pi,
                                              const GaussianRewardModel& model,
                                              const EmpiricalTransitionModel& transitions,
                                              const MetricMatrix& d, const OperatorConfig& cfg) {
    cfg.validate();
    detail::check_compatible(mdp, pi);
    if (model.n_states() != mdp.n_states() || model.n_actions() != mdp.n_actions() ||
        transitions.n_states() != mdp.n_states() || transitions.n_actions() != mdp.n_actions())
        throw std::invalid_argument("apply_predictive_operator: model dimensions mismatch");
    if (d.n() != mdp.n_states())
        throw std::invalid_argument("apply_predictive_operator: metric size mismatch");
    d.validate();
    if (cfg.strict_model_coverage) {
        std::string missing;
        for (int s = 0; s < mdp.n_states(); ++s)
            for (int a = 0; a < mdp.n_actions(); ++a)
                if (pi.prob(s, a) > 0.0 && (!model.seen(s, a) || !transitions.seen(s, a)))
                    missing += " (" + std::to_string(s) + "," + std::to_string(a) + ")";
        if (!missing.empty())
            throw model_error("apply_predictive_operator: unseen cells:" + missing);
    }
    const int n = mdp.n_states();
    std::vector<DiscreteDistribution> rows(n);
    for (int s = 0; s < n; ++s) {
        const std::vector<double> row = transitions.policy_row(s, pi);
        rows[s] = DiscreteDistribution::from_dense(row.data(), n);
    }
    MetricMatrix out(n);
    auto cost = [&d](int x, int y) { return d.at(x, y); };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double dr = delta_r_predictive(model, pi, i, j, cfg);
            const double w1 = w1_discrete(rows[i], rows[j], cost);
            out.set(i, j, cfg.c_R * dr + cfg.c_T * w1);
        }
    return out;
}

using MetricOperator = std::function<MetricMatrix(const MetricMatrix&)>;

struct FixedPointResult {
    MetricMatrix metric{1};
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> residual_history;
};

/// Iterates a c_T-contractive metric operator to its fixed point. Stops once
/// the update residual drops below tol * (1 - c_T), which bounds the true
/// distance to the fixed point by tol and keeps the iteration count within
/// ceil(log(tol (1-c_T) / r0) / log c_T).
inline FixedPointResult fixed_point(const MetricOperator& op, const MetricMatrix& d0, double c_T,
                                    double tol = 1e-10, int max_iters = 100000) {
    if (!(tol > 0.0)) throw std::invalid_argument("fixed_point: tol must be positive");
    if (!(c_T >= 0.0 && c_T < 1.0))
        throw std::invalid_argument("fixed_point: c_T must lie in [0, 1)");
    const double stop = tol * std::max(1.0 - c_T, 1e-16);
    FixedPointResult res;
    res.metric = d0;
    for (int it = 0; it < max_iters; ++it) {
        MetricMatrix next = op(res.metric);
        const double r = next.sup_distance(res.metric);
        res.metric = std::move(next);
        res.iterations = it + 1;
        res.residual = r;
        res.residual_history.push_back(r);
        if (r <= stop) return res;
    }
    throw solver_error("fixed_point: no convergence after " + std::to_string(max_iters) +
                       " iterations, residual " + std::to_string(res.residual));
}

/// A-priori Banach iteration bound for the stopping rule above.
inline int fixed_point_iteration_bound(double r0, double c_T, double tol) {
    if (r0 <= tol * std::max(1.0 - c_T, 1e-16)) return 1;
    if (c_T <= 0.0) return 1;
    return static_cast<int>(
        std::ceil(std::log(tol * (1.0 - c_T) / r0) / std::log(c_T)));
}

} // namespace bisim
