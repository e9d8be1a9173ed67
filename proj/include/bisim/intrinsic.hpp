#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bisim/errors.hpp"
#include "bisim/mdp.hpp"
#include "bisim/reward_model.hpp"
#include "bisim/wasserstein.hpp"

namespace bisim {

/// Batch-averaged pseudo-state: anchor reward plus anchor next-state feature.
struct Anchor {
    double r_star = 0.0;
    std::vector<double> z_star;
};

enum class AnchorPolicy { batch_mean, fixed_initial_state, random_batch_element };

/// Shaping coefficients: r' = r + eta * (gamma * Phi(next) - Phi(current)).
struct ShapingConfig {
    double eta = 1.0;
    double gamma = 0.99;
    double c_R = 1.0;
    double c_T = 0.99;
    AnchorPolicy anchor_policy = AnchorPolicy::batch_mean;

    void validate() const {
        if (!(eta >= 0.0) || !std::isfinite(eta))
            throw std::invalid_argument("ShapingConfig: eta must be finite and >= 0");
        if (!(gamma >= 0.0 && gamma < 1.0))
            throw std::invalid_argument("ShapingConfig: gamma must lie in [0, 1)");
    }
};

/// Element-wise mean of batch rewards and predicted next-state features.
inline Anchor compute_anchor(const std::vector<double>& rewards,
                             const std::vector<std::vector<double>>& predicted_features) {
    if (rewards.empty() || rewards.size() != predicted_features.size())
        throw std::invalid_argument("compute_anchor: empty or mismatched batch");
    Anchor a;
    a.z_star.assign(predicted_features[0].size(), 0.0);
    for (std::size_t k = 0; k < rewards.size(); ++k) {
        a.r_star += rewards[k];
        if (predicted_features[k].size() != a.z_star.size())
            throw std::invalid_argument("compute_anchor: inconsistent feature dimensions");
        for (std::size_t t = 0; t < a.z_star.size(); ++t) a.z_star[t] += predicted_features[k][t];
    }
    const double inv = 1.0 / static_cast<double>(rewards.size());
    a.r_star *= inv;
    for (double& x : a.z_star) x *= inv;
    return a;
}

/// Potential-model view over the tabular reward and transition models: the
/// predicted next feature is the expectation of the state features under the
/// fitted next-state distribution, and the anchor distance is the W1 between
/// that distribution and the anchor point.
struct TabularPotentialModel {
    const GaussianRewardModel& rewards;
    const EmpiricalTransitionModel& transitions;
    const FeatureMap& features;

    double reward_mean(int s, int a) const { return rewards.predict(s, a).first; }

    std::vector<double> predicted_feature(int s, int a) const {
        const std::vector<double> row = transitions.row(s, a);
        std::vector<double> out(features.empty() ? 0 : features[0].size(), 0.0);
        for (std::size_t t = 0; t < row.size(); ++t) {
            if (row[t] == 0.0) continue;
            for (std::size_t k = 0; k < out.size(); ++k) out[k] += row[t] * features[t][k];
        }
        return out;
    }

    double anchor_distance(int s, int a, const std::vector<double>& point) const {
        return w1_to_point(transitions.query(s, a), features, point);
    }
};

template <class Model>
Anchor compute_anchor(const std::vector<TransitionRecord>& batch, const Model& model) {
    if (batch.empty()) throw std::invalid_argument("compute_anchor: empty batch");
    std::vector<double> rewards;
    std::vector<std::vector<double>> feats;
    rewards.reserve(batch.size());
    feats.reserve(batch.size());
    for (const TransitionRecord& rec : batch) {
        rewards.push_back(rec.r);
        feats.push_back(model.predicted_feature(rec.s, rec.a));
    }
    return compute_anchor(rewards, feats);
}

/// Metric-based potential with a pseudo-state anchor:
/// Phi(s,a) = c_R |mu(s,a) - r_star| + c_T W1(P_hat(s,a), z_star). Always >= 0.
template <class Model>
double potential(const Model& model, int s, int a, const Anchor& anchor,
                 const ShapingConfig& cfg) {
    return cfg.c_R * std::abs(model.reward_mean(s, a) - anchor.r_star) +
           cfg.c_T * model.anchor_distance(s, a, anchor.z_star);
}

/// Potential-difference bonus F = gamma * Phi(next) - Phi(current); both
/// potentials must come from the same anchor snapshot.
inline double shaping_bonus(double phi_t, double phi_next, double gamma) {
    return gamma * phi_next - phi_t;
}

inline double shaped_reward(double r, double bonus, double eta) { return r + eta * bonus; }

/// Action-marginalized potential Phi(s) = E_{a~pi} Phi(s,a); the state-only
/// form consumed by the policy-invariance oracle.
template <class Model>
double state_only_potential(const Model& model, int s, const Policy& pi, const Anchor& anchor,
                            const ShapingConfig& cfg) {
    double acc = 0.0;
    for (int a = 0; a < pi.n_actions(); ++a) {
        const double w = pi.prob(s, a);
        if (w == 0.0) continue;
        acc += w * potential(model, s, a, anchor, cfg);
    }
    return acc;
}

struct InvarianceReport {
    double max_residual = 0.0;
    bool argmax_match = true;
    int first_mismatch_state = -1;
};

/// Checks that shaping with a state potential preserves optimal action values
/// up to the state-dependent shift: builds M' with
/// r'(s,a) = r(s,a) + eta (gamma E_{s'|s,a} phi(s') - phi(s)), solves both MDPs
/// by value iteration, and reports max |Q*_{M'} - Q*_M + eta phi(s)| together
/// with greedy-argmax agreement (lowest-index tie-break). `tol` bounds each
/// solve's distance to its true Q*, so the residual is at most 2 tol plus
/// round-off on an exact-arithmetic instance.
inline InvarianceReport verify_policy_invariance(const TabularMdp& mdp,
                                                 const std::vector<double>& phi, double eta,
                                                 double tol = 1e-8) {
    if (static_cast<int>(phi.size()) != mdp.n_states())
        throw std::invalid_argument("verify_policy_invariance: one phi value per state");
    for (double p : phi)
        if (!std::isfinite(p))
            throw std::invalid_argument("verify_policy_invariance: phi must be finite");
    const int n = mdp.n_states();
    const int m = mdp.n_actions();
    std::vector<double> shaped(static_cast<std::size_t>(n) * m);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < m; ++a) {
            const double* row = mdp.transition_row(s, a);
            double exp_phi = 0.0;
            for (int t = 0; t < n; ++t) exp_phi += row[t] * phi[t];
            shaped[static_cast<std::size_t>(s) * m + a] =
                mdp.reward(s, a) + eta * (mdp.gamma() * exp_phi - phi[s]);
        }
    const TabularMdp shaped_mdp(n, m, mdp.transition_data(), std::move(shaped), mdp.gamma());

    // Stop each value iteration tightly enough that the returned tables are
    // within tol of their true fixed points.
    const double gamma = mdp.gamma();
    const double vi_tol = gamma > 0.0 ? tol * (1.0 - gamma) / gamma : tol;
    const ValueTable q_base = value_iteration(mdp, vi_tol);
    const ValueTable q_shaped = value_iteration(shaped_mdp, vi_tol);

    InvarianceReport report;
    for (int s = 0; s < n; ++s) {
        int argmax_base = 0, argmax_shaped = 0;
        for (int a = 0; a < m; ++a) {
            report.max_residual = std::max(
                report.max_residual,
                std::abs(q_shaped.q(s, a) - q_base.q(s, a) + eta * phi[s]));
            if (q_base.q(s, a) > q_base.q(s, argmax_base)) argmax_base = a;
            if (q_shaped.q(s, a) > q_shaped.q(s, argmax_shaped)) argmax_shaped = a;
        }
        if (argmax_base != argmax_shaped && report.argmax_match) {
            report.argmax_match = false;
            report.first_mismatch_state = s;
        }
    }
    return report;
}

} // namespace bisim
