#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "bisim/intrinsic.hpp"
#include "bisim/reward_model.hpp"
#include "bisim/verify.hpp"

using namespace bisim;

namespace {

/// Test model with directly scriptable predictions.
struct ScriptedModel {
    std::vector<std::vector<double>> means;    // [s][a]
    std::vector<std::vector<double>> features; // [s] -> feature (action-independent)

    double reward_mean(int s, int a) const { return means[s][a]; }
    std::vector<double> predicted_feature(int s, int) const { return features[s]; }
    double anchor_distance(int s, int, const std::vector<double>& point) const {
        return euclidean_distance(features[s], point);
    }
};

} // namespace

TEST_CASE("compute_anchor means and edge cases") {
    // batch of one record: anchor equals that record's (r, z')
    Anchor one = compute_anchor({0.7}, {{1.0, 2.0}});
    CHECK(one.r_star == doctest::Approx(0.7));
    CHECK(one.z_star == std::vector<double>{1.0, 2.0});

    Anchor mean = compute_anchor({0.0, 0.0, 1.0, 1.0},
                                 {{0, 0}, {0, 0}, {2, 4}, {2, 4}});
    CHECK(mean.r_star == doctest::Approx(0.5));
    CHECK(mean.z_star[0] == doctest::Approx(1.0));
    CHECK(mean.z_star[1] == doctest::Approx(2.0));

    Anchor pair = compute_anchor({0.0, 0.0}, {{0, 0}, {2, 4}});
    CHECK(pair.z_star == std::vector<double>{1.0, 2.0});

    CHECK_THROWS_AS(compute_anchor({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(compute_anchor({1.0}, {{1.0}, {2.0}}), std::invalid_argument);
}

TEST_CASE("compute_anchor is invariant to batch ordering") {
    std::vector<TransitionRecord> batch = {
        {0, 0, 0.1, 1, false}, {1, 0, 0.9, 0, false}, {0, 0, 0.4, 1, false}};
    ScriptedModel model{{{0.0}, {0.0}}, {{0.0, 1.0}, {3.0, -1.0}}};
    Anchor a = compute_anchor(batch, model);
    std::reverse(batch.begin(), batch.end());
    Anchor b = compute_anchor(batch, model);
    CHECK(a.r_star == doctest::Approx(b.r_star));
    CHECK(a.z_star[0] == doctest::Approx(b.z_star[0]));
    CHECK(a.z_star[1] == doctest::Approx(b.z_star[1]));
}

TEST_CASE("potential: anchor match, linear combination, coefficient zeroing") {
    ScriptedModel model{{{0.5}}, {{1.0, 1.0}}};
    ShapingConfig cfg;
    cfg.c_R = 1.0;
    cfg.c_T = 0.99;

    Anchor match{0.5, {1.0, 1.0}};
    CHECK(potential(model, 0, 0, match, cfg) == doctest::Approx(0.0));

    // |mu - r*| = 0.5, distance to z* = 1.0 -> 0.5 + 0.99
    Anchor off{1.0, {1.0, 0.0}};
    CHECK(potential(model, 0, 0, off, cfg) == doctest::Approx(1.49));

    cfg.c_T = 0.0;
    CHECK(potential(model, 0, 0, off, cfg) == doctest::Approx(0.5));
}

TEST_CASE("shaping bonus and shaped reward arithmetic") {
    CHECK(shaping_bonus(1.0, 1.0, 0.99) == doctest::Approx(-0.01));
    CHECK(shaping_bonus(0.0, 2.0, 0.5) == doctest::Approx(1.0));
    CHECK(shaping_bonus(3.0, 3.0, 1.0) == doctest::Approx(0.0));

    CHECK(shaped_reward(0.7, -0.3, 0.0) == doctest::Approx(0.7));
    CHECK(shaped_reward(0.0, -0.01, 1.0) == doctest::Approx(-0.01));
    CHECK(shaped_reward(0.0, 0.2, 10.0) == doctest::Approx(2.0));
}

TEST_CASE("state_only_potential marginalizes over the policy") {
    // two actions with potentials (1, 3) at state 0
    ScriptedModel model{{{1.0, 3.0}}, {{0.0, 0.0}}};
    ShapingConfig cfg;
    cfg.c_R = 1.0;
    cfg.c_T = 0.0; // isolate the reward term
    Anchor anchor{0.0, {0.0, 0.0}};

    Policy uni = Policy::uniform(1, 2);
    CHECK(state_only_potential(model, 0, uni, anchor, cfg) == doctest::Approx(2.0));

    Policy det = Policy::deterministic(1, 2, {1});
    CHECK(state_only_potential(model, 0, det, anchor, cfg) ==
          doctest::Approx(potential(model, 0, 1, anchor, cfg)));

    // anchor-matching predictions for every action -> zero
    ScriptedModel flat{{{0.0, 0.0}}, {{0.0, 0.0}}};
    cfg.c_T = 0.7;
    CHECK(state_only_potential(flat, 0, uni, anchor, cfg) == doctest::Approx(0.0));
}

TEST_CASE("telescoping: discounted bonus sums collapse to endpoint potentials") {
    // scripted per-step potentials under one anchor snapshot
    std::vector<double> phi = {0.4, 1.3, 0.2, 2.0, 0.9, 0.05};
    const double gamma = 0.97;
    const int T = static_cast<int>(phi.size()) - 1;
    double lhs = 0.0, g = 1.0;
    for (int t = 0; t < T; ++t) {
        lhs += g * shaping_bonus(phi[t], phi[t + 1], gamma);
        g *= gamma;
    }
    const double rhs = g * phi[T] - phi[0]; // g == gamma^T here
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("potential upper bound from model means and feature diameter") {
    TabularMdp mdp = random_mdp(3, 5, 2, 0.3);
    Policy pi = Policy::uniform(5, 2);
    std::vector<TransitionRecord> replay = simulate_replay(mdp, pi, 500, 4);
    GaussianRewardModel rmodel = fit_reward_model(
        5, 2, reward_samples_from_replay(replay, 3, mdp.gamma()));
    EmpiricalTransitionModel tmodel = EmpiricalTransitionModel::fit(5, 2, replay);
    FeatureMap features = {{0, 0}, {1, 0}, {0, 1}, {1, 1}, {0.5, 0.5}};
    TabularPotentialModel pmodel{rmodel, tmodel, features};
    std::vector<TransitionRecord> batch(replay.begin(), replay.begin() + 32);
    Anchor anchor = compute_anchor(batch, pmodel);
    ShapingConfig cfg;
    cfg.c_R = 1.0;
    cfg.c_T = 0.9;

    double max_mu = 0.0;
    for (int s = 0; s < 5; ++s)
        for (int a = 0; a < 2; ++a) max_mu = std::max(max_mu, std::abs(rmodel.predict(s, a).first));
    double feat_diam = 0.0;
    for (const auto& f : features)
        for (const auto& g : features) feat_diam = std::max(feat_diam, euclidean_distance(f, g));
    const double bound = cfg.c_R * (max_mu + std::abs(anchor.r_star)) + cfg.c_T * feat_diam;
    for (int s = 0; s < 5; ++s)
        for (int a = 0; a < 2; ++a) {
            const double p = potential(pmodel, s, a, anchor, cfg);
            CHECK(p >= 0.0);
            CHECK(p <= bound + 1e-12);
        }
}

TEST_CASE("verify_policy_invariance: zero and constant potentials") {
    TabularMdp mdp = random_mdp(9, 4, 3, 0.2);
    const double tol = 1e-9;

    InvarianceReport zero = verify_policy_invariance(mdp, {0, 0, 0, 0}, 1.0, tol);
    CHECK(zero.max_residual <= 2.0 * tol);
    CHECK(zero.argmax_match);

    InvarianceReport constant =
        verify_policy_invariance(mdp, {0.8, 0.8, 0.8, 0.8}, 1.5, tol);
    CHECK(constant.max_residual <= 2.0 * tol + 1e-10);
    CHECK(constant.argmax_match);
}

TEST_CASE("verify_policy_invariance: seeded 6-state instance") {
    TabularMdp mdp = random_mdp(13, 6, 3, 0.0, 0.9);
    Rng rng(14);
    std::vector<double> phi(6);
    for (double& p : phi) p = rng.uniform();
    InvarianceReport rep = verify_policy_invariance(mdp, phi, 1.0, 2.5e-7);
    CHECK(rep.max_residual <= 1e-6);
    CHECK(rep.argmax_match);

    CHECK_THROWS_AS(verify_policy_invariance(mdp, {1.0}, 1.0, 1e-8), std::invalid_argument);
}

TEST_CASE("invariance suite over seeded triples") {
    SuiteReport report = invariance_suite(16, 5);
    CHECK(report.all_pass());
}
