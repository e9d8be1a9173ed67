#include <doctest.h>

#include <cmath>
#include <vector>

#include "bisim/mdp.hpp"
#include "bisim/reward_model.hpp"
#include "bisim/rng.hpp"

using namespace bisim;

TEST_CASE("mc_target single-step, discounted sum and terminal truncation") {
    std::vector<TransitionRecord> traj = {{0, 0, 0.0, 1, false},
                                          {1, 0, 0.0, 2, false},
                                          {2, 0, 1.0, 3, false}};
    CHECK(mc_target(traj, 2, 1, 0.99) == doctest::Approx(1.0));
    // 0 + 0.99*0 + 0.99^2*1 = 0.9801
    CHECK(mc_target(traj, 0, 3, 0.99) == doctest::Approx(0.9801));

    std::vector<TransitionRecord> cut = {{0, 0, 0.5, 1, true}, {1, 0, 9.0, 2, false}};
    CHECK(mc_target(cut, 0, 3, 0.99) == doctest::Approx(0.5));

    CHECK_THROWS_AS(mc_target(traj, 3, 1, 0.99), std::out_of_range);
    CHECK_THROWS_AS(mc_target(traj, -1, 1, 0.99), std::out_of_range);
}

TEST_CASE("fit_reward_model: MLE mean and clamped population std") {
    std::vector<RewardSample> data = {
        {0, 0, 0.0}, {0, 0, 0.0}, {0, 0, 0.0}, // constant -> sigma_min
        {1, 0, 1.0}, {1, 0, 3.0},              // mu 2, population std 1
        {2, 0, 0.7},                           // single sample -> sigma_min
    };
    GaussianRewardModel model = fit_reward_model(3, 1, data, 1e-4, 1.0);
    auto [mu0, sd0] = model.predict(0, 0);
    CHECK(mu0 == doctest::Approx(0.0));
    CHECK(sd0 == doctest::Approx(1e-4));
    auto [mu1, sd1] = model.predict(1, 0);
    CHECK(mu1 == doctest::Approx(2.0));
    CHECK(sd1 == doctest::Approx(1.0));
    auto [mu2, sd2] = model.predict(2, 0);
    CHECK(mu2 == doctest::Approx(0.7));
    CHECK(sd2 == doctest::Approx(1e-4));

    CHECK_THROWS_AS(fit_reward_model(3, 1, data, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(fit_reward_model(3, 1, data, 0.5, 0.1), std::invalid_argument);
}

TEST_CASE("predict serves the prior for unseen cells and clamps always") {
    GaussianRewardModel model = fit_reward_model(2, 2, {{0, 0, 5.0}, {0, 0, -5.0}}, 1e-4, 1.0);
    auto [mu, sd] = model.predict(1, 1);
    CHECK(mu == doctest::Approx(0.0));
    CHECK(sd == doctest::Approx(1.0)); // prior std = sigma_max
    CHECK_FALSE(model.seen(1, 1));
    // population std of {5, -5} is 5, clamped to sigma_max = 1
    auto [mu0, sd0] = model.predict(0, 0);
    CHECK(mu0 == doctest::Approx(0.0));
    CHECK(sd0 == doctest::Approx(1.0));
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) {
            const double sigma = model.predict(s, a).second;
            CHECK(sigma >= model.sigma_min());
            CHECK(sigma <= model.sigma_max());
        }
}

TEST_CASE("NLL optimality: the fitted cell parameters are a local minimum") {
    std::vector<double> targets = {0.2, 0.9, 0.4, 0.7, 0.55};
    std::vector<RewardSample> data;
    for (double t : targets) data.push_back({0, 0, t});
    GaussianRewardModel model = fit_reward_model(1, 1, data, 1e-4, 1.0);
    const auto [mu, sd] = model.predict(0, 0);
    const double base = gaussian_nll(targets, mu, sd);
    for (double dmu : {-0.01, 0.01})
        CHECK(gaussian_nll(targets, mu + dmu, sd) >= base - 1e-12);
    for (double dsd : {-0.01, 0.01}) {
        const double cand = sd + dsd;
        if (cand >= model.sigma_min() && cand <= model.sigma_max())
            CHECK(gaussian_nll(targets, mu, cand) >= base - 1e-12);
    }
}

TEST_CASE("sample_reward: degenerate sigma, moments, reproducibility") {
    GaussianRewardModel model(1, 1, 0.0, 1.0, 0.0, 1.0);
    model.set_cell(0, 0, 0.37, 0.0, 1);
    Rng rng(5);
    for (int i = 0; i < 10; ++i) CHECK(sample_reward(model, 0, 0, rng) == 0.37);

    model.set_cell(0, 0, 0.0, 1.0, 1);
    Rng rng2(9);
    double sum = 0.0, sumsq = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
        const double x = sample_reward(model, 0, 0, rng2);
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sumsq / n - mean * mean);
    CHECK(std::abs(mean) < 0.005);
    CHECK(sd > 0.995);
    CHECK(sd < 1.005);

    Rng a(33), b(33);
    for (int i = 0; i < 50; ++i)
        CHECK(sample_reward(model, 0, 0, a) == sample_reward(model, 0, 0, b));
}

TEST_CASE("transition model: counts, smoothing, fallback") {
    std::vector<TransitionRecord> data = {{0, 0, 0.0, 1, false},
                                          {0, 0, 0.0, 1, false},
                                          {0, 0, 0.0, 1, false},
                                          {0, 0, 0.0, 2, false}};
    EmpiricalTransitionModel model = EmpiricalTransitionModel::fit(3, 1, data);
    std::vector<double> row = model.row(0, 0);
    CHECK(row[1] == doctest::Approx(0.75));
    CHECK(row[2] == doctest::Approx(0.25));
    CHECK(row[0] == doctest::Approx(0.0));

    // deterministic observations -> a point mass
    EmpiricalTransitionModel det =
        EmpiricalTransitionModel::fit(3, 1, {{1, 0, 0.0, 2, false}, {1, 0, 0.0, 2, false}});
    bool low = true;
    DiscreteDistribution d = det.query(1, 0, &low);
    CHECK_FALSE(low);
    CHECK(d.support == std::vector<int>{2});
    CHECK(d.weights[0] == doctest::Approx(1.0));

    // unseen cell -> self transition, flagged
    DiscreteDistribution self = det.query(2, 0, &low);
    CHECK(low);
    CHECK(self.support == std::vector<int>{2});
    CHECK(self.weights[0] == doctest::Approx(1.0));

    CHECK_THROWS_AS(EmpiricalTransitionModel(3, 1, -0.5), std::invalid_argument);
}

TEST_CASE("transition model consistency with exact counts") {
    TabularMdp mdp(2, 1, {0.75, 0.25, 0.5, 0.5}, {0.0, 0.0}, 0.9);
    // exact rational frequencies: observing each row 4 times in proportion
    EmpiricalTransitionModel model(2, 1, 0.0);
    model.observe(0, 0, 0, 3.0);
    model.observe(0, 0, 1, 1.0);
    model.observe(1, 0, 0, 2.0);
    model.observe(1, 0, 1, 2.0);
    for (int s = 0; s < 2; ++s) {
        std::vector<double> row = model.row(s, 0);
        for (int t = 0; t < 2; ++t) CHECK(row[t] == mdp.p(s, 0, t));
    }
    // the exact constructor reproduces the true distributions verbatim
    EmpiricalTransitionModel exact = EmpiricalTransitionModel::exact(mdp);
    for (int s = 0; s < 2; ++s) {
        std::vector<double> row = exact.row(s, 0);
        for (int t = 0; t < 2; ++t) CHECK(row[t] == doctest::Approx(mdp.p(s, 0, t)).epsilon(1e-15));
    }
}

TEST_CASE("simulate_replay covers the policy support and respects episodes") {
    TabularMdp mdp = random_mdp(3, 4, 2, 0.0);
    Policy pi = Policy::uniform(4, 2);
    std::vector<TransitionRecord> replay = simulate_replay(mdp, pi, 400, 11, 50);
    CHECK(replay.size() == 400);
    int dones = 0;
    for (const TransitionRecord& r : replay) dones += r.done;
    CHECK(dones == 8);
    std::vector<TransitionRecord> again = simulate_replay(mdp, pi, 400, 11, 50);
    for (std::size_t i = 0; i < replay.size(); ++i) {
        CHECK(replay[i].s == again[i].s);
        CHECK(replay[i].a == again[i].a);
        CHECK(replay[i].s_next == again[i].s_next);
    }
}

TEST_CASE("next-feature model: running mean and identity fallback") {
    FeatureMap identity = {{0.0, 0.0}, {1.0, 1.0}};
    NextFeatureModel model(2, 1, identity);
    bool low = false;
    CHECK(model.predict(0, 0, &low) == std::vector<double>{0.0, 0.0});
    CHECK(low);

    model.observe(0, 0, {0.0, 0.0});
    model.observe(0, 0, {2.0, 4.0});
    CHECK(model.predict(0, 0, &low) == std::vector<double>{1.0, 2.0});
    CHECK_FALSE(low);
    double fx = -1, fy = -1;
    model.predict2(0, 0, fx, fy);
    CHECK(fx == doctest::Approx(1.0));
    CHECK(fy == doctest::Approx(2.0));

    model.retract(0, 0, {2.0, 4.0});
    CHECK(model.predict(0, 0) == std::vector<double>{0.0, 0.0});
}
