#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "bisim/maze.hpp"
#include "bisim/mdp.hpp"

using namespace bisim;

namespace {

TabularMdp two_state_self_loops(double r0, double r1, double gamma = 0.9) {
    // one action, each state loops on itself
    std::vector<double> tr = {1, 0, 0, 1};
    std::vector<double> rew = {r0, r1};
    return TabularMdp(2, 1, std::move(tr), std::move(rew), gamma);
}

/// Enumerates all deterministic policies of a small MDP and evaluates each
/// exactly; the ceiling oracle for value iteration.
std::vector<ValueTable> enumerate_policy_values(const TabularMdp& mdp) {
    const int n = mdp.n_states(), m = mdp.n_actions();
    long total = 1;
    for (int s = 0; s < n; ++s) total *= m;
    std::vector<ValueTable> out;
    for (long code = 0; code < total; ++code) {
        long c = code;
        std::vector<int> actions(n);
        for (int s = 0; s < n; ++s) {
            actions[s] = static_cast<int>(c % m);
            c /= m;
        }
        out.push_back(policy_evaluation_direct(mdp, Policy::deterministic(n, m, actions)));
    }
    return out;
}

} // namespace

TEST_CASE("policy_reward basics") {
    TabularMdp mdp = random_mdp(3, 4, 2, 0.0);
    // deterministic policy picking action 0 on a constant-reward table
    std::vector<double> rew(8, 0.0);
    for (int s = 0; s < 4; ++s) rew[s * 2] = 1.0;
    TabularMdp constant(4, 2, mdp.transition_data(), rew, 0.9);
    Policy pick0 = Policy::deterministic(4, 2, {0, 0, 0, 0});
    for (double r : policy_reward(constant, pick0)) CHECK(r == doctest::Approx(1.0));

    // uniform over two actions with rewards (0, 1)
    std::vector<double> rew01(8);
    for (int s = 0; s < 4; ++s) {
        rew01[s * 2] = 0.0;
        rew01[s * 2 + 1] = 1.0;
    }
    TabularMdp half(4, 2, mdp.transition_data(), rew01, 0.9);
    for (double r : policy_reward(half, Policy::uniform(4, 2)))
        CHECK(r == doctest::Approx(0.5));
}

TEST_CASE("policy_reward matches brute-force summation on a seeded instance") {
    TabularMdp mdp = random_mdp(11, 3, 3, 0.2);
    Policy pi = random_policy(5, 3, 3);
    std::vector<double> got = policy_reward(mdp, pi);
    for (int s = 0; s < 3; ++s) {
        double expected = 0.0;
        for (int a = 0; a < 3; ++a) expected += pi.prob(s, a) * mdp.reward(s, a);
        CHECK(got[s] == doctest::Approx(expected).epsilon(1e-14));
    }
}

TEST_CASE("policy_reward rejects mismatched dimensions") {
    TabularMdp mdp = random_mdp(1, 3, 2, 0.0);
    CHECK_THROWS_AS(policy_reward(mdp, Policy::uniform(3, 3)), std::invalid_argument);
    CHECK_THROWS_AS(policy_reward(mdp, Policy::uniform(4, 2)), std::invalid_argument);
}

TEST_CASE("policy_transition selection, mixture and brute-force agreement") {
    // two states, two actions with opposite deterministic rows
    std::vector<double> tr = {1, 0, 0, 1, /* state 1 */ 1, 0, 0, 1};
    TabularMdp mdp(2, 2, tr, std::vector<double>(4, 0.0), 0.9);

    std::vector<double> det = policy_transition(mdp, Policy::deterministic(2, 2, {1, 0}));
    CHECK(det[0] == 0.0);
    CHECK(det[1] == 1.0);
    CHECK(det[2] == 1.0);

    std::vector<double> mix = policy_transition(mdp, Policy::uniform(2, 2));
    CHECK(mix[0] == doctest::Approx(0.5));
    CHECK(mix[1] == doctest::Approx(0.5));

    TabularMdp seeded = random_mdp(17, 5, 2, 0.0);
    Policy pi = random_policy(23, 5, 2);
    std::vector<double> got = policy_transition(seeded, pi);
    for (int s = 0; s < 5; ++s) {
        double row_sum = 0.0;
        for (int t = 0; t < 5; ++t) {
            double expected = 0.0;
            for (int a = 0; a < 2; ++a) expected += pi.prob(s, a) * seeded.p(s, a, t);
            CHECK(std::abs(got[s * 5 + t] - expected) < 1e-14);
            row_sum += got[s * 5 + t];
        }
        CHECK(std::abs(row_sum - 1.0) < 1e-12);
    }
}

TEST_CASE("policy_evaluation geometric series and zero rewards") {
    // single state, self-loop, r = 1, gamma = 0.5 -> V = 2
    TabularMdp loop(1, 1, {1.0}, {1.0}, 0.5);
    CHECK(policy_evaluation(loop, Policy::uniform(1, 1)).v(0) == doctest::Approx(2.0));

    TabularMdp zero = random_mdp(3, 6, 2, 1.0);
    for (double v : policy_evaluation(zero, Policy::uniform(6, 2)).values)
        CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("policy_evaluation matches the direct linear solve") {
    TabularMdp mdp = random_mdp(29, 5, 3, 0.3);
    Policy pi = random_policy(31, 5, 3);
    ValueTable iterative = policy_evaluation(mdp, pi, 1e-12);
    ValueTable direct = policy_evaluation_direct(mdp, pi);
    for (int s = 0; s < 5; ++s)
        CHECK(iterative.v(s) == doctest::Approx(direct.v(s)).epsilon(1e-8));
}

TEST_CASE("policy_evaluation fixed point: one more backup moves V by <= tol") {
    const double tol = 1e-10;
    TabularMdp mdp = random_mdp(41, 6, 2, 0.0);
    Policy pi = random_policy(43, 6, 2);
    ValueTable v = policy_evaluation(mdp, pi, tol);
    std::vector<double> r = policy_reward(mdp, pi);
    std::vector<double> p = policy_transition(mdp, pi);
    for (int s = 0; s < 6; ++s) {
        double backed = r[s];
        for (int t = 0; t < 6; ++t) backed += mdp.gamma() * p[s * 6 + t] * v.v(t);
        CHECK(std::abs(backed - v.v(s)) <= tol);
    }
}

TEST_CASE("value_iteration reduces to evaluation for a single action") {
    TabularMdp mdp = random_mdp(53, 4, 1, 0.0);
    ValueTable q = value_iteration(mdp, 1e-12);
    ValueTable v = policy_evaluation_direct(mdp, Policy::uniform(4, 1));
    for (int s = 0; s < 4; ++s) CHECK(q.q(s, 0) == doctest::Approx(v.v(s)).epsilon(1e-9));

    TabularMdp zero = random_mdp(3, 4, 2, 1.0);
    for (double x : value_iteration(zero).values) CHECK(x == doctest::Approx(0.0));
}

TEST_CASE("value_iteration matches exhaustive policy enumeration") {
    TabularMdp mdp = random_mdp(61, 2, 2, 0.0);
    ValueTable q = value_iteration(mdp, 1e-12);
    std::vector<ValueTable> all = enumerate_policy_values(mdp);
    for (int s = 0; s < 2; ++s) {
        double best = -1e300;
        for (const ValueTable& v : all) best = std::max(best, v.v(s));
        double q_best = std::max(q.q(s, 0), q.q(s, 1));
        CHECK(q_best == doctest::Approx(best).epsilon(1e-8));
    }
}

TEST_CASE("value_iteration dominates every deterministic policy entrywise") {
    for (std::uint64_t seed : {71ULL, 72ULL, 73ULL}) {
        TabularMdp mdp = random_mdp(seed, 3, 3, 0.2);
        ValueTable q = value_iteration(mdp, 1e-12);
        const int n = 3, m = 3;
        long total = 27;
        for (long code = 0; code < total; ++code) {
            long c = code;
            std::vector<int> actions(n);
            for (int s = 0; s < n; ++s) {
                actions[s] = static_cast<int>(c % m);
                c /= m;
            }
            Policy pi = Policy::deterministic(n, m, actions);
            ValueTable v = policy_evaluation_direct(mdp, pi);
            // Q*(s,a) >= Q^pi(s,a) = r(s,a) + gamma sum P V^pi
            for (int s = 0; s < n; ++s)
                for (int a = 0; a < m; ++a) {
                    double q_pi = mdp.reward(s, a);
                    for (int t = 0; t < n; ++t) q_pi += mdp.gamma() * mdp.p(s, a, t) * v.v(t);
                    CHECK(q.q(s, a) >= q_pi - 1e-8);
                }
        }
    }
}

TEST_CASE("reward monotonicity: raising one reward never lowers V") {
    TabularMdp mdp = random_mdp(83, 5, 2, 0.3);
    Policy pi = random_policy(89, 5, 2);
    ValueTable base = policy_evaluation_direct(mdp, pi);
    TabularMdp bumped = mdp.with_reward(2, 1, mdp.reward(2, 1) + 0.7);
    ValueTable after = policy_evaluation_direct(bumped, pi);
    for (int s = 0; s < 5; ++s) CHECK(after.v(s) >= base.v(s) - 1e-12);
}

TEST_CASE("random_mdp determinism and sparsity accounting") {
    TabularMdp a = random_mdp(7, 6, 3, 0.4);
    TabularMdp b = random_mdp(7, 6, 3, 0.4);
    CHECK(a.transition_data() == b.transition_data());
    CHECK(a.reward_data() == b.reward_data());

    TabularMdp all_zero = random_mdp(9, 4, 2, 1.0);
    for (double r : all_zero.reward_data()) CHECK(r == 0.0);

    // exactly ceil(10 * 2 * 0.5) = 10 zero cells
    TabularMdp half = random_mdp(13, 10, 2, 0.5);
    int zeros = 0;
    for (double r : half.reward_data()) zeros += (r == 0.0);
    CHECK(zeros == 10);
}

TEST_CASE("TabularMdp validation rejects malformed inputs") {
    CHECK_THROWS_AS(TabularMdp(1, 1, {0.5}, {0.0}, 0.9), std::invalid_argument); // row sum
    CHECK_THROWS_AS(TabularMdp(1, 1, {1.0}, {0.0}, 1.0), std::invalid_argument); // gamma
    CHECK_THROWS_AS(TabularMdp(1, 1, {-1.0, 2.0}, {0.0}, 0.9), std::invalid_argument);
    CHECK_THROWS_AS(Policy(1, 2, {0.7, 0.7}), std::invalid_argument);
    CHECK_THROWS_AS(policy_evaluation(two_state_self_loops(0, 1), Policy::uniform(2, 1), -1.0),
                    std::invalid_argument);
}

TEST_CASE("mdp fixture round-trip and parse diagnostics") {
    TabularMdp mdp = random_mdp(97, 4, 2, 0.25, 0.93);
    std::ostringstream os;
    save_mdp(mdp, os);
    std::istringstream is(os.str());
    TabularMdp back = load_mdp(is);
    CHECK(back.n_states() == 4);
    CHECK(back.n_actions() == 2);
    CHECK(back.gamma() == doctest::Approx(0.93).epsilon(1e-15));
    CHECK(back.transition_data() == mdp.transition_data());
    CHECK(back.reward_data() == mdp.reward_data());

    std::istringstream bad("mdp 1\nstates 2\nactions 1\ngamma 0.9\ntransition\n1 0\n");
    CHECK_THROWS_AS(load_mdp(bad), parse_error);
    std::istringstream bad2("not-a-fixture");
    CHECK_THROWS_AS(load_mdp(bad2), parse_error);
}

TEST_CASE("sparse chain: structure and rewards") {
    TabularMdp chain = sparse_chain_mdp(5, 2.5);
    CHECK(chain.n_states() == 5);
    CHECK(chain.n_actions() == 2);
    CHECK(chain.p(0, 0, 0) == 1.0); // left end stays put
    CHECK(chain.p(2, 1, 3) == 1.0);
    CHECK(chain.p(4, 0, 4) == 1.0); // absorbing terminal
    CHECK(chain.reward(4, 0) == 2.5);
    CHECK(chain.reward(3, 1) == 0.0);

    TabularMdp free_chain = sparse_chain_mdp(5, 0.0);
    for (double r : free_chain.reward_data()) CHECK(r == 0.0);
}
