#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "bisim/errors.hpp"
#include "bisim/rng.hpp"

namespace bisim {

/// Finite MDP with dense transition tensor P(s'|s,a), reward table r(s,a) and
/// discount gamma in [0,1). Immutable after construction; all operations on it
/// are pure functions.
class TabularMdp {
public:
    TabularMdp(int n_states, int n_actions, std::vector<double> transition,
               std::vector<double> reward, double gamma)
        : n_states_(n_states), n_actions_(n_actions), transition_(std::move(transition)),
          reward_(std::move(reward)), gamma_(gamma) {
        validate();
    }

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    double gamma() const { return gamma_; }

    /// P(s'|s,a)
    double p(int s, int a, int s_next) const {
        return transition_[(static_cast<std::size_t>(s) * n_actions_ + a) * n_states_ + s_next];
    }

    /// Row P(.|s,a) as a pointer into the dense tensor.
    const double* transition_row(int s, int a) const {
        return transition_.data() + (static_cast<std::size_t>(s) * n_actions_ + a) * n_states_;
    }

    double reward(int s, int a) const {
        return reward_[static_cast<std::size_t>(s) * n_actions_ + a];
    }

    const std::vector<double>& transition_data() const { return transition_; }
    const std::vector<double>& reward_data() const { return reward_; }

    /// Copy with one reward cell replaced; used by perturbation tests.
    TabularMdp with_reward(int s, int a, double value) const {
        std::vector<double> r = reward_;
        r[static_cast<std::size_t>(s) * n_actions_ + a] = value;
        return TabularMdp(n_states_, n_actions_, transition_, std::move(r), gamma_);
    }

private:
    void validate() const {
        if (n_states_ < 1 || n_actions_ < 1)
            throw std::invalid_argument("TabularMdp: n_states and n_actions must be >= 1");
        if (!(gamma_ >= 0.0 && gamma_ < 1.0))
            throw std::invalid_argument("TabularMdp: gamma must lie in [0, 1)");
        const std::size_t n = static_cast<std::size_t>(n_states_);
        const std::size_t m = static_cast<std::size_t>(n_actions_);
        if (transition_.size() != n * m * n)
            throw std::invalid_argument("TabularMdp: transition tensor has wrong size");
        if (reward_.size() != n * m)
            throw std::invalid_argument("TabularMdp: reward table has wrong size");
        for (double r : reward_)
            if (!std::isfinite(r)) throw std::invalid_argument("TabularMdp: non-finite reward");
        for (int s = 0; s < n_states_; ++s) {
            for (int a = 0; a < n_actions_; ++a) {
                const double* row = transition_row(s, a);
                double sum = 0.0;
                for (int t = 0; t < n_states_; ++t) {
                    if (row[t] < 0.0)
                        throw std::invalid_argument("TabularMdp: negative transition probability");
                    sum += row[t];
                }
                if (std::abs(sum - 1.0) > 1e-12)
                    throw std::invalid_argument("TabularMdp: transition row (" + std::to_string(s) +
                                                "," + std::to_string(a) + ") sums to " +
                                                std::to_string(sum));
            }
        }
    }

    int n_states_;
    int n_actions_;
    std::vector<double> transition_;
    std::vector<double> reward_;
    double gamma_;
};

/// Stochastic policy pi(a|s) as a dense row-per-state table.
class Policy {
public:
    Policy(int n_states, int n_actions, std::vector<double> probs)
        : n_states_(n_states), n_actions_(n_actions), probs_(std::move(probs)) {
        if (probs_.size() != static_cast<std::size_t>(n_states_) * n_actions_)
            throw std::invalid_argument("Policy: probability table has wrong size");
        for (int s = 0; s < n_states_; ++s) {
            double sum = 0.0;
            for (int a = 0; a < n_actions_; ++a) {
                const double p = prob(s, a);
                if (p < 0.0) throw std::invalid_argument("Policy: negative probability");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw std::invalid_argument("Policy: row " + std::to_string(s) +
                                            " does not sum to 1");
        }
    }

    static Policy uniform(int n_states, int n_actions) {
        std::vector<double> p(static_cast<std::size_t>(n_states) * n_actions,
                              1.0 / static_cast<double>(n_actions));
        return Policy(n_states, n_actions, std::move(p));
    }

    /// Deterministic policy from a per-state action choice.
    static Policy deterministic(int n_states, int n_actions, const std::vector<int>& actions) {
        if (static_cast<int>(actions.size()) != n_states)
            throw std::invalid_argument("Policy: one action per state required");
        std::vector<double> p(static_cast<std::size_t>(n_states) * n_actions, 0.0);
        for (int s = 0; s < n_states; ++s) {
            if (actions[s] < 0 || actions[s] >= n_actions)
                throw std::invalid_argument("Policy: action index out of range");
            p[static_cast<std::size_t>(s) * n_actions + actions[s]] = 1.0;
        }
        return Policy(n_states, n_actions, std::move(p));
    }

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    double prob(int s, int a) const {
        return probs_[static_cast<std::size_t>(s) * n_actions_ + a];
    }

private:
    int n_states_;
    int n_actions_;
    std::vector<double> probs_;
};

/// State values V(s) or action values Q(s,a), tagged by kind.
struct ValueTable {
    enum class Kind { state, action };

    Kind kind = Kind::state;
    int n_states = 0;
    int n_actions = 0; // 0 for state values
    std::vector<double> values;

    static ValueTable state_values(std::vector<double> v) {
        ValueTable t;
        t.kind = Kind::state;
        t.n_states = static_cast<int>(v.size());
        t.values = std::move(v);
        return t;
    }

    static ValueTable action_values(int n_states, int n_actions, std::vector<double> q) {
        ValueTable t;
        t.kind = Kind::action;
        t.n_states = n_states;
        t.n_actions = n_actions;
        t.values = std::move(q);
        return t;
    }

    double v(int s) const { return values[s]; }
    double q(int s, int a) const {
        return values[static_cast<std::size_t>(s) * n_actions + a];
    }
};

namespace detail {
inline void check_compatible(const TabularMdp& mdp, const Policy& pi) {
    if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions())
        throw std::invalid_argument("policy dimensions do not match the MDP");
}
} // namespace detail

/// Policy-averaged reward r^pi(s) = sum_a pi(a|s) r(s,a).
inline std::vector<double> policy_reward(const TabularMdp& mdp, const Policy& pi) {
    detail::check_compatible(mdp, pi);
    std::vector<double> out(mdp.n_states(), 0.0);
    for (int s = 0; s < mdp.n_states(); ++s) {
        double acc = 0.0;
        for (int a = 0; a < mdp.n_actions(); ++a) acc += pi.prob(s, a) * mdp.reward(s, a);
        out[s] = acc;
    }
    return out;
}

/// Policy-marginal transition P^pi(s'|s) = sum_a pi(a|s) P(s'|s,a), returned as
/// a dense row-major n_states x n_states matrix.
inline std::vector<double> policy_transition(const TabularMdp& mdp, const Policy& pi) {
    detail::check_compatible(mdp, pi);
    const int n = mdp.n_states();
    std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
    for (int s = 0; s < n; ++s) {
        double* row = out.data() + static_cast<std::size_t>(s) * n;
        for (int a = 0; a < mdp.n_actions(); ++a) {
            const double w = pi.prob(s, a);
            if (w == 0.0) continue;
            const double* tr = mdp.transition_row(s, a);
            for (int t = 0; t < n; ++t) row[t] += w * tr[t];
        }
    }
    return out;
}

/// Iterative policy evaluation: returns V with Bellman residual
/// ||V - (r^pi + gamma P^pi V)||_inf <= tol.
inline ValueTable policy_evaluation(const TabularMdp& mdp, const Policy& pi, double tol = 1e-10,
                                    int max_iters = 100000) {
    if (!(tol > 0.0)) throw std::invalid_argument("policy_evaluation: tol must be positive");
    const int n = mdp.n_states();
    const std::vector<double> r = policy_reward(mdp, pi);
    const std::vector<double> p = policy_transition(mdp, pi);
    std::vector<double> v(n, 0.0), next(n, 0.0);
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iters; ++it) {
        residual = 0.0;
        for (int s = 0; s < n; ++s) {
            const double* row = p.data() + static_cast<std::size_t>(s) * n;
            double acc = 0.0;
            for (int t = 0; t < n; ++t) acc += row[t] * v[t];
            next[s] = r[s] + mdp.gamma() * acc;
            residual = std::max(residual, std::abs(next[s] - v[s]));
        }
        v.swap(next);
        if (residual <= tol) return ValueTable::state_values(std::move(v));
    }
    throw solver_error("policy_evaluation: no convergence after " + std::to_string(max_iters) +
                       " iterations, residual " + std::to_string(residual));
}

/// Exact policy evaluation by solving (I - gamma P^pi) V = r^pi with Gaussian
/// elimination (partial pivoting). Independent of the iterative path; used as
/// a test oracle.
inline ValueTable policy_evaluation_direct(const TabularMdp& mdp, const Policy& pi) {
    const int n = mdp.n_states();
    const std::vector<double> r = policy_reward(mdp, pi);
    const std::vector<double> p = policy_transition(mdp, pi);
    std::vector<double> aug(static_cast<std::size_t>(n) * (n + 1));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
            aug[static_cast<std::size_t>(i) * (n + 1) + j] =
                (i == j ? 1.0 : 0.0) - mdp.gamma() * p[static_cast<std::size_t>(i) * n + j];
        aug[static_cast<std::size_t>(i) * (n + 1) + n] = r[i];
    }
    auto at = [&](int i, int j) -> double& {
        return aug[static_cast<std::size_t>(i) * (n + 1) + j];
    };
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int i = col + 1; i < n; ++i)
            if (std::abs(at(i, col)) > std::abs(at(pivot, col))) pivot = i;
        if (std::abs(at(pivot, col)) < 1e-300)
            throw solver_error("policy_evaluation_direct: singular system");
        if (pivot != col)
            for (int j = col; j <= n; ++j) std::swap(at(pivot, j), at(col, j));
        for (int i = col + 1; i < n; ++i) {
            const double f = at(i, col) / at(col, col);
            if (f == 0.0) continue;
            for (int j = col; j <= n; ++j) at(i, j) -= f * at(col, j);
        }
    }
    std::vector<double> v(n, 0.0);
    for (int i = n - 1; i >= 0; --i) {
        double acc = at(i, n);
        for (int j = i + 1; j < n; ++j) acc -= at(i, j) * v[j];
        v[i] = acc / at(i, i);
    }
    return ValueTable::state_values(std::move(v));
}

/// Value iteration on Q(s,a); stops when the sup-norm Bellman optimality
/// residual drops below tol.
inline ValueTable value_iteration(const TabularMdp& mdp, double tol = 1e-10,
                                  int max_iters = 100000) {
    if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
    const int n = mdp.n_states();
    const int m = mdp.n_actions();
    std::vector<double> q(static_cast<std::size_t>(n) * m, 0.0);
    std::vector<double> next(q.size(), 0.0);
    std::vector<double> vmax(n, 0.0);
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iters; ++it) {
        for (int s = 0; s < n; ++s) {
            double best = q[static_cast<std::size_t>(s) * m];
            for (int a = 1; a < m; ++a)
                best = std::max(best, q[static_cast<std::size_t>(s) * m + a]);
            vmax[s] = best;
        }
        residual = 0.0;
        for (int s = 0; s < n; ++s) {
            for (int a = 0; a < m; ++a) {
                const double* row = mdp.transition_row(s, a);
                double acc = 0.0;
                for (int t = 0; t < n; ++t) acc += row[t] * vmax[t];
                const std::size_t idx = static_cast<std::size_t>(s) * m + a;
                next[idx] = mdp.reward(s, a) + mdp.gamma() * acc;
                residual = std::max(residual, std::abs(next[idx] - q[idx]));
            }
        }
        q.swap(next);
        if (residual <= tol) return ValueTable::action_values(n, m, std::move(q));
    }
    throw solver_error("value_iteration: no convergence after " + std::to_string(max_iters) +
                       " iterations, residual " + std::to_string(residual));
}

/// Greedy policy from action values; ties resolved to the lowest action index.
inline Policy greedy_policy(const ValueTable& q) {
    if (q.kind != ValueTable::Kind::action)
        throw std::invalid_argument("greedy_policy: action values required");
    std::vector<int> actions(q.n_states, 0);
    for (int s = 0; s < q.n_states; ++s) {
        int best = 0;
        for (int a = 1; a < q.n_actions; ++a)
            if (q.q(s, a) > q.q(s, best)) best = a;
        actions[s] = best;
    }
    return Policy::deterministic(q.n_states, q.n_actions, actions);
}

/// Seeded random MDP instance. Transition rows are normalized positive draws;
/// rewards are uniform in [0,1] except for ceil(S*A*reward_sparsity) cells
/// forced to zero. The same seed reproduces the instance bit for bit.
inline TabularMdp random_mdp(std::uint64_t seed, int n_states, int n_actions,
                             double reward_sparsity = 0.0, double gamma = 0.9) {
    if (n_states < 1 || n_actions < 1)
        throw std::invalid_argument("random_mdp: n_states and n_actions must be >= 1");
    if (!(reward_sparsity >= 0.0 && reward_sparsity <= 1.0))
        throw std::invalid_argument("random_mdp: reward_sparsity must lie in [0,1]");
    Rng rng(splitmix64(seed));
    const std::size_t n = static_cast<std::size_t>(n_states);
    const std::size_t m = static_cast<std::size_t>(n_actions);
    std::vector<double> tr(n * m * n);
    for (std::size_t sa = 0; sa < n * m; ++sa) {
        double sum = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double w = 0.05 + rng.uniform(); // bounded away from zero
            tr[sa * n + t] = w;
            sum += w;
        }
        for (std::size_t t = 0; t < n; ++t) tr[sa * n + t] /= sum;
    }
    std::vector<double> rew(n * m);
    for (double& r : rew) r = rng.uniform();
    const std::size_t n_zero =
        static_cast<std::size_t>(std::ceil(static_cast<double>(n * m) * reward_sparsity));
    std::vector<std::size_t> cells(n * m);
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = i;
    for (std::size_t i = cells.size(); i > 1; --i)
        std::swap(cells[i - 1], cells[rng.uniform_int(i)]);
    for (std::size_t i = 0; i < std::min(n_zero, cells.size()); ++i) rew[cells[i]] = 0.0;
    return TabularMdp(n_states, n_actions, std::move(tr), std::move(rew), gamma);
}

/// Seeded random stochastic policy (normalized positive rows).
inline Policy random_policy(std::uint64_t seed, int n_states, int n_actions) {
    Rng rng(splitmix64(seed ^ 0xabcdef1234567890ULL));
    std::vector<double> p(static_cast<std::size_t>(n_states) * n_actions);
    for (int s = 0; s < n_states; ++s) {
        double sum = 0.0;
        for (int a = 0; a < n_actions; ++a) {
            const double w = 0.05 + rng.uniform();
            p[static_cast<std::size_t>(s) * n_actions + a] = w;
            sum += w;
        }
        for (int a = 0; a < n_actions; ++a) p[static_cast<std::size_t>(s) * n_actions + a] /= sum;
    }
    return Policy(n_states, n_actions, std::move(p));
}

// ------------------------------------------------------------------
// Fixture serialization: plain structured text (states, actions, gamma,
// row-major transition and reward tables), reusable across CLI subcommands.
// ------------------------------------------------------------------

inline void save_mdp(const TabularMdp& mdp, std::ostream& os) {
    os.precision(17);
    os << "mdp 1\n";
    os << "states " << mdp.n_states() << "\n";
    os << "actions " << mdp.n_actions() << "\n";
    os << "gamma " << mdp.gamma() << "\n";
    os << "transition\n";
    for (int s = 0; s < mdp.n_states(); ++s) {
        for (int a = 0; a < mdp.n_actions(); ++a) {
            const double* row = mdp.transition_row(s, a);
            for (int t = 0; t < mdp.n_states(); ++t) os << (t ? " " : "") << row[t];
            os << "\n";
        }
    }
    os << "reward\n";
    for (int s = 0; s < mdp.n_states(); ++s) {
        for (int a = 0; a < mdp.n_actions(); ++a) os << (a ? " " : "") << mdp.reward(s, a);
        os << "\n";
    }
}

inline TabularMdp load_mdp(std::istream& is) {
    auto fail = [](const std::string& msg) { throw parse_error("mdp fixture: " + msg); };
    std::string tok;
    int version = 0;
    if (!(is >> tok) || tok != "mdp" || !(is >> version) || version != 1)
        fail("expected header 'mdp 1'");
    int n_states = 0, n_actions = 0;
    double gamma = 0.0;
    if (!(is >> tok) || tok != "states" || !(is >> n_states)) fail("expected 'states <n>'");
    if (!(is >> tok) || tok != "actions" || !(is >> n_actions)) fail("expected 'actions <n>'");
    if (!(is >> tok) || tok != "gamma" || !(is >> gamma)) fail("expected 'gamma <g>'");
    if (n_states < 1 || n_actions < 1) fail("invalid dimensions");
    if (!(is >> tok) || tok != "transition") fail("expected 'transition'");
    const std::size_t n = static_cast<std::size_t>(n_states);
    const std::size_t m = static_cast<std::size_t>(n_actions);
    std::vector<double> tr(n * m * n);
    for (std::size_t i = 0; i < tr.size(); ++i)
        if (!(is >> tr[i])) fail("truncated transition table at entry " + std::to_string(i));
    if (!(is >> tok) || tok != "reward") fail("expected 'reward'");
    std::vector<double> rew(n * m);
    for (std::size_t i = 0; i < rew.size(); ++i)
        if (!(is >> rew[i])) fail("truncated reward table at entry " + std::to_string(i));
    try {
        return TabularMdp(n_states, n_actions, std::move(tr), std::move(rew), gamma);
    } catch (const std::invalid_argument& e) {
        throw parse_error(std::string("mdp fixture: ") + e.what());
    }
}

} // namespace bisim
