#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "bisim/embedding.hpp"
#include "bisim/intrinsic.hpp"
#include "bisim/maze.hpp"
#include "bisim/mdp.hpp"
#include "bisim/metric_ops.hpp"
#include "bisim/reward_model.hpp"
#include "bisim/rng.hpp"
#include "bisim/stats.hpp"
#include "bisim/wasserstein.hpp"

namespace bisim {

struct CaseResult {
    std::string id;
    bool pass = false;
    double residual = 0.0;
    std::string note;
    std::string replay; // serialized fixture of a failing instance, if any
};

namespace detail {
inline std::string replay_fixture(const TabularMdp& mdp) {
    std::ostringstream os;
    save_mdp(mdp, os);
    return os.str();
}
} // namespace detail

struct SuiteReport {
    std::string suite;
    std::vector<CaseResult> cases;

    int passed() const {
        int n = 0;
        for (const CaseResult& c : cases) n += c.pass;
        return n;
    }
    bool all_pass() const { return passed() == static_cast<int>(cases.size()); }
    double max_residual() const {
        double m = 0.0;
        for (const CaseResult& c : cases) m = std::max(m, c.residual);
        return m;
    }
};

namespace oracle {

/// Exact transportation optimum by exhausting the vertices of the coupling
/// polytope: every basic feasible solution corresponds to a spanning tree of
/// the bipartite support graph, whose flows are uniquely determined by the
/// marginals. Independent of the simplex path; tractable for <=4-atom
/// supports.
inline double w1_enumerate(const std::vector<double>& a, const std::vector<double>& b,
                           const std::vector<double>& cost) {
    const int m = static_cast<int>(a.size());
    const int n = static_cast<int>(b.size());
    const int arcs = m * n;
    const int need = m + n - 1;
    std::vector<int> chosen(need);
    double best = std::numeric_limits<double>::infinity();

    std::vector<int> parent(m + n);
    std::vector<int> degree(m + n);
    std::vector<double> residual(m + n);
    std::vector<double> flow(arcs);

    auto find_root = [&](int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };

    auto evaluate = [&]() {
        // Tree check via union-find.
        std::iota(parent.begin(), parent.end(), 0);
        for (int k = 0; k < need; ++k) {
            const int i = chosen[k] / n;
            const int j = m + chosen[k] % n;
            const int ri = find_root(i), rj = find_root(j);
            if (ri == rj) return; // cycle
            parent[ri] = rj;
        }
        // Solve flows by repeated leaf elimination.
        std::fill(degree.begin(), degree.end(), 0);
        for (int k = 0; k < need; ++k) {
            ++degree[chosen[k] / n];
            ++degree[m + chosen[k] % n];
        }
        for (int i = 0; i < m; ++i) residual[i] = a[i];
        for (int j = 0; j < n; ++j) residual[m + j] = b[j];
        std::vector<char> used(need, 0);
        for (int round = 0; round < need; ++round) {
            int pick = -1;
            for (int k = 0; k < need; ++k) {
                if (used[k]) continue;
                const int i = chosen[k] / n;
                const int j = m + chosen[k] % n;
                if (degree[i] == 1 || degree[j] == 1) {
                    pick = k;
                    break;
                }
            }
            if (pick < 0) return; // should not happen for a tree
            const int i = chosen[pick] / n;
            const int j = m + chosen[pick] % n;
            const int leaf = degree[i] == 1 ? i : j;
            const int other = degree[i] == 1 ? j : i;
            const double f = residual[leaf];
            if (f < -1e-12) return; // infeasible vertex
            flow[chosen[pick]] = f;
            residual[leaf] = 0.0;
            residual[other] -= f;
            --degree[i];
            --degree[j];
            used[pick] = 1;
        }
        double total = 0.0;
        for (int k = 0; k < need; ++k) {
            if (flow[chosen[k]] < -1e-12) return;
            total += std::max(0.0, flow[chosen[k]]) * cost[chosen[k]];
        }
        best = std::min(best, total);
    };

    // Enumerate arc subsets of size m+n-1.
    std::vector<int> comb(need);
    auto rec = [&](auto&& self, int pos, int next) -> void {
        if (pos == need) {
            for (int k = 0; k < need; ++k) chosen[k] = comb[k];
            evaluate();
            return;
        }
        for (int arc = next; arc <= arcs - (need - pos); ++arc) {
            comb[pos] = arc;
            self(self, pos + 1, arc + 1);
        }
    };
    rec(rec, 0, 0);
    return best;
}

inline double w1_enumerate(const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                           const CostMatrix& cost) {
    std::vector<double> a, b;
    std::vector<int> sa, sb;
    for (std::size_t k = 0; k < mu.support.size(); ++k)
        if (mu.weights[k] > 0.0) {
            a.push_back(mu.weights[k]);
            sa.push_back(mu.support[k]);
        }
    for (std::size_t k = 0; k < nu.support.size(); ++k)
        if (nu.weights[k] > 0.0) {
            b.push_back(nu.weights[k]);
            sb.push_back(nu.support[k]);
        }
    std::vector<double> c(a.size() * b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            c[i * b.size() + j] = cost.at(sa[i], sb[j]);
    return w1_enumerate(a, b, c);
}

} // namespace oracle

namespace detail {

struct RandomInstance {
    TabularMdp mdp;
    Policy pi;
    double c_R;
    double c_T;
    double sigma;
};

inline RandomInstance random_instance(std::uint64_t seed, int max_states = 10,
                                      int max_actions = 3, double max_c_T = 0.95) {
    Rng rng(splitmix64(seed ^ 0x696e7374ULL));
    const int n = 2 + static_cast<int>(rng.uniform_int(max_states - 1));
    const int m = 1 + static_cast<int>(rng.uniform_int(max_actions));
    const double gamma = rng.uniform(0.3, 0.9);
    TabularMdp mdp = random_mdp(splitmix64(seed), n, m, rng.uniform() < 0.3 ? 0.5 : 0.0, gamma);
    Policy pi = random_policy(splitmix64(seed) + 1, n, m);
    return {std::move(mdp), std::move(pi), rng.uniform(0.5, 2.0), rng.uniform(0.1, max_c_T),
            rng.uniform(0.05, 0.8)};
}

inline GaussianRewardModel perturbed_sigma_model(const TabularMdp& mdp, std::uint64_t seed) {
    Rng rng(splitmix64(seed ^ 0x7369676dULL));
    GaussianRewardModel model = exact_reward_model(mdp, 0.5);
    for (int s = 0; s < mdp.n_states(); ++s)
        for (int a = 0; a < mdp.n_actions(); ++a)
            model.set_cell(s, a, mdp.reward(s, a), rng.uniform(0.01, 1.0), 1);
    return model;
}

inline DiscreteDistribution random_distribution(Rng& rng, int ground_size, int max_atoms) {
    const int atoms = 1 + static_cast<int>(rng.uniform_int(std::min(max_atoms, ground_size)));
    std::vector<int> idx(ground_size);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
    DiscreteDistribution d;
    double sum = 0.0;
    for (int k = 0; k < atoms; ++k) {
        d.support.push_back(idx[k]);
        const double w = 0.05 + rng.uniform();
        d.weights.push_back(w);
        sum += w;
    }
    for (double& w : d.weights) w /= sum;
    return d;
}

/// Euclidean cost over seeded 2-D ground points: a genuine metric.
inline CostMatrix random_metric_cost(Rng& rng, int ground_size) {
    std::vector<std::pair<double, double>> pts(ground_size);
    for (auto& p : pts) p = {rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0)};
    std::vector<double> c(static_cast<std::size_t>(ground_size) * ground_size);
    for (int i = 0; i < ground_size; ++i)
        for (int j = 0; j < ground_size; ++j)
            c[static_cast<std::size_t>(i) * ground_size + j] =
                std::hypot(pts[i].first - pts[j].first, pts[i].second - pts[j].second);
    return CostMatrix(ground_size, ground_size, std::move(c));
}

} // namespace detail

/// Both operators contract sup-norm distances between metrics by at least
/// c_T on every seeded instance and metric pair.
inline SuiteReport contraction_suite(int n_instances = 50, int pairs_per_instance = 50,
                                     std::uint64_t master_seed = 1) {
    SuiteReport report{"contraction", {}};
    for (int k = 0; k < n_instances; ++k) {
        const std::uint64_t seed = derive_seed(master_seed, k);
        const detail::RandomInstance inst = detail::random_instance(seed);
        const GaussianRewardModel model = exact_reward_model(inst.mdp, inst.sigma);
        const EmpiricalTransitionModel trans = EmpiricalTransitionModel::exact(inst.mdp);
        OperatorConfig classic{inst.c_R, inst.c_T, OperatorMode::classic};
        OperatorConfig predictive{inst.c_R, inst.c_T, OperatorMode::predictive};
        double worst = -1e300;
        bool pass = true;
        for (int p = 0; p < pairs_per_instance; ++p) {
            const MetricMatrix d = MetricMatrix::random(inst.mdp.n_states(), seed + 101 * p + 1);
            const MetricMatrix d2 = MetricMatrix::random(inst.mdp.n_states(), seed + 101 * p + 2);
            const double dist = d.sup_distance(d2);
            const double lhs_c = apply_classic_operator(inst.mdp, inst.pi, d, classic)
                                     .sup_distance(apply_classic_operator(inst.mdp, inst.pi, d2,
                                                                          classic));
            const double lhs_p =
                apply_predictive_operator(inst.mdp, inst.pi, model, trans, d, predictive)
                    .sup_distance(apply_predictive_operator(inst.mdp, inst.pi, model, trans, d2,
                                                            predictive));
            const double gap = std::max(lhs_c, lhs_p) - inst.c_T * dist;
            worst = std::max(worst, gap);
            if (gap > 1e-12) pass = false;
        }
        CaseResult result{"instance_" + std::to_string(k), pass, std::max(0.0, worst),
                          pass ? "" : "contraction violated", ""};
        if (!pass) result.replay = detail::replay_fixture(inst.mdp);
        report.cases.push_back(std::move(result));
    }
    return report;
}

/// Fixed points are initialization-independent (within 2 tol) and the classic
/// metric obeys the reward-differential diameter bound; per-iteration
/// residuals contract and the a-priori iteration bound holds.
inline SuiteReport fixed_point_suite(int n_instances = 50, std::uint64_t master_seed = 2,
                                     double tol = 1e-10) {
    SuiteReport report{"diameter", {}};
    for (int k = 0; k < n_instances; ++k) {
        const std::uint64_t seed = derive_seed(master_seed + 7, k);
        const detail::RandomInstance inst = detail::random_instance(seed, 10, 3, 0.9);
        OperatorConfig cfg{inst.c_R, inst.c_T, OperatorMode::classic};
        MetricOperator op = [&](const MetricMatrix& d) {
            return apply_classic_operator(inst.mdp, inst.pi, d, cfg);
        };
        const int n = inst.mdp.n_states();
        const FixedPointResult from_zero = fixed_point(op, MetricMatrix::zeros(n), inst.c_T, tol);
        const FixedPointResult from_const =
            fixed_point(op, MetricMatrix::constant(n, 5.0), inst.c_T, tol);

        std::string note;
        double residual = from_zero.metric.sup_distance(from_const.metric);
        bool pass = residual <= 2.0 * tol;
        if (!pass) note = "initializations disagree";

        const std::vector<double> r_pi = policy_reward(inst.mdp, inst.pi);
        double max_dr = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) max_dr = std::max(max_dr, std::abs(r_pi[i] - r_pi[j]));
        const double bound = inst.c_R / (1.0 - inst.c_T) * max_dr;
        const double diam = diameter(from_zero.metric);
        if (diam > bound + 1e-9) {
            pass = false;
            note = "diameter bound violated";
            residual = std::max(residual, diam - bound);
        }

        for (std::size_t i = 1; i < from_zero.residual_history.size(); ++i) {
            if (from_zero.residual_history[i] >
                inst.c_T * from_zero.residual_history[i - 1] + 1e-12) {
                pass = false;
                note = "residuals not contracting";
            }
        }
        if (!from_zero.residual_history.empty()) {
            const int bound_iters =
                fixed_point_iteration_bound(from_zero.residual_history[0], inst.c_T, tol);
            if (from_zero.iterations > bound_iters + 1) {
                pass = false;
                note = "iteration bound exceeded";
            }
        }
        CaseResult result{"instance_" + std::to_string(k), pass, residual, note, ""};
        if (!pass) result.replay = detail::replay_fixture(inst.mdp);
        report.cases.push_back(std::move(result));
    }
    return report;
}

/// Reward-free chain: the classic metric collapses to zero diameter while the
/// predictive one keeps a strictly positive expected pairwise distance below
/// c_R/(1-c_T) * 2 sqrt(Sigma/pi); the bound value is cross-checked by Monte
/// Carlo.
inline SuiteReport degeneracy_suite(std::uint64_t master_seed = 3, long mc_samples = 10000000) {
    SuiteReport report{"degeneracy", {}};
    const TabularMdp chain = sparse_chain_mdp(5, 0.0);
    const Policy pi = Policy::uniform(5, 2);
    const double c_R = 1.0, c_T = 0.5;

    {
        OperatorConfig cfg{c_R, c_T, OperatorMode::classic};
        MetricOperator op = [&](const MetricMatrix& d) {
            return apply_classic_operator(chain, pi, d, cfg);
        };
        const FixedPointResult fp = fixed_point(op, MetricMatrix::zeros(5), c_T, 1e-12);
        const double diam = diameter(fp.metric);
        report.cases.push_back(
            {"classic_collapse", diam <= 1e-9, diam, diam <= 1e-9 ? "" : "no collapse", ""});
    }

    const double sigma = 0.5; // Sigma = 0.25
    const double delta_mean = folded_normal_mean(0.0, 2.0 * sigma * sigma);
    const double bound = c_R / (1.0 - c_T) * delta_mean;
    {
        GaussianRewardModel model = exact_reward_model(chain, sigma);
        const EmpiricalTransitionModel trans = EmpiricalTransitionModel::exact(chain);
        OperatorConfig cfg{c_R, c_T, OperatorMode::predictive};
        MetricOperator op = [&](const MetricMatrix& d) {
            return apply_predictive_operator(chain, pi, model, trans, d, cfg);
        };
        const FixedPointResult fp = fixed_point(op, MetricMatrix::zeros(5), c_T, 1e-12);
        const double expected_diam = mean_pairwise_distance(fp.metric);
        const bool pass = expected_diam > 0.01 && expected_diam <= bound + 1e-6;
        report.cases.push_back({"predictive_nondegenerate", pass, expected_diam,
                                "bound " + std::to_string(bound), ""});
    }
    {
        const double mc = folded_normal_mean_mc(0.0, 2.0 * sigma * sigma, mc_samples,
                                                derive_seed(master_seed, 99));
        const double rel = std::abs(mc - delta_mean) / delta_mean;
        report.cases.push_back({"mc_crosscheck", rel <= 1e-3, rel,
                                "closed " + std::to_string(delta_mean) + " mc " +
                                    std::to_string(mc), ""});
    }
    {
        // Variance floor 0.1: diameter stays above 0.05.
        GaussianRewardModel model = exact_reward_model(chain, 0.1);
        const EmpiricalTransitionModel trans = EmpiricalTransitionModel::exact(chain);
        OperatorConfig cfg{c_R, c_T, OperatorMode::predictive};
        MetricOperator op = [&](const MetricMatrix& d) {
            return apply_predictive_operator(chain, pi, model, trans, d, cfg);
        };
        const FixedPointResult fp = fixed_point(op, MetricMatrix::zeros(5), c_T, 1e-12);
        const double diam = diameter(fp.metric);
        report.cases.push_back({"sigma_floor_0.1", diam > 0.05, diam, "", ""});
    }
    return report;
}

/// |V^pi(i) - V^pi(j)| <= d_pre(i,j) with c_R = 1, c_T = gamma and a
/// mean-unbiased predictive model, on every state pair of every instance.
inline SuiteReport value_bound_suite(int n_instances = 100, std::uint64_t master_seed = 4) {
    SuiteReport report{"value_bound", {}};
    for (int k = 0; k < n_instances; ++k) {
        const std::uint64_t seed = derive_seed(master_seed + 13, k);
        const detail::RandomInstance inst = detail::random_instance(seed, 8, 3);
        const TabularMdp& mdp = inst.mdp;
        const GaussianRewardModel model = detail::perturbed_sigma_model(mdp, seed);
        const EmpiricalTransitionModel trans = EmpiricalTransitionModel::exact(mdp);
        OperatorConfig cfg{1.0, mdp.gamma(), OperatorMode::predictive};
        MetricOperator op = [&](const MetricMatrix& d) {
            return apply_predictive_operator(mdp, inst.pi, model, trans, d, cfg);
        };
        const FixedPointResult fp =
            fixed_point(op, MetricMatrix::zeros(mdp.n_states()), mdp.gamma(), 1e-12);
        const ValueTable v = policy_evaluation(mdp, inst.pi, 1e-13);
        double worst = 0.0;
        for (int i = 0; i < mdp.n_states(); ++i)
            for (int j = i + 1; j < mdp.n_states(); ++j)
                worst = std::max(worst,
                                 std::abs(v.v(i) - v.v(j)) - fp.metric.at(i, j));
        CaseResult result{"instance_" + std::to_string(k), worst <= 1e-9, std::max(0.0, worst),
                          "", ""};
        if (!result.pass) result.replay = detail::replay_fixture(mdp);
        report.cases.push_back(std::move(result));
    }
    return report;
}

/// Potential-based shaping preserves optimal action values up to the
/// state-dependent shift, and greedy argmaxes agree, over seeded
/// (MDP, phi, eta) triples. Every fourth phi comes from the fitted-model
/// state-only potential; the rest are seeded tables.
inline SuiteReport invariance_suite(int n_instances = 100, std::uint64_t master_seed = 5,
                                    double residual_tol = 1e-6) {
    SuiteReport report{"invariance", {}};
    for (int k = 0; k < n_instances; ++k) {
        const std::uint64_t seed = derive_seed(master_seed + 17, k);
        Rng rng(splitmix64(seed));
        const detail::RandomInstance inst = detail::random_instance(seed, 6, 3);
        const TabularMdp& mdp = inst.mdp;
        const double eta_choices[3] = {0.5, 1.0, 2.0};
        const double eta = eta_choices[rng.uniform_int(3)];

        std::vector<double> phi(mdp.n_states());
        if (k % 4 == 3) {
            const std::vector<TransitionRecord> replay =
                simulate_replay(mdp, inst.pi, 600, seed);
            const GaussianRewardModel model =
                fit_reward_model(mdp.n_states(), mdp.n_actions(),
                                 reward_samples_from_replay(replay, 3, mdp.gamma()));
            const EmpiricalTransitionModel trans =
                EmpiricalTransitionModel::fit(mdp.n_states(), mdp.n_actions(), replay);
            FeatureMap features(mdp.n_states());
            for (auto& f : features) f = {rng.uniform(), rng.uniform()};
            const TabularPotentialModel pmodel{model, trans, features};
            std::vector<TransitionRecord> batch(replay.begin(),
                                                replay.begin() + std::min<std::size_t>(
                                                                     64, replay.size()));
            const Anchor anchor = compute_anchor(batch, pmodel);
            ShapingConfig scfg;
            scfg.eta = eta;
            scfg.gamma = mdp.gamma();
            scfg.c_R = 1.0;
            scfg.c_T = mdp.gamma();
            for (int s = 0; s < mdp.n_states(); ++s)
                phi[s] = state_only_potential(pmodel, s, inst.pi, anchor, scfg);
        } else {
            for (double& p : phi) p = rng.uniform();
        }

        const InvarianceReport rep = verify_policy_invariance(mdp, phi, eta, residual_tol / 4.0);
        const bool pass = rep.max_residual <= residual_tol && rep.argmax_match;
        CaseResult result{"instance_" + std::to_string(k), pass, rep.max_residual,
                          rep.argmax_match ? "" : "argmax mismatch at state " +
                                                      std::to_string(rep.first_mismatch_state),
                          ""};
        if (!pass) result.replay = detail::replay_fixture(mdp);
        report.cases.push_back(std::move(result));
    }
    return report;
}

/// Embedding regression: analytic gradients match central finite differences
/// and the two-state fixture converges to the target latent separation.
inline SuiteReport gradient_suite(std::uint64_t master_seed = 6) {
    SuiteReport report{"gradients", {}};
    for (int k = 0; k < 5; ++k) {
        const std::uint64_t seed = derive_seed(master_seed + 23, k);
        const MetricMatrix target = MetricMatrix::random(4, seed, 2.0);
        Rng rng(splitmix64(seed + 5));
        EmbeddingTable emb;
        emb.n_states = 4;
        emb.k = 2;
        emb.z.resize(8);
        for (double& z : emb.z) z = rng.uniform(-1.0, 1.0);
        const auto pairs = all_state_pairs(4);
        const std::vector<double> grad = embedding_gradient(emb, target, pairs);
        const double h = 1e-5;
        double max_fd = 0.0, max_err = 0.0;
        for (std::size_t t = 0; t < emb.z.size(); ++t) {
            EmbeddingTable plus = emb, minus = emb;
            plus.z[t] += h;
            minus.z[t] -= h;
            const double fd =
                (embedding_loss(plus, target, pairs) - embedding_loss(minus, target, pairs)) /
                (2.0 * h);
            max_fd = std::max(max_fd, std::abs(fd));
            max_err = std::max(max_err, std::abs(fd - grad[t]));
        }
        const double rel = max_err / std::max(max_fd, 1e-12);
        report.cases.push_back(
            {"finite_difference_" + std::to_string(k), rel <= 1e-4, rel, "", ""});
    }
    {
        MetricMatrix target(2);
        target.set(0, 1, 2.0);
        const EmbeddingFitResult fit = fit_embedding(target, 1, 3000, 0.05, master_seed + 31);
        const double sep = fit.embedding.pair_distance(0, 1);
        const double err = std::abs(sep - 2.0);
        report.cases.push_back({"two_state_convergence", err <= 1e-3, err,
                                "separation " + std::to_string(sep), ""});
        bool monotone = true;
        for (std::size_t i = 1; i < fit.loss_checkpoints.size(); ++i)
            if (fit.loss_checkpoints[i] > fit.loss_checkpoints[i - 1] * 1.05 + 1e-12)
                monotone = false;
        report.cases.push_back({"loss_monotone", monotone, 0.0, "", ""});
    }
    return report;
}

/// The transportation solver matches exhaustive vertex enumeration on small
/// supports and satisfies the metric axioms under metric ground costs; duals
/// certify every solve.
inline SuiteReport transport_suite(int n_cases = 200, std::uint64_t master_seed = 7) {
    SuiteReport report{"transport", {}};
    Rng rng(splitmix64(master_seed + 41));
    for (int k = 0; k < n_cases; ++k) {
        const int ground = 2 + static_cast<int>(rng.uniform_int(5)); // 2..6 points
        const bool metric_cost = k % 2 == 0;
        CostMatrix cost = metric_cost ? detail::random_metric_cost(rng, ground) : [&] {
            std::vector<double> c(static_cast<std::size_t>(ground) * ground);
            for (double& x : c) x = rng.uniform(0.0, 4.0);
            for (int i = 0; i < ground; ++i) c[static_cast<std::size_t>(i) * ground + i] = 0.0;
            return CostMatrix(ground, ground, std::move(c));
        }();
        const DiscreteDistribution mu = detail::random_distribution(rng, ground, 4);
        const DiscreteDistribution nu = detail::random_distribution(rng, ground, 4);

        const W1Result sol = w1_discrete_full(mu, nu, [&](int i, int j) { return cost.at(i, j); });
        const double exact = oracle::w1_enumerate(mu, nu, cost);
        double residual = std::abs(sol.value - exact);
        bool pass = residual <= 1e-9;
        std::string note = pass ? "" : "enumeration mismatch";

        // Dual certificate.
        std::vector<double> a, b;
        for (std::size_t t = 0; t < mu.support.size(); ++t)
            if (mu.weights[t] > 0.0) a.push_back(mu.weights[t]);
        for (std::size_t t = 0; t < nu.support.size(); ++t)
            if (nu.weights[t] > 0.0) b.push_back(nu.weights[t]);
        const double gap = std::abs(sol.value - sol.dual_objective(a, b));
        if (gap > 1e-9) {
            pass = false;
            note = "dual gap";
            residual = std::max(residual, gap);
        }

        // Symmetry under the transposed cost.
        const double sym = w1_discrete(nu, mu, [&](int i, int j) { return cost.at(j, i); });
        if (std::abs(sym - sol.value) > 1e-10) {
            pass = false;
            note = "asymmetric";
        }

        if (metric_cost) {
            const double self = w1_discrete(mu, mu, [&](int i, int j) { return cost.at(i, j); });
            if (self > 1e-10) {
                pass = false;
                note = "identity violated";
            }
            const DiscreteDistribution rho = detail::random_distribution(rng, ground, 4);
            const double ab = oracle::w1_enumerate(mu, nu, cost);
            const double bc = oracle::w1_enumerate(nu, rho, cost);
            const double ac = oracle::w1_enumerate(mu, rho, cost);
            if (ac > ab + bc + 1e-9) {
                pass = false;
                note = "triangle inequality violated";
                residual = std::max(residual, ac - ab - bc);
            }
        }
        CaseResult result{"case_" + std::to_string(k), pass, residual, note, ""};
        if (!pass) {
            std::ostringstream os;
            os.precision(17);
            os << "ground " << ground << "\ncost\n";
            for (int i = 0; i < ground; ++i) {
                for (int j = 0; j < ground; ++j) os << (j ? " " : "") << cost.at(i, j);
                os << "\n";
            }
            auto dump = [&os](const char* tag, const DiscreteDistribution& d) {
                os << tag;
                for (std::size_t t = 0; t < d.support.size(); ++t)
                    os << " " << d.support[t] << ":" << d.weights[t];
                os << "\n";
            };
            dump("mu", mu);
            dump("nu", nu);
            result.replay = os.str();
        }
        report.cases.push_back(std::move(result));
    }
    return report;
}

/// Closed-form predictive reward discrepancy against its Monte-Carlo mode.
inline SuiteReport discrepancy_suite(int n_pairs = 20, std::uint64_t master_seed = 8,
                                     long mc_samples = 10000000) {
    SuiteReport report{"discrepancy", {}};
    Rng rng(splitmix64(master_seed + 53));
    for (int k = 0; k < n_pairs; ++k) {
        GaussianRewardModel model(2, 1, 0.0, 4.0, 0.0, 1.0);
        model.set_cell(0, 0, rng.uniform(-2.0, 2.0), rng.uniform(0.0, 1.5), 1);
        model.set_cell(1, 0, rng.uniform(-2.0, 2.0), rng.uniform(0.0, 1.5), 1);
        const Policy pi = Policy::uniform(2, 1);
        OperatorConfig closed{1.0, 0.5, OperatorMode::predictive, DiscrepancyMode::closed_form};
        OperatorConfig mc{1.0, 0.5, OperatorMode::predictive, DiscrepancyMode::monte_carlo,
                          mc_samples, derive_seed(master_seed, k)};
        const double cf = delta_r_predictive(model, pi, 0, 1, closed);
        const double est = delta_r_predictive(model, pi, 0, 1, mc);
        const double err = std::abs(cf - est);
        report.cases.push_back({"pair_" + std::to_string(k), err <= 2e-3, err,
                                "closed " + std::to_string(cf), ""});
    }
    return report;
}

} // namespace bisim
