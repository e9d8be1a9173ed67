#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "bisim/errors.hpp"

namespace bisim {

/// Finitely supported probability distribution over state indices.
struct DiscreteDistribution {
    std::vector<int> support;
    std::vector<double> weights;

    /// Builds a distribution from a dense probability row, dropping zero atoms.
    static DiscreteDistribution from_dense(const double* row, int n) {
        DiscreteDistribution d;
        for (int i = 0; i < n; ++i) {
            if (row[i] > 0.0) {
                d.support.push_back(i);
                d.weights.push_back(row[i]);
            }
        }
        return d;
    }

    static DiscreteDistribution point_mass(int state) { return {{state}, {1.0}}; }

    void validate() const {
        if (support.size() != weights.size())
            throw std::invalid_argument("DiscreteDistribution: support/weight size mismatch");
        if (support.empty()) throw std::invalid_argument("DiscreteDistribution: empty support");
        double sum = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0))
                throw std::invalid_argument("DiscreteDistribution: negative weight");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("DiscreteDistribution: weights sum to " +
                                        std::to_string(sum) + ", not 1");
        std::vector<int> s = support;
        std::sort(s.begin(), s.end());
        if (std::adjacent_find(s.begin(), s.end()) != s.end())
            throw std::invalid_argument("DiscreteDistribution: duplicate support index");
    }
};

/// Dense nonnegative ground-cost table indexed by state pairs.
class CostMatrix {
public:
    CostMatrix(int rows, int cols, std::vector<double> entries)
        : rows_(rows), cols_(cols), entries_(std::move(entries)) {
        if (entries_.size() != static_cast<std::size_t>(rows_) * cols_)
            throw std::invalid_argument("CostMatrix: wrong entry count");
        for (double c : entries_)
            if (!(c >= 0.0) || !std::isfinite(c))
                throw std::invalid_argument("CostMatrix: entries must be finite and >= 0");
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double at(int i, int j) const {
        return entries_[static_cast<std::size_t>(i) * cols_ + j];
    }
    double operator()(int i, int j) const { return at(i, j); }

private:
    int rows_;
    int cols_;
    std::vector<double> entries_;
};

/// Exact optimal-transport solution: value, dual potentials and the coupling.
/// At optimality the duals certify the value: c_ij - u_i - v_j >= -1e-9 for
/// all cells and value == sum_i u_i a_i + sum_j v_j b_j up to round-off.
struct W1Result {
    double value = 0.0;
    int m = 0, n = 0;
    std::vector<double> plan; // row-major m x n coupling
    std::vector<double> u, v; // dual potentials

    double dual_objective(const std::vector<double>& a, const std::vector<double>& b) const {
        double acc = 0.0;
        for (int i = 0; i < m; ++i) acc += u[i] * a[i];
        for (int j = 0; j < n; ++j) acc += v[j] * b[j];
        return acc;
    }
};

namespace detail {

/// Transportation simplex on a dense m x n cost table with positive supplies a
/// and demands b (both summing to the same total). Exact up to round-off.
inline W1Result transport_simplex(const std::vector<double>& a, const std::vector<double>& b,
                                  const std::vector<double>& cost) {
    const int m = static_cast<int>(a.size());
    const int n = static_cast<int>(b.size());
    auto c = [&](int i, int j) { return cost[static_cast<std::size_t>(i) * n + j]; };

    std::vector<double> flow(static_cast<std::size_t>(m) * n, 0.0);
    std::vector<char> basic(static_cast<std::size_t>(m) * n, 0);
    std::vector<std::vector<int>> row_adj(m), col_adj(n);
    auto idx = [&](int i, int j) { return static_cast<std::size_t>(i) * n + j; };
    auto add_basic = [&](int i, int j) {
        basic[idx(i, j)] = 1;
        row_adj[i].push_back(j);
        col_adj[j].push_back(i);
    };
    auto drop_basic = [&](int i, int j) {
        basic[idx(i, j)] = 0;
        row_adj[i].erase(std::find(row_adj[i].begin(), row_adj[i].end(), j));
        col_adj[j].erase(std::find(col_adj[j].begin(), col_adj[j].end(), i));
    };

    // Northwest-corner start; ties advance the row only, keeping m+n-1 basics.
    {
        std::vector<double> ares = a, bres = b;
        int i = 0, j = 0;
        while (true) {
            const double f = std::min(ares[i], bres[j]);
            flow[idx(i, j)] = f;
            add_basic(i, j);
            ares[i] -= f;
            bres[j] -= f;
            if (i == m - 1 && j == n - 1) break;
            if (i < m - 1 && (ares[i] <= bres[j] || j == n - 1))
                ++i;
            else
                ++j;
        }
    }

    std::vector<double> u(m), v(n);
    std::vector<int> stack;
    std::vector<char> row_done(m), col_done(n);
    auto compute_potentials = [&]() {
        std::fill(row_done.begin(), row_done.end(), 0);
        std::fill(col_done.begin(), col_done.end(), 0);
        u[0] = 0.0;
        row_done[0] = 1;
        stack.assign(1, 0); // nodes: rows are [0,m), cols are m+j
        while (!stack.empty()) {
            const int node = stack.back();
            stack.pop_back();
            if (node < m) {
                for (int j : row_adj[node])
                    if (!col_done[j]) {
                        v[j] = c(node, j) - u[node];
                        col_done[j] = 1;
                        stack.push_back(m + j);
                    }
            } else {
                const int j = node - m;
                for (int i : col_adj[j])
                    if (!row_done[i]) {
                        u[i] = c(i, j) - v[j];
                        row_done[i] = 1;
                        stack.push_back(i);
                    }
            }
        }
    };

    double max_cost = 0.0;
    for (double x : cost) max_cost = std::max(max_cost, std::abs(x));
    const double eps = 1e-11 * (1.0 + max_cost);

    std::vector<int> parent(m + n);
    std::vector<char> seen(m + n);
    const long max_pivots = 200L * (m + n) * (m + n) + 1000;
    const long bland_after = max_pivots / 2;

    for (long pivot = 0;; ++pivot) {
        if (pivot >= max_pivots)
            throw solver_error("w1_discrete: transportation simplex pivot cap exceeded");
        compute_potentials();

        int ei = -1, ej = -1;
        double best = -eps;
        const bool bland = pivot >= bland_after;
        for (int i = 0; i < m && (ei < 0 || !bland); ++i) {
            for (int j = 0; j < n; ++j) {
                if (basic[idx(i, j)]) continue;
                const double rc = c(i, j) - u[i] - v[j];
                if (rc < best) {
                    best = rc;
                    ei = i;
                    ej = j;
                    if (bland) break;
                }
            }
        }
        if (ei < 0) break; // dual feasible: optimal

        // Unique tree path from row ei to column ej through the basis.
        std::fill(seen.begin(), seen.end(), 0);
        stack.assign(1, ei);
        seen[ei] = 1;
        parent[ei] = -1;
        while (!stack.empty()) {
            const int node = stack.back();
            stack.pop_back();
            if (node == m + ej) break;
            if (node < m) {
                for (int j : row_adj[node])
                    if (!seen[m + j]) {
                        seen[m + j] = 1;
                        parent[m + j] = node;
                        stack.push_back(m + j);
                    }
            } else {
                for (int i : col_adj[node - m])
                    if (!seen[i]) {
                        seen[i] = 1;
                        parent[i] = node;
                        stack.push_back(i);
                    }
            }
        }
        if (!seen[m + ej])
            throw solver_error("w1_discrete: basis lost spanning-tree structure");

        std::vector<int> path; // nodes ei .. m+ej
        for (int node = m + ej; node != -1; node = parent[node]) path.push_back(node);
        std::reverse(path.begin(), path.end());

        // Cycle = entering arc (+) plus path arcs; arcs at even path offsets
        // carry the minus sign.
        double theta = std::numeric_limits<double>::infinity();
        int li = -1, lj = -1;
        const int arcs = static_cast<int>(path.size()) - 1;
        for (int t = 0; t < arcs; t += 2) {
            const int x = path[t], y = path[t + 1];
            const int i = x < m ? x : y;
            const int j = x < m ? y - m : x - m;
            const double f = flow[idx(i, j)];
            if (f < theta - 1e-18 || (std::abs(f - theta) <= 1e-18 &&
                                      (li < 0 || i < li || (i == li && j < lj)))) {
                theta = f;
                li = i;
                lj = j;
            }
        }
        flow[idx(ei, ej)] = 0.0;
        add_basic(ei, ej);
        for (int t = 0; t < arcs; ++t) {
            const int x = path[t], y = path[t + 1];
            const int i = x < m ? x : y;
            const int j = x < m ? y - m : x - m;
            if (t % 2 == 0)
                flow[idx(i, j)] = std::max(0.0, flow[idx(i, j)] - theta);
            else
                flow[idx(i, j)] += theta;
        }
        flow[idx(ei, ej)] = theta;
        drop_basic(li, lj);
    }

    W1Result res;
    res.m = m;
    res.n = n;
    res.plan = std::move(flow);
    res.u = std::move(u);
    res.v = std::move(v);
    double value = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) value += res.plan[idx(i, j)] * c(i, j);
    res.value = value;
    return res;
}

} // namespace detail

/// Exact 1-Wasserstein distance between two finitely supported distributions
/// under an arbitrary nonnegative ground cost, returning the full solution.
/// `cost(x, y)` is evaluated on support(mu) x support(nu).
template <class CostFn>
W1Result w1_discrete_full(const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                          CostFn&& cost) {
    mu.validate();
    nu.validate();

    std::vector<int> sa, sb;
    std::vector<double> a, b;
    for (std::size_t k = 0; k < mu.support.size(); ++k)
        if (mu.weights[k] > 0.0) {
            sa.push_back(mu.support[k]);
            a.push_back(mu.weights[k]);
        }
    for (std::size_t k = 0; k < nu.support.size(); ++k)
        if (nu.weights[k] > 0.0) {
            sb.push_back(nu.support[k]);
            b.push_back(nu.weights[k]);
        }

    const int m = static_cast<int>(a.size());
    const int n = static_cast<int>(b.size());
    std::vector<double> c(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            const double cij = cost(sa[i], sb[j]);
            if (!(cij >= 0.0) || !std::isfinite(cij))
                throw std::invalid_argument("w1_discrete: ground cost must be finite and >= 0");
            c[static_cast<std::size_t>(i) * n + j] = cij;
        }
    }
    if (m == 1 || n == 1) {
        // Unique coupling: the product of the marginals.
        W1Result res;
        res.m = m;
        res.n = n;
        res.plan.resize(static_cast<std::size_t>(m) * n);
        double value = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                const double f = a[i] * b[j];
                res.plan[static_cast<std::size_t>(i) * n + j] = f;
                value += f * c[static_cast<std::size_t>(i) * n + j];
            }
        res.value = value;
        // Duals: u_i = min over j shifted so the certificate holds exactly.
        res.u.assign(m, 0.0);
        res.v.assign(n, 0.0);
        if (m == 1)
            for (int j = 0; j < n; ++j) res.v[j] = c[j];
        else
            for (int i = 0; i < m; ++i) res.u[i] = c[static_cast<std::size_t>(i) * n];
        return res;
    }
    return detail::transport_simplex(a, b, c);
}

template <class CostFn>
double w1_discrete(const DiscreteDistribution& mu, const DiscreteDistribution& nu, CostFn&& cost) {
    return w1_discrete_full(mu, nu, std::forward<CostFn>(cost)).value;
}

inline double w1_discrete(const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                          const CostMatrix& cost) {
    return w1_discrete_full(mu, nu, [&cost](int i, int j) { return cost.at(i, j); }).value;
}

/// State-feature table: one real vector per state index.
using FeatureMap = std::vector<std::vector<double>>;

inline double euclidean_distance(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw std::invalid_argument("euclidean_distance: dimension mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - y[k];
        acc += d * d;
    }
    return std::sqrt(acc);
}

/// W1 between `dist` (over states with features) and a point mass in feature
/// space: the weighted mean Euclidean distance to the point.
inline double w1_to_point(const DiscreteDistribution& dist, const FeatureMap& features,
                          const std::vector<double>& point) {
    dist.validate();
    double acc = 0.0;
    for (std::size_t k = 0; k < dist.support.size(); ++k) {
        const int s = dist.support[k];
        if (s < 0 || static_cast<std::size_t>(s) >= features.size())
            throw std::invalid_argument("w1_to_point: feature map missing state " +
                                        std::to_string(s));
        acc += dist.weights[k] * euclidean_distance(features[s], point);
    }
    return acc;
}

} // namespace bisim
