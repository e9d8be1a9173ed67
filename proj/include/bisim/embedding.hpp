#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bisim/errors.hpp"
#include "bisim/metric_ops.hpp"
#include "bisim/rng.hpp"

namespace bisim {

/// One latent vector per state, uniform dimension k.
struct EmbeddingTable {
    int n_states = 0;
    int k = 0;
    std::vector<double> z; // row-major n_states x k

    double* row(int s) { return z.data() + static_cast<std::size_t>(s) * k; }
    const double* row(int s) const { return z.data() + static_cast<std::size_t>(s) * k; }

    double pair_distance(int i, int j) const {
        const double* a = row(i);
        const double* b = row(j);
        double acc = 0.0;
        for (int t = 0; t < k; ++t) acc += (a[t] - b[t]) * (a[t] - b[t]);
        return std::sqrt(acc);
    }
};

/// Mean squared regression error between latent distances and fixed metric
/// targets over the given pairs.
inline double embedding_loss(const EmbeddingTable& emb, const MetricMatrix& d_target,
                             const std::vector<std::pair<int, int>>& pairs) {
    if (pairs.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& [i, j] : pairs) {
        const double e = emb.pair_distance(i, j) - d_target.at(i, j);
        acc += e * e;
    }
    return acc / static_cast<double>(pairs.size());
}

/// Analytic gradient of embedding_loss with respect to every latent entry.
/// Coincident pairs contribute a zero direction (subgradient choice).
inline std::vector<double> embedding_gradient(const EmbeddingTable& emb,
                                              const MetricMatrix& d_target,
                                              const std::vector<std::pair<int, int>>& pairs) {
    std::vector<double> grad(emb.z.size(), 0.0);
    if (pairs.empty()) return grad;
    const double scale = 2.0 / static_cast<double>(pairs.size());
    for (const auto& [i, j] : pairs) {
        const double dist = emb.pair_distance(i, j);
        if (dist < 1e-12) continue;
        const double coef = scale * (dist - d_target.at(i, j)) / dist;
        const double* zi = emb.row(i);
        const double* zj = emb.row(j);
        double* gi = grad.data() + static_cast<std::size_t>(i) * emb.k;
        double* gj = grad.data() + static_cast<std::size_t>(j) * emb.k;
        for (int t = 0; t < emb.k; ++t) {
            const double dir = coef * (zi[t] - zj[t]);
            gi[t] += dir;
            gj[t] -= dir;
        }
    }
    return grad;
}

inline std::vector<std::pair<int, int>> all_state_pairs(int n) {
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    return pairs;
}

struct EmbeddingFitResult {
    EmbeddingTable embedding;
    double final_loss = 0.0;
    std::vector<double> loss_checkpoints;
};

/// Gradient descent on the metric-regression loss with constant targets.
/// All pairs are used when n_states <= 64; beyond that each step draws a
/// seeded uniform batch of pairs. Initial latents are seeded uniform in
/// [-0.1, 0.1].
inline EmbeddingFitResult fit_embedding(const MetricMatrix& d_target, int k, int steps,
                                        double learning_rate, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("fit_embedding: k must be >= 1");
    if (steps < 0) throw std::invalid_argument("fit_embedding: steps must be >= 0");
    d_target.validate();
    const int n = d_target.n();
    Rng rng(splitmix64(seed ^ 0x656d626564ULL));
    EmbeddingTable emb;
    emb.n_states = n;
    emb.k = k;
    emb.z.resize(static_cast<std::size_t>(n) * k);
    for (double& x : emb.z) x = rng.uniform(-0.1, 0.1);

    const bool exhaustive = n <= 64;
    const std::vector<std::pair<int, int>> all_pairs = all_state_pairs(n);
    const int batch = static_cast<int>(std::min<std::size_t>(all_pairs.size(), 2048));

    EmbeddingFitResult res;
    const int checkpoint_every = std::max(1, steps / 20);
    std::vector<std::pair<int, int>> pairs = all_pairs;
    for (int step = 0; step < steps; ++step) {
        if (!exhaustive) {
            pairs.resize(batch);
            for (int b = 0; b < batch; ++b)
                pairs[b] = all_pairs[rng.uniform_int(all_pairs.size())];
        }
        const std::vector<double> grad = embedding_gradient(emb, d_target, pairs);
        for (std::size_t t = 0; t < emb.z.size(); ++t) emb.z[t] -= learning_rate * grad[t];
        if (step % checkpoint_every == 0 || step == steps - 1) {
            const double loss = embedding_loss(emb, d_target, exhaustive ? pairs : all_pairs);
            if (!std::isfinite(loss))
                throw divergence_error(
                    "fit_embedding: non-finite loss at step " + std::to_string(step) +
                    "; reduce the learning rate");
            res.loss_checkpoints.push_back(loss);
        }
    }
    res.final_loss = embedding_loss(emb, d_target, all_pairs);
    if (!std::isfinite(res.final_loss))
        throw divergence_error("fit_embedding: non-finite final loss; reduce the learning rate");
    res.embedding = std::move(emb);
    return res;
}

} // namespace bisim
