#include <doctest.h>

#include <cmath>

#include "bisim/embedding.hpp"
#include "bisim/verify.hpp"

using namespace bisim;

TEST_CASE("zero targets with zero-initialized latents have zero loss") {
    EmbeddingTable emb;
    emb.n_states = 3;
    emb.k = 2;
    emb.z.assign(6, 0.0);
    MetricMatrix target(3);
    CHECK(embedding_loss(emb, target, all_state_pairs(3)) == 0.0);
}

TEST_CASE("two-state fixture converges to the target separation") {
    MetricMatrix target(2);
    target.set(0, 1, 2.0);
    EmbeddingFitResult fit = fit_embedding(target, 1, 3000, 0.05, 42);
    CHECK(std::abs(fit.embedding.pair_distance(0, 1) - 2.0) <= 1e-3);
    CHECK(fit.final_loss <= 1e-6);
}

TEST_CASE("loss checkpoints are non-increasing up to 5% slack") {
    MetricMatrix target = MetricMatrix::random(6, 5, 1.5);
    EmbeddingFitResult fit = fit_embedding(target, 2, 2000, 0.02, 7);
    REQUIRE(fit.loss_checkpoints.size() > 2);
    for (std::size_t i = 1; i < fit.loss_checkpoints.size(); ++i)
        CHECK(fit.loss_checkpoints[i] <= fit.loss_checkpoints[i - 1] * 1.05 + 1e-12);
}

TEST_CASE("analytic gradient matches central finite differences") {
    SuiteReport report = gradient_suite(6);
    CHECK(report.all_pass());
}

TEST_CASE("oversized learning rate raises a divergence error") {
    MetricMatrix target = MetricMatrix::random(5, 11, 2.0);
    CHECK_THROWS_AS(fit_embedding(target, 2, 4000, 1e14, 3), divergence_error);
}

TEST_CASE("argument validation") {
    MetricMatrix target(2);
    CHECK_THROWS_AS(fit_embedding(target, 0, 10, 0.1, 1), std::invalid_argument);
    CHECK_THROWS_AS(fit_embedding(target, 1, -5, 0.1, 1), std::invalid_argument);
}

TEST_CASE("large instances use sampled pairs and still fit") {
    // 70 states exceeds the exhaustive-pair threshold
    MetricMatrix target(70);
    for (int i = 0; i < 70; ++i)
        for (int j = i + 1; j < 70; ++j) target.set(i, j, 1.0);
    EmbeddingFitResult fit = fit_embedding(target, 8, 400, 0.05, 99);
    CHECK(std::isfinite(fit.final_loss));
    CHECK(fit.final_loss < 0.5); // well below the initial ~1.0
}
