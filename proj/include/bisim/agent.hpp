#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bisim/errors.hpp"
#include "bisim/intrinsic.hpp"
#include "bisim/maze.hpp"
#include "bisim/reward_model.hpp"
#include "bisim/rng.hpp"

namespace bisim {

/// Tabular Q-learning configuration over discretized maze bins.
struct AgentConfig {
    double bin_size = 0.0; // 0 -> use the layout's cell size
    int n_actions = 8;     // compass directions of magnitude a_max
    double epsilon = 0.2;
    double learning_rate = 0.2;
    int n_step = 3;
    double gamma = 0.99;
    int batch_size = 1024;
    int buffer_capacity = 200000;
    int gradient_frequency = 2;
    long total_steps = 100000;
    std::uint64_t seed = 1;

    void validate() const {
        if (!(epsilon >= 0.0 && epsilon <= 1.0))
            throw std::invalid_argument("AgentConfig: epsilon must lie in [0, 1]");
        if (!(gamma >= 0.0 && gamma < 1.0))
            throw std::invalid_argument("AgentConfig: gamma must lie in [0, 1)");
        if (buffer_capacity < batch_size)
            throw std::invalid_argument("AgentConfig: buffer_capacity must be >= batch_size");
        if (n_step < 1) throw std::invalid_argument("AgentConfig: n_step must be >= 1");
        if (n_actions != 8) throw std::invalid_argument("AgentConfig: 8 compass actions expected");
        if (gradient_frequency < 1)
            throw std::invalid_argument("AgentConfig: gradient_frequency must be >= 1");
        if (total_steps < 0) throw std::invalid_argument("AgentConfig: total_steps must be >= 0");
    }
};

/// Dense action-value table over (bin, action); unseen cells default to 0.
struct QTable {
    int n_bins = 0;
    int n_actions = 0;
    std::vector<double> q;

    QTable(int bins, int actions)
        : n_bins(bins), n_actions(actions),
          q(static_cast<std::size_t>(bins) * actions, 0.0) {}

    double at(int bin, int action) const {
        return q[static_cast<std::size_t>(bin) * n_actions + action];
    }
    double& at(int bin, int action) {
        return q[static_cast<std::size_t>(bin) * n_actions + action];
    }

    int argmax(int bin) const {
        int best = 0;
        for (int a = 1; a < n_actions; ++a)
            if (at(bin, a) > at(bin, best)) best = a;
        return best;
    }

    double max(int bin) const { return at(bin, argmax(bin)); }
};

/// Epsilon-greedy action choice; greedy ties break to the lowest index.
inline int select_action(const QTable& q, int bin, double epsilon, Rng& rng) {
    if (rng.uniform() < epsilon) return static_cast<int>(rng.uniform_int(q.n_actions));
    return q.argmax(bin);
}

/// Seeded uniform permutation of a batch, pairing element k with perm(k).
template <class T>
std::vector<T> rearrange_batch(const std::vector<T>& batch, std::uint64_t seed) {
    if (batch.empty()) throw std::invalid_argument("rearrange_batch: empty batch");
    std::vector<std::size_t> perm(batch.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng rng(splitmix64(seed ^ 0x7265617272ULL));
    for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[rng.uniform_int(i)]);
    std::vector<T> out;
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(batch[perm[i]]);
    return out;
}

/// One replay element of the maze pipeline. next_action is the action
/// executed at the next state (greedy choice at an episode boundary), so
/// potentials of consecutive steps are well-defined at gradient time.
struct MazeRecord {
    float x = 0, y = 0;
    float nx = 0, ny = 0;
    int bin = 0;
    int next_bin = 0;
    int action = 0;
    int next_action = 0;
    float r = 0;
    float target = 0; // n-step Monte-Carlo return for the reward model
    bool done = false;
    std::int32_t episode = 0;
};

/// Bounded FIFO ring buffer; evicted records are reported to the caller so
/// incremental model statistics stay in sync with the buffer contents.
class ReplayBuffer {
public:
    explicit ReplayBuffer(int capacity) : capacity_(capacity) {
        if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
        data_.reserve(std::min(capacity, 1 << 20));
    }

    template <class EvictFn>
    void push(const MazeRecord& rec, EvictFn&& on_evict) {
        if (static_cast<int>(data_.size()) < capacity_) {
            data_.push_back(rec);
            return;
        }
        on_evict(data_[head_]);
        data_[head_] = rec;
        head_ = (head_ + 1) % capacity_;
    }

    void push(const MazeRecord& rec) {
        push(rec, [](const MazeRecord&) {});
    }

    int size() const { return static_cast<int>(data_.size()); }

    /// Record by age: index 0 is the oldest surviving record.
    const MazeRecord& at(int logical) const {
        return data_[(head_ + logical) % data_.size()];
    }

private:
    int capacity_;
    int head_ = 0;
    std::vector<MazeRecord> data_;
};

namespace detail {

/// Incremental per-(bin, action) Gaussian statistics over n-step targets;
/// query semantics match fit_reward_model (population variance, clamped
/// sigma, prior (0, sigma_max) for unseen cells).
struct RunningRewardStats {
    int n_actions = 0;
    double sigma_min = 1e-4;
    double sigma_max = 1.0;
    std::vector<double> sum, sumsq;
    std::vector<long> count;

    RunningRewardStats(int n_bins, int actions, double smin, double smax)
        : n_actions(actions), sigma_min(smin), sigma_max(smax),
          sum(static_cast<std::size_t>(n_bins) * actions, 0.0), sumsq(sum.size(), 0.0),
          count(sum.size(), 0) {}

    std::size_t cell(int bin, int a) const {
        return static_cast<std::size_t>(bin) * n_actions + a;
    }
    void add(int bin, int a, double target) {
        const std::size_t i = cell(bin, a);
        sum[i] += target;
        sumsq[i] += target * target;
        count[i] += 1;
    }
    void retract(int bin, int a, double target) {
        const std::size_t i = cell(bin, a);
        sum[i] -= target;
        sumsq[i] -= target * target;
        count[i] -= 1;
    }
    double mean(int bin, int a) const {
        const std::size_t i = cell(bin, a);
        return count[i] > 0 ? sum[i] / static_cast<double>(count[i]) : 0.0;
    }
    std::pair<double, double> predict(int bin, int a) const {
        const std::size_t i = cell(bin, a);
        if (count[i] == 0) return {0.0, sigma_max};
        const double mu = sum[i] / static_cast<double>(count[i]);
        const double var = std::max(0.0, sumsq[i] / static_cast<double>(count[i]) - mu * mu);
        return {mu, std::clamp(std::sqrt(var), sigma_min, sigma_max)};
    }
};

} // namespace detail

/// Potential-model view over the maze models: deterministic next-feature
/// prediction, so the anchor distance is a plain Euclidean distance.
struct MazePotentialModel {
    const detail::RunningRewardStats& rewards;
    const NextFeatureModel& features;

    double reward_mean(int bin, int a) const { return rewards.mean(bin, a); }

    std::vector<double> predicted_feature(int bin, int a) const {
        return features.predict(bin, a);
    }

    double anchor_distance(int bin, int a, const std::vector<double>& point) const {
        double fx, fy;
        features.predict2(bin, a, fx, fy);
        const double dx = fx - point[0];
        const double dy = fy - point[1];
        return std::sqrt(dx * dx + dy * dy);
    }
};

struct CurveSample {
    long step = 0;
    double coverage = 0.0;
    double mean_bonus = 0.0;
    double mean_q = 0.0;
};

struct TraceRow {
    long t = 0;
    double r = 0.0;
    double phi = 0.0;
    double bonus = 0.0;
    double shaped = 0.0;
};

struct RunResult {
    std::uint64_t seed = 0;
    std::vector<CurveSample> curve;
    double final_coverage = 0.0;
    std::string coverage_grid;
    std::vector<TraceRow> trace;
    bool aborted = false;
    std::string abort_message;
};

/// Collect / fit / shape / update loop over a maze layout. Every
/// gradient_frequency environment steps (once the buffer holds a full batch)
/// a batch is sampled, the reward and next-feature models are refit from the
/// buffer, the anchor is recomputed from the batch, each batch transition
/// receives the potential-difference bonus, and n-step Q-learning updates run
/// on r' = r + eta * F. Without a shaping config the control agent runs the
/// same machinery with raw rewards and never touches the models.
inline RunResult train(const MazeSpec& spec, const AgentConfig& cfg,
                       const std::optional<ShapingConfig>& shaping, bool record_trace = false) {
    cfg.validate();
    if (shaping) shaping->validate();

    const double bin_size = cfg.bin_size > 0.0 ? cfg.bin_size : spec.cell_size;
    const int bins_x = std::max(1, static_cast<int>(std::ceil(spec.width() / bin_size - 1e-9)));
    const int bins_y = std::max(1, static_cast<int>(std::ceil(spec.height() / bin_size - 1e-9)));
    const int n_bins = bins_x * bins_y;
    auto bin_of = [&](double x, double y) {
        const int cx = std::min(bins_x - 1, std::max(0, static_cast<int>(x / bin_size)));
        const int cy = std::min(bins_y - 1, std::max(0, static_cast<int>(y / bin_size)));
        return cy * bins_x + cx;
    };

    FeatureMap bin_centers(n_bins);
    for (int by = 0; by < bins_y; ++by)
        for (int bx = 0; bx < bins_x; ++bx)
            bin_centers[by * bins_x + bx] = {(bx + 0.5) * bin_size, (by + 0.5) * bin_size};

    const double amax = spec.a_max();
    const double diag = std::sqrt(0.5);
    const double dir_x[8] = {1, diag, 0, -diag, -1, -diag, 0, diag};
    const double dir_y[8] = {0, diag, 1, diag, 0, -diag, -1, -diag};

    Rng action_rng(derive_seed(cfg.seed, 0));
    Rng batch_rng(derive_seed(cfg.seed, 1));

    QTable qtable(n_bins, cfg.n_actions);
    ReplayBuffer buffer(cfg.buffer_capacity);
    detail::RunningRewardStats rstats(n_bins, cfg.n_actions, 1e-4, 1.0);
    NextFeatureModel fmodel(n_bins, cfg.n_actions, bin_centers);
    const MazePotentialModel pmodel{rstats, fmodel};

    MazeEnv env(spec);
    CoverageTracker coverage(spec);
    MazeState state = env.reset();
    coverage.update(state);

    RunResult result;
    result.seed = cfg.seed;

    Anchor anchor;
    bool has_anchor = false;
    double bonus_acc = 0.0;
    long bonus_count = 0;
    std::int32_t episode_id = 0;

    struct Staged {
        double x, y, nx, ny;
        int bin, next_bin, action;
        double r;
        bool done;
    };
    std::vector<Staged> staged;
    staged.reserve(spec.max_episode_steps);

    const bool shaped = shaping.has_value();
    const double eta = shaped ? shaping->eta : 0.0;

    auto sample_curve = [&](long step) {
        CurveSample s;
        s.step = step;
        s.coverage = coverage.ratio();
        s.mean_bonus = bonus_count > 0 ? bonus_acc / static_cast<double>(bonus_count) : 0.0;
        double qsum = 0.0;
        for (double v : qtable.q) qsum += v;
        s.mean_q = qsum / static_cast<double>(qtable.q.size());
        result.curve.push_back(s);
        bonus_acc = 0.0;
        bonus_count = 0;
    };

    auto phi_of = [&](int bin, int action) {
        return shaped ? potential(pmodel, bin, action, anchor, *shaping) : 0.0;
    };

    auto finalize_episode = [&](long t_end) {
        const int len = static_cast<int>(staged.size());
        if (len == 0) return;
        for (int k = 0; k < len; ++k) {
            MazeRecord rec;
            rec.x = static_cast<float>(staged[k].x);
            rec.y = static_cast<float>(staged[k].y);
            rec.nx = static_cast<float>(staged[k].nx);
            rec.ny = static_cast<float>(staged[k].ny);
            rec.bin = staged[k].bin;
            rec.next_bin = staged[k].next_bin;
            rec.action = staged[k].action;
            rec.next_action =
                k + 1 < len ? staged[k + 1].action : qtable.argmax(staged[k].next_bin);
            rec.r = static_cast<float>(staged[k].r);
            rec.done = staged[k].done;
            rec.episode = episode_id;
            double target = 0.0, g = 1.0;
            for (int w = 0; w < cfg.n_step && k + w < len; ++w) {
                target += g * staged[k + w].r;
                if (staged[k + w].done) break;
                g *= cfg.gamma;
            }
            rec.target = static_cast<float>(target);

            if (shaped) {
                buffer.push(rec, [&](const MazeRecord& old) {
                    rstats.retract(old.bin, old.action, old.target);
                    fmodel.retract(old.bin, old.action,
                                   {static_cast<double>(old.nx), static_cast<double>(old.ny)});
                });
                rstats.add(rec.bin, rec.action, rec.target);
                fmodel.observe(rec.bin, rec.action,
                               {static_cast<double>(rec.nx), static_cast<double>(rec.ny)});
            } else {
                buffer.push(rec);
            }
        }
        if (record_trace && has_anchor) {
            // Per-step bonus rows for the finished episode under the current
            // anchor snapshot; exact telescoping within the episode.
            const long t0 = t_end - len;
            for (int k = 0; k < len; ++k) {
                TraceRow row;
                row.t = t0 + k + 1;
                row.r = staged[k].r;
                const int next_action =
                    k + 1 < len ? staged[k + 1].action : qtable.argmax(staged[k].next_bin);
                row.phi = phi_of(staged[k].bin, staged[k].action);
                const double phi_next = phi_of(staged[k].next_bin, next_action);
                row.bonus = shaping_bonus(row.phi, phi_next, cfg.gamma);
                row.shaped = shaped_reward(row.r, row.bonus, eta);
                result.trace.push_back(row);
            }
        }
        staged.clear();
        ++episode_id;
    };

    sample_curve(0);
    for (long t = 1; t <= cfg.total_steps; ++t) {
        const int bin = bin_of(state.x, state.y);
        const int action = select_action(qtable, bin, cfg.epsilon, action_rng);
        const MazeEnv::StepResult sr = env.step(dir_x[action] * amax, dir_y[action] * amax);
        coverage.update(sr.state);
        staged.push_back({state.x, state.y, sr.state.x, sr.state.y, bin,
                          bin_of(sr.state.x, sr.state.y), action, sr.reward, sr.done});
        state = sr.state;
        if (sr.done) {
            finalize_episode(t);
            state = env.reset();
            coverage.update(state);
        }

        if (t % cfg.gradient_frequency == 0 && buffer.size() >= cfg.batch_size) {
            // Anchor from the sampled batch (mean reward, mean predicted
            // next feature), frozen for this gradient phase.
            std::vector<int> batch(cfg.batch_size);
            for (int b = 0; b < cfg.batch_size; ++b)
                batch[b] = static_cast<int>(batch_rng.uniform_int(buffer.size()));
            if (shaped) {
                switch (shaping->anchor_policy) {
                case AnchorPolicy::batch_mean: {
                    double r_star = 0.0, zx = 0.0, zy = 0.0;
                    for (int idx : batch) {
                        const MazeRecord& rec = buffer.at(idx);
                        double fx, fy;
                        fmodel.predict2(rec.bin, rec.action, fx, fy);
                        r_star += rec.r;
                        zx += fx;
                        zy += fy;
                    }
                    const double inv = 1.0 / cfg.batch_size;
                    anchor.r_star = r_star * inv;
                    anchor.z_star = {zx * inv, zy * inv};
                    break;
                }
                case AnchorPolicy::random_batch_element: {
                    const MazeRecord& rec = buffer.at(batch[0]);
                    anchor.r_star = rec.r;
                    anchor.z_star = fmodel.predict(rec.bin, rec.action);
                    break;
                }
                case AnchorPolicy::fixed_initial_state: {
                    const MazeRecord& rec = buffer.at(0);
                    anchor.r_star = rec.r;
                    anchor.z_star = fmodel.predict(rec.bin, rec.action);
                    break;
                }
                }
                has_anchor = true;
            }

            for (int idx : batch) {
                double target = 0.0, g = 1.0;
                int last = idx;
                bool terminated = false;
                for (int w = 0; w < cfg.n_step && idx + w < buffer.size(); ++w) {
                    const MazeRecord& rec = buffer.at(idx + w);
                    if (w > 0 && rec.episode != buffer.at(idx).episode) break;
                    last = idx + w;
                    double shaped_r = rec.r;
                    if (shaped) {
                        const double f = shaping_bonus(phi_of(rec.bin, rec.action),
                                                       phi_of(rec.next_bin, rec.next_action),
                                                       cfg.gamma);
                        shaped_r = shaped_reward(rec.r, f, eta);
                        bonus_acc += f;
                        ++bonus_count;
                    }
                    target += g * shaped_r;
                    g *= cfg.gamma;
                    if (rec.done) {
                        terminated = true;
                        break;
                    }
                }
                const MazeRecord& first = buffer.at(idx);
                if (!terminated) target += g * qtable.max(buffer.at(last).next_bin);
                double& qcell = qtable.at(first.bin, first.action);
                qcell += cfg.learning_rate * (target - qcell);
                if (std::abs(qcell) > 1e6)
                    throw solver_error("train: Q divergence at step " + std::to_string(t) +
                                       ", bin " + std::to_string(first.bin) + ", value " +
                                       std::to_string(qcell));
            }
        }

        if (t % 1000 == 0) sample_curve(t);
    }
    if (cfg.total_steps % 1000 != 0) sample_curve(cfg.total_steps);

    result.final_coverage = coverage.ratio();
    result.coverage_grid = coverage.render(spec);
    return result;
}

} // namespace bisim
