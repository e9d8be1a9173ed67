#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bisim/agent.hpp"
#include "bisim/errors.hpp"
#include "bisim/intrinsic.hpp"
#include "bisim/maze.hpp"
#include "bisim/mdp.hpp"
#include "bisim/metric_ops.hpp"
#include "bisim/verify.hpp"

namespace bisim::harness {

/// Deterministic number formatting for data files (no locale, no timestamps).
inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex16(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline const char* anchor_policy_name(AnchorPolicy p) {
    switch (p) {
    case AnchorPolicy::batch_mean: return "batch_mean";
    case AnchorPolicy::fixed_initial_state: return "fixed_initial_state";
    case AnchorPolicy::random_batch_element: return "random_batch_element";
    }
    return "batch_mean";
}

inline AnchorPolicy anchor_policy_from_name(const std::string& name) {
    if (name == "batch_mean") return AnchorPolicy::batch_mean;
    if (name == "fixed_initial_state") return AnchorPolicy::fixed_initial_state;
    if (name == "random_batch_element") return AnchorPolicy::random_batch_element;
    throw parse_error("unknown anchor policy '" + name + "'");
}

/// Experiment knobs: parsed from a JSON config file, overridable from the
/// command line. The hash covers every field that affects produced data (the
/// output directory deliberately excluded).
struct ExperimentConfig {
    std::string layout = "square_bottleneck";
    std::string mode = "paired"; // shaped | unshaped | paired
    int seeds = 10;
    std::uint64_t master_seed = 1;
    long steps = 100000;
    double eta = 1.0;
    double epsilon = 0.2;
    double learning_rate = 0.2;
    int n_step = 3;
    double gamma = 0.99;
    int batch_size = 1024;
    int buffer_capacity = 200000;
    int gradient_frequency = 2;
    double bin_size = 0.0; // 0 -> layout cell size
    double c_R = 1.0;
    double c_T = 0.99;
    std::string anchor_policy = "batch_mean";
    double tol = 1e-10;
    double layout_cell_size = 0.05; // for layouts loaded from files

    void validate() const {
        if (mode != "shaped" && mode != "unshaped" && mode != "paired")
            throw std::invalid_argument("ExperimentConfig: mode must be shaped|unshaped|paired");
        if (seeds < 1) throw std::invalid_argument("ExperimentConfig: seeds must be >= 1");
        anchor_policy_from_name(anchor_policy);
    }

    std::string canonical_string() const {
        std::ostringstream os;
        os.precision(17);
        os << "layout=" << layout << ";mode=" << mode << ";seeds=" << seeds
           << ";master_seed=" << master_seed << ";steps=" << steps << ";eta=" << eta
           << ";epsilon=" << epsilon << ";learning_rate=" << learning_rate
           << ";n_step=" << n_step << ";gamma=" << gamma << ";batch_size=" << batch_size
           << ";buffer_capacity=" << buffer_capacity
           << ";gradient_frequency=" << gradient_frequency << ";bin_size=" << bin_size
           << ";c_R=" << c_R << ";c_T=" << c_T << ";anchor_policy=" << anchor_policy
           << ";tol=" << tol << ";layout_cell_size=" << layout_cell_size;
        return os.str();
    }

    std::string hash() const { return hex16(fnv1a(canonical_string())); }

    nlohmann::json to_json() const {
        return nlohmann::json{{"layout", layout},
                              {"mode", mode},
                              {"seeds", seeds},
                              {"master_seed", master_seed},
                              {"steps", steps},
                              {"eta", eta},
                              {"epsilon", epsilon},
                              {"learning_rate", learning_rate},
                              {"n_step", n_step},
                              {"gamma", gamma},
                              {"batch_size", batch_size},
                              {"buffer_capacity", buffer_capacity},
                              {"gradient_frequency", gradient_frequency},
                              {"bin_size", bin_size},
                              {"c_R", c_R},
                              {"c_T", c_T},
                              {"anchor_policy", anchor_policy},
                              {"tol", tol},
                              {"layout_cell_size", layout_cell_size}};
    }

    static ExperimentConfig from_json(const nlohmann::json& j) {
        ExperimentConfig c;
        try {
            c.layout = j.value("layout", c.layout);
            c.mode = j.value("mode", c.mode);
            c.seeds = j.value("seeds", c.seeds);
            c.master_seed = j.value("master_seed", c.master_seed);
            c.steps = j.value("steps", c.steps);
            c.eta = j.value("eta", c.eta);
            c.epsilon = j.value("epsilon", c.epsilon);
            c.learning_rate = j.value("learning_rate", c.learning_rate);
            c.n_step = j.value("n_step", c.n_step);
            c.gamma = j.value("gamma", c.gamma);
            c.batch_size = j.value("batch_size", c.batch_size);
            c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
            c.gradient_frequency = j.value("gradient_frequency", c.gradient_frequency);
            c.bin_size = j.value("bin_size", c.bin_size);
            c.c_R = j.value("c_R", c.c_R);
            c.c_T = j.value("c_T", c.c_T);
            c.anchor_policy = j.value("anchor_policy", c.anchor_policy);
            c.tol = j.value("tol", c.tol);
            c.layout_cell_size = j.value("layout_cell_size", c.layout_cell_size);
        } catch (const nlohmann::json::exception& e) {
            throw parse_error(std::string("config: ") + e.what());
        }
        c.validate();
        return c;
    }

    static ExperimentConfig load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw parse_error("config: cannot open '" + path + "'");
        nlohmann::json j;
        try {
            is >> j;
        } catch (const nlohmann::json::exception& e) {
            throw parse_error("config '" + path + "': " + e.what());
        }
        return from_json(j);
    }

    bool operator==(const ExperimentConfig& other) const {
        return canonical_string() == other.canonical_string();
    }

    AgentConfig agent_config(std::uint64_t seed) const {
        AgentConfig a;
        a.bin_size = bin_size;
        a.epsilon = epsilon;
        a.learning_rate = learning_rate;
        a.n_step = n_step;
        a.gamma = gamma;
        a.batch_size = batch_size;
        a.buffer_capacity = buffer_capacity;
        a.gradient_frequency = gradient_frequency;
        a.total_steps = steps;
        a.seed = seed;
        return a;
    }

    ShapingConfig shaping_config() const {
        ShapingConfig s;
        s.eta = eta;
        s.gamma = gamma;
        s.c_R = c_R;
        s.c_T = c_T;
        s.anchor_policy = anchor_policy_from_name(anchor_policy);
        return s;
    }
};

inline MazeSpec resolve_layout(const ExperimentConfig& cfg) {
    for (MazeSpec& spec : builtin_layouts())
        if (spec.name == cfg.layout) return spec;
    std::ifstream is(cfg.layout);
    if (!is) throw std::invalid_argument("layout '" + cfg.layout +
                                         "' is neither built in nor a readable file");
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_layout(buf.str(), std::filesystem::path(cfg.layout).stem().string(),
                        cfg.layout_cell_size);
}

// ------------------------------------------------------------------
// verify driver
// ------------------------------------------------------------------

struct VerifyRequest {
    std::vector<std::string> suites;
    int seeds = 0; // 0 -> per-suite default case count
    std::uint64_t master_seed = 1;
    double tol = 1e-10;
};

inline SuiteReport run_suite(const std::string& name, const VerifyRequest& req) {
    const int n = req.seeds;
    if (name == "contraction") return contraction_suite(n > 0 ? n : 50, 50, req.master_seed);
    if (name == "diameter") return fixed_point_suite(n > 0 ? n : 50, req.master_seed, req.tol);
    if (name == "degeneracy") return degeneracy_suite(req.master_seed);
    if (name == "value_bound") return value_bound_suite(n > 0 ? n : 100, req.master_seed);
    if (name == "invariance") return invariance_suite(n > 0 ? n : 100, req.master_seed, 1e-6);
    if (name == "gradients") return gradient_suite(req.master_seed);
    if (name == "transport") return transport_suite(n > 0 ? n : 200, req.master_seed);
    if (name == "discrepancy") return discrepancy_suite(n > 0 ? n : 20, req.master_seed);
    throw std::invalid_argument("unknown verify suite '" + name + "'");
}

inline const std::vector<std::string>& all_suite_names() {
    static const std::vector<std::string> names = {"contraction", "diameter",   "degeneracy",
                                                   "value_bound", "invariance", "gradients",
                                                   "transport",   "discrepancy"};
    return names;
}

inline std::string format_report(const SuiteReport& report) {
    std::ostringstream os;
    os << "[suite " << report.suite << "] " << report.passed() << "/" << report.cases.size()
       << (report.all_pass() ? " pass" : " FAIL") << ", max residual "
       << fmt(report.max_residual()) << "\n";
    for (const CaseResult& c : report.cases) {
        os << "  " << c.id << ": " << (c.pass ? "pass" : "FAIL") << " residual=" << fmt(c.residual);
        if (!c.note.empty()) os << " (" << c.note << ")";
        os << "\n";
    }
    return os.str();
}

/// Runs the requested oracle suites; prints one report per suite, optionally
/// mirrors them to files, and returns whether everything passed. Failing
/// instances are serialized next to the reports for replay.
inline bool run_verify(const VerifyRequest& req, std::ostream& out,
                       const std::string& out_dir = "") {
    std::vector<std::string> suites = req.suites;
    if (suites.empty() || (suites.size() == 1 && suites[0] == "all")) suites = all_suite_names();
    bool ok = true;
    for (const std::string& name : suites) {
        const SuiteReport report = run_suite(name, req);
        const std::string text = format_report(report);
        out << text;
        if (!out_dir.empty()) {
            std::filesystem::create_directories(out_dir);
            std::ofstream f(std::filesystem::path(out_dir) / ("verify_" + name + ".txt"));
            f << "# bisim verify suite=" << name << " seeds=" << req.seeds
              << " seed=" << req.master_seed << " tol=" << fmt(req.tol) << "\n"
              << text;
            for (const CaseResult& c : report.cases) {
                if (c.pass || c.replay.empty()) continue;
                std::ofstream r(std::filesystem::path(out_dir) /
                                ("replay_" + name + "_" + c.id + ".txt"));
                r << c.replay;
            }
        }
        ok = ok && report.all_pass();
    }
    return ok;
}

// ------------------------------------------------------------------
// run-maze driver
// ------------------------------------------------------------------

struct SeedOutcome {
    int seed_index = 0;
    std::uint64_t seed = 0;
    RunResult result;
};

/// Trains one agent per derived seed, fanning seeds over a bounded worker
/// pool; results are merged by seed index so outputs are scheduling-independent.
inline std::vector<SeedOutcome> run_seeds(const MazeSpec& spec, const ExperimentConfig& cfg,
                                          bool shaped, int jobs) {
    std::vector<SeedOutcome> out(cfg.seeds);
    std::vector<std::thread> workers;
    const int n_workers = std::max(1, std::min(jobs, cfg.seeds));
    std::vector<int> next(1, 0);
    std::mutex mu;
    auto body = [&]() {
        while (true) {
            int idx;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next[0] >= cfg.seeds) return;
                idx = next[0]++;
            }
            SeedOutcome& slot = out[idx];
            slot.seed_index = idx;
            slot.seed = derive_seed(cfg.master_seed, idx);
            try {
                slot.result = train(spec, cfg.agent_config(slot.seed),
                                    shaped ? std::optional<ShapingConfig>(cfg.shaping_config())
                                           : std::nullopt);
            } catch (const std::exception& e) {
                slot.result.aborted = true;
                slot.result.abort_message = e.what();
            }
        }
    };
    for (int w = 0; w < n_workers; ++w) workers.emplace_back(body);
    for (std::thread& t : workers) t.join();
    return out;
}

inline double median(std::vector<double> xs) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

inline double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc / static_cast<double>(xs.size());
}

inline double std_of(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

inline void write_variant_files(const std::filesystem::path& dir, const MazeSpec& spec,
                                const ExperimentConfig& cfg, const std::string& variant,
                                const std::vector<SeedOutcome>& outcomes) {
    std::filesystem::create_directories(dir);
    const std::string hash = cfg.hash();
    for (const SeedOutcome& o : outcomes) {
        {
            std::ofstream f(dir / ("seed_" + std::to_string(o.seed_index) + "_curve.csv"));
            f << "# bisim run-maze curve layout=" << spec.name << " variant=" << variant
              << " seed_index=" << o.seed_index << " config=" << hash << "\n";
            f << "step,coverage,mean_bonus,mean_q\n";
            for (const CurveSample& s : o.result.curve)
                f << s.step << "," << fmt(s.coverage) << "," << fmt(s.mean_bonus) << ","
                  << fmt(s.mean_q) << "\n";
        }
        {
            std::ofstream f(dir / ("seed_" + std::to_string(o.seed_index) + "_coverage.txt"));
            f << "# bisim coverage layout=" << spec.name << " variant=" << variant
              << " seed_index=" << o.seed_index << " config=" << hash << "\n";
            f << o.result.coverage_grid;
        }
    }
    nlohmann::json seeds = nlohmann::json::array();
    std::vector<double> finals;
    for (const SeedOutcome& o : outcomes) {
        nlohmann::json j{{"seed_index", o.seed_index},
                         {"seed", o.seed},
                         {"final_coverage", o.result.final_coverage},
                         {"aborted", o.result.aborted}};
        if (o.result.aborted) j["abort_message"] = o.result.abort_message;
        seeds.push_back(j);
        if (!o.result.aborted) finals.push_back(o.result.final_coverage);
    }
    nlohmann::json summary{{"config", hash},
                           {"layout", spec.name},
                           {"variant", variant},
                           {"n_seeds", static_cast<int>(outcomes.size())},
                           {"completed", static_cast<int>(finals.size())},
                           {"seeds", seeds},
                           {"stats",
                            {{"median", median(finals)},
                             {"mean", mean_of(finals)},
                             {"std", std_of(finals)}}}};
    std::ofstream f(dir / "summary.json");
    f << summary.dump(2) << "\n";
}

struct MazeRunSummary {
    int completed = 0;
    int aborted = 0;
    double median_shaped = 0.0;
    double median_unshaped = 0.0;
    int shaped_wins = 0; // paired mode
};

/// Executes the configured maze experiment and writes per-seed CSV curves,
/// coverage-grid snapshots, a JSON summary per variant and (in paired mode) a
/// per-seed comparison table. Returns summary statistics for the caller.
inline MazeRunSummary cmd_run_maze(const ExperimentConfig& cfg, const std::string& out_dir,
                                   int jobs, std::ostream& log) {
    cfg.validate();
    const MazeSpec spec = resolve_layout(cfg);
    const std::filesystem::path root(out_dir);
    MazeRunSummary summary;

    std::vector<SeedOutcome> shaped, unshaped;
    if (cfg.mode == "shaped" || cfg.mode == "paired") {
        shaped = run_seeds(spec, cfg, true, jobs);
        write_variant_files(cfg.mode == "paired" ? root / "shaped" : root, spec, cfg, "shaped",
                            shaped);
    }
    if (cfg.mode == "unshaped" || cfg.mode == "paired") {
        unshaped = run_seeds(spec, cfg, false, jobs);
        write_variant_files(cfg.mode == "paired" ? root / "unshaped" : root, spec, cfg,
                            "unshaped", unshaped);
    }

    auto account = [&](const std::vector<SeedOutcome>& outcomes) {
        for (const SeedOutcome& o : outcomes) {
            if (o.result.aborted) {
                ++summary.aborted;
                log << "seed " << o.seed_index << " aborted: " << o.result.abort_message << "\n";
            } else {
                ++summary.completed;
            }
        }
    };
    account(shaped);
    account(unshaped);

    std::vector<double> fs, fu;
    for (const SeedOutcome& o : shaped)
        if (!o.result.aborted) fs.push_back(o.result.final_coverage);
    for (const SeedOutcome& o : unshaped)
        if (!o.result.aborted) fu.push_back(o.result.final_coverage);
    summary.median_shaped = median(fs);
    summary.median_unshaped = median(fu);

    if (cfg.mode == "paired") {
        std::filesystem::create_directories(root);
        std::ofstream f(root / "comparison.csv");
        f << "# bisim run-maze comparison layout=" << spec.name << " config=" << cfg.hash()
          << "\n";
        f << "seed_index,shaped,unshaped,delta\n";
        for (int i = 0; i < cfg.seeds; ++i) {
            const double a = shaped[i].result.aborted ? std::nan("") : shaped[i].result.final_coverage;
            const double b =
                unshaped[i].result.aborted ? std::nan("") : unshaped[i].result.final_coverage;
            if (!shaped[i].result.aborted && !unshaped[i].result.aborted && a > b)
                ++summary.shaped_wins;
            f << i << "," << fmt(a) << "," << fmt(b) << "," << fmt(a - b) << "\n";
        }
        const double uplift = summary.median_unshaped > 0.0
                                  ? (summary.median_shaped - summary.median_unshaped) /
                                        summary.median_unshaped
                                  : std::numeric_limits<double>::infinity();
        f << "# median_shaped=" << fmt(summary.median_shaped)
          << " median_unshaped=" << fmt(summary.median_unshaped)
          << " relative_uplift=" << fmt(uplift) << " shaped_wins=" << summary.shaped_wins << "/"
          << cfg.seeds << "\n";
    }
    log << "layout " << spec.name << ": median shaped " << fmt(summary.median_shaped)
        << ", median unshaped " << fmt(summary.median_unshaped) << ", completed "
        << summary.completed << ", aborted " << summary.aborted << "\n";
    return summary;
}

// ------------------------------------------------------------------
// metric command
// ------------------------------------------------------------------

inline Policy parse_policy_spec(const std::string& spec, const TabularMdp& mdp) {
    if (spec == "uniform") return Policy::uniform(mdp.n_states(), mdp.n_actions());
    std::ifstream is(spec);
    if (!is) throw parse_error("policy file '" + spec + "' not readable");
    std::vector<double> probs(static_cast<std::size_t>(mdp.n_states()) * mdp.n_actions());
    for (std::size_t i = 0; i < probs.size(); ++i)
        if (!(is >> probs[i]))
            throw parse_error("policy file '" + spec + "': truncated at entry " +
                              std::to_string(i));
    try {
        return Policy(mdp.n_states(), mdp.n_actions(), std::move(probs));
    } catch (const std::invalid_argument& e) {
        throw parse_error("policy file '" + spec + "': " + e.what());
    }
}

struct MetricCommand {
    std::string mdp_path;
    std::string policy = "uniform";
    std::string mode = "classic"; // classic | predictive
    double c_R = 1.0;
    double c_T = 0.5;
    double tol = 1e-10;
    int model_samples = 20000;
    std::uint64_t seed = 1;
    double sigma_min = 1e-4;
    double sigma_max = 1.0;
    int n_step = 3;
};

/// Converges the requested metric on an MDP fixture and writes the dense
/// table, its diameter, and (predictive mode) the fitted model summary.
inline void cmd_metric(const MetricCommand& cmd, std::ostream& out) {
    std::ifstream is(cmd.mdp_path);
    if (!is) throw parse_error("mdp fixture '" + cmd.mdp_path + "' not readable");
    const TabularMdp mdp = load_mdp(is);
    const Policy pi = parse_policy_spec(cmd.policy, mdp);

    OperatorConfig cfg{cmd.c_R, cmd.c_T,
                       cmd.mode == "predictive" ? OperatorMode::predictive
                                                : OperatorMode::classic};
    cfg.validate();

    std::optional<GaussianRewardModel> model;
    std::optional<EmpiricalTransitionModel> trans;
    if (cmd.mode == "predictive") {
        const std::vector<TransitionRecord> replay =
            simulate_replay(mdp, pi, cmd.model_samples, cmd.seed);
        model = fit_reward_model(mdp.n_states(), mdp.n_actions(),
                                 reward_samples_from_replay(replay, cmd.n_step, mdp.gamma()),
                                 cmd.sigma_min, cmd.sigma_max);
        trans = EmpiricalTransitionModel::fit(mdp.n_states(), mdp.n_actions(), replay);
    } else if (cmd.mode != "classic") {
        throw std::invalid_argument("metric mode must be classic or predictive");
    }

    MetricOperator op = [&](const MetricMatrix& d) {
        if (cfg.mode == OperatorMode::classic) return apply_classic_operator(mdp, pi, d, cfg);
        return apply_predictive_operator(mdp, pi, *model, *trans, d, cfg);
    };
    const FixedPointResult fp =
        fixed_point(op, MetricMatrix::zeros(mdp.n_states()), cmd.c_T, cmd.tol);
    const double diam = diameter(fp.metric);

    out << "# bisim metric mode=" << cmd.mode << " c_R=" << fmt(cmd.c_R)
        << " c_T=" << fmt(cmd.c_T) << " tol=" << fmt(cmd.tol) << "\n";
    out << "# states=" << mdp.n_states() << " iterations=" << fp.iterations
        << " residual=" << fmt(fp.residual) << "\n";
    out << "# diameter=" << fmt(diam) << "\n";
    if (diam <= 1e-9)
        out << "# warning: degenerate metric (zero diameter); reward differentials vanish\n";
    for (int i = 0; i < mdp.n_states(); ++i) {
        for (int j = 0; j < mdp.n_states(); ++j) out << (j ? " " : "") << fmt(fp.metric.at(i, j));
        out << "\n";
    }
    if (cmd.mode == "predictive") {
        out << "# model per-cell (state action): mu sigma count\n";
        for (int s = 0; s < mdp.n_states(); ++s)
            for (int a = 0; a < mdp.n_actions(); ++a) {
                const auto [mu, sigma] = model->predict(s, a);
                out << "model " << s << " " << a << ": " << fmt(mu) << " " << fmt(sigma) << " "
                    << model->count(s, a) << "\n";
            }
    }
}

/// Per-step bonus trace export: (t, r, Phi_t, F, r') rows from a shaped run.
inline void cmd_bonus_trace(const ExperimentConfig& cfg, std::ostream& out) {
    const MazeSpec spec = resolve_layout(cfg);
    const RunResult result = train(spec, cfg.agent_config(derive_seed(cfg.master_seed, 0)),
                                   cfg.shaping_config(), true);
    out << "# bisim bonus-trace layout=" << spec.name << " config=" << cfg.hash() << "\n";
    out << "t,r,phi,bonus,shaped_reward\n";
    for (const TraceRow& row : result.trace)
        out << row.t << "," << fmt(row.r) << "," << fmt(row.phi) << "," << fmt(row.bonus) << ","
            << fmt(row.shaped) << "\n";
}

} // namespace bisim::harness
