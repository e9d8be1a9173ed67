// Command-line front end: theorem verification suites, maze coverage
// experiments, metric computation on MDP fixtures, layout inspection and
// fixture export.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "bisim/harness.hpp"

namespace {

bisim::harness::ExperimentConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return {};
    return bisim::harness::ExperimentConfig::load(path);
}

void write_or_print(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    const std::filesystem::path p(out_path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p);
    f << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"predictive bisimulation metrics and metric-shaped exploration"};
    app.require_subcommand(1);

    // ---- verify ----------------------------------------------------
    bisim::harness::VerifyRequest verify_req;
    std::string verify_out_dir;
    std::vector<std::string> suite_args;
    CLI::App* verify = app.add_subcommand(
        "verify", "run theorem-checking oracle suites (exit 0 iff all pass)");
    verify->add_option("suite", suite_args,
                       "suites: contraction diameter degeneracy value_bound invariance "
                       "gradients transport discrepancy, or 'all'");
    verify->add_option("--seeds", verify_req.seeds, "number of seeded instances (suite default)");
    verify->add_option("--seed", verify_req.master_seed, "master seed")->default_val(1);
    verify->add_option("--tol", verify_req.tol, "fixed-point tolerance")->default_val(1e-10);
    verify->add_option("--out-dir", verify_out_dir, "also write reports under this directory");

    // ---- run-maze --------------------------------------------------
    std::string rm_config_path, rm_out_dir = "runs";
    int rm_jobs = static_cast<int>(std::thread::hardware_concurrency());
    std::optional<std::string> rm_layout, rm_mode, rm_anchor;
    std::optional<int> rm_seeds;
    std::optional<long> rm_steps;
    std::optional<double> rm_eta, rm_tol;
    std::optional<std::uint64_t> rm_seed;
    CLI::App* run_maze =
        app.add_subcommand("run-maze", "train shaped/unshaped agents and export coverage data");
    run_maze->add_option("--config", rm_config_path, "JSON experiment config");
    run_maze->add_option("--layout", rm_layout, "built-in layout name or grid file");
    run_maze->add_option("--mode", rm_mode, "shaped | unshaped | paired");
    run_maze->add_option("--seeds", rm_seeds, "number of seeds");
    run_maze->add_option("--seed", rm_seed, "master seed");
    run_maze->add_option("--steps", rm_steps, "environment steps per run");
    run_maze->add_option("--eta", rm_eta, "intrinsic reward weight");
    run_maze->add_option("--tol", rm_tol, "solver tolerance");
    run_maze->add_option("--anchor", rm_anchor,
                         "anchor policy: batch_mean | fixed_initial_state | random_batch_element");
    run_maze->add_option("--out-dir", rm_out_dir, "output directory")->capture_default_str();
    run_maze->add_option("--jobs", rm_jobs, "parallel seed workers")->capture_default_str();

    // ---- metric ----------------------------------------------------
    bisim::harness::MetricCommand metric_cmd;
    std::string metric_out;
    CLI::App* metric = app.add_subcommand("metric", "converge a metric on an MDP fixture");
    metric->add_option("--mdp", metric_cmd.mdp_path, "MDP fixture file")->required();
    metric->add_option("--policy", metric_cmd.policy, "'uniform' or a policy file")
        ->capture_default_str();
    metric->add_option("--mode", metric_cmd.mode, "classic | predictive")->capture_default_str();
    metric->add_option("--c-r", metric_cmd.c_R, "reward coefficient")->capture_default_str();
    metric->add_option("--c-t", metric_cmd.c_T, "transition coefficient")->capture_default_str();
    metric->add_option("--tol", metric_cmd.tol, "fixed-point tolerance")->capture_default_str();
    metric->add_option("--samples", metric_cmd.model_samples,
                       "replay steps for predictive model fitting")
        ->capture_default_str();
    metric->add_option("--seed", metric_cmd.seed, "replay seed")->capture_default_str();
    metric->add_option("--sigma-min", metric_cmd.sigma_min, "variance floor")
        ->capture_default_str();
    metric->add_option("--sigma-max", metric_cmd.sigma_max, "variance cap")->capture_default_str();
    metric->add_option("--out", metric_out, "output file (stdout when omitted)");

    // ---- layouts ---------------------------------------------------
    std::string layouts_name, layouts_out;
    CLI::App* layouts_cmd = app.add_subcommand("layouts", "list or dump built-in maze layouts");
    layouts_cmd->add_option("--name", layouts_name, "dump this layout's grid");
    layouts_cmd->add_option("--out", layouts_out, "write the dump to a file");

    // ---- export ----------------------------------------------------
    CLI::App* exp = app.add_subcommand("export", "export fixtures and traces");
    exp->require_subcommand(1);

    std::uint64_t em_seed = 1;
    int em_states = 5, em_actions = 2;
    double em_sparsity = 0.0, em_gamma = 0.9;
    std::string em_out;
    CLI::App* exp_mdp = exp->add_subcommand("mdp", "write a seeded random MDP fixture");
    exp_mdp->add_option("--seed", em_seed)->capture_default_str();
    exp_mdp->add_option("--states", em_states)->capture_default_str();
    exp_mdp->add_option("--actions", em_actions)->capture_default_str();
    exp_mdp->add_option("--sparsity", em_sparsity, "fraction of zero-reward cells")
        ->capture_default_str();
    exp_mdp->add_option("--gamma", em_gamma)->capture_default_str();
    exp_mdp->add_option("--out", em_out, "output file (stdout when omitted)");

    std::string el_name = "square_bottleneck", el_out;
    CLI::App* exp_layout = exp->add_subcommand("layout", "write a built-in layout grid");
    exp_layout->add_option("--name", el_name)->capture_default_str();
    exp_layout->add_option("--out", el_out, "output file (stdout when omitted)");

    std::string bt_config_path, bt_out;
    std::optional<std::string> bt_layout;
    std::optional<long> bt_steps;
    std::optional<double> bt_eta;
    std::optional<std::uint64_t> bt_seed;
    CLI::App* exp_trace =
        exp->add_subcommand("bonus-trace", "per-step (t, r, Phi, F, r') rows from a shaped run");
    exp_trace->add_option("--config", bt_config_path, "JSON experiment config");
    exp_trace->add_option("--layout", bt_layout);
    exp_trace->add_option("--steps", bt_steps);
    exp_trace->add_option("--eta", bt_eta);
    exp_trace->add_option("--seed", bt_seed);
    exp_trace->add_option("--out", bt_out, "output file (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*verify) {
            verify_req.suites = suite_args;
            const bool ok = bisim::harness::run_verify(verify_req, std::cout, verify_out_dir);
            return ok ? 0 : 1;
        }
        if (*run_maze) {
            bisim::harness::ExperimentConfig cfg = load_config_or_default(rm_config_path);
            if (rm_layout) cfg.layout = *rm_layout;
            if (rm_mode) cfg.mode = *rm_mode;
            if (rm_seeds) cfg.seeds = *rm_seeds;
            if (rm_seed) cfg.master_seed = *rm_seed;
            if (rm_steps) cfg.steps = *rm_steps;
            if (rm_eta) cfg.eta = *rm_eta;
            if (rm_tol) cfg.tol = *rm_tol;
            if (rm_anchor) cfg.anchor_policy = *rm_anchor;
            const bisim::harness::MazeRunSummary summary =
                bisim::harness::cmd_run_maze(cfg, rm_out_dir, rm_jobs, std::cout);
            return summary.aborted == 0 ? 0 : 1;
        }
        if (*metric) {
            std::ostringstream os;
            bisim::harness::cmd_metric(metric_cmd, os);
            write_or_print(metric_out, os.str());
            return 0;
        }
        if (*layouts_cmd) {
            if (layouts_name.empty()) {
                std::printf("%-20s %5s %5s %10s %10s %8s\n", "name", "rows", "cols", "cell_size",
                            "free_bins", "a_max");
                for (const bisim::MazeSpec& spec : bisim::builtin_layouts())
                    std::printf("%-20s %5d %5d %10g %10d %8g\n", spec.name.c_str(), spec.rows,
                                spec.cols, spec.cell_size, spec.free_cell_count(), spec.a_max());
            } else {
                write_or_print(layouts_out,
                               bisim::render_layout(bisim::layout_by_name(layouts_name)));
            }
            return 0;
        }
        if (*exp_mdp) {
            const bisim::TabularMdp mdp =
                bisim::random_mdp(em_seed, em_states, em_actions, em_sparsity, em_gamma);
            std::ostringstream os;
            bisim::save_mdp(mdp, os);
            write_or_print(em_out, os.str());
            return 0;
        }
        if (*exp_layout) {
            write_or_print(el_out, bisim::render_layout(bisim::layout_by_name(el_name)));
            return 0;
        }
        if (*exp_trace) {
            bisim::harness::ExperimentConfig cfg = load_config_or_default(bt_config_path);
            cfg.mode = "shaped";
            if (bt_layout) cfg.layout = *bt_layout;
            if (bt_steps) cfg.steps = *bt_steps;
            if (bt_eta) cfg.eta = *bt_eta;
            if (bt_seed) cfg.master_seed = *bt_seed;
            std::ostringstream os;
            bisim::harness::cmd_bonus_trace(cfg, os);
            write_or_print(bt_out, os.str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
