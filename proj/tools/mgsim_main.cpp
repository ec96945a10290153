// SPDX-License-Identifier: Apache-2.0
//
// mgsim: microgrid cooperation/storage trade-off simulator.
//
// Subcommands: analytic, simulate, sweep, fig4, fig5, fig6, selftest.
// Exit codes: 0 success, 1 validation error, 2 invariant violation or
// selftest failure, 3 unreachable cost target.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mgsim/experiments.hpp"
#include "mgsim/selftest.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed_override;
    bool paper_scale = false;
    bool trace = false;
    bool verbose = false;
    int jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool wants_config) {
    if (wants_config)
        cmd->add_option("--config", args.config_path, "experiment config (JSON)")->required();
    cmd->add_option("--seed", args.seed_override, "override the config/default seed");
    cmd->add_option("--out", args.out_dir, "output directory")->capture_default_str();
    cmd->add_flag("--paper-scale", args.paper_scale,
                  "full-scale study settings (100 snapshots, T=5000)");
    cmd->add_flag("--trace", args.trace, "write a slot-level trace.csv");
    cmd->add_option("--jobs", args.jobs, "parallel replications")->capture_default_str();
    cmd->add_flag("-v,--verbose", args.verbose, "print per-cell progress");
}

std::string emit(const mgsim::csv::Table& table, const CommonArgs& args,
                 const std::string& name) {
    fs::create_directories(args.out_dir);
    const auto path = (fs::path(args.out_dir) / name).string();
    table.write(path);
    std::cout << "wrote " << path << " (" << table.rows.size() << " rows)\n";
    return path;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cooperating-microgrid storage/cooperation trade-off simulator"};
    app.require_subcommand(1);

    CommonArgs analytic_args, simulate_args, sweep_args, fig4_args, fig5_args, fig6_args;

    // analytic
    auto* analytic = app.add_subcommand("analytic", "steady-state chain tables (no simulation)");
    mgsim::AnalyticOptions an;
    add_common(analytic, analytic_args, false);
    analytic->add_option("--a", an.a, "P(excess = +1)")->capture_default_str();
    analytic->add_option("--d", an.d, "P(excess = -1)")->capture_default_str();
    analytic->add_option("--q-max", an.q_max, "macro price bound")->capture_default_str();
    analytic->add_option("--p-max", an.p_max, "exchange price bound")->capture_default_str();
    analytic->add_option("--e-max", an.e_max_list, "battery sizes (units)")->capture_default_str();
    analytic->add_flag("--two-mg", an.two_mg, "two-MG alpha-sharing analysis");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "run the configured experiment");
    add_common(simulate, simulate_args, true);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "sweep one parameter from the config");
    add_common(sweep, sweep_args, true);

    // fig4
    auto* fig4 = app.add_subcommand("fig4", "cost vs storage: analytic and controlled");
    mgsim::Fig4Options f4;
    add_common(fig4, fig4_args, false);
    fig4->add_option("--horizon", f4.horizon, "slots per capacity point")->capture_default_str();
    fig4->add_option("--e-max", f4.e_max_units, "capacity grid (units)")->capture_default_str();

    // fig5
    auto* fig5 = app.add_subcommand("fig5", "normalized cost vs cooperating MGs");
    mgsim::Fig5Options f5;
    add_common(fig5, fig5_args, false);
    fig5->add_option("--snapshots", f5.snapshots, "grid snapshots per cell")->capture_default_str();
    fig5->add_option("--horizon", f5.horizon, "slots per run")->capture_default_str();
    fig5->add_option("--n", f5.n_list, "MG counts")->capture_default_str();

    // fig6
    auto* fig6 = app.add_subcommand("fig6", "storage needed to hit a cost target vs MGs");
    mgsim::Fig6Options f6;
    add_common(fig6, fig6_args, false);
    fig6->add_option("--target", f6.target_normalized_cost,
                     "normalized cost target (default: full load served by local exchange)")
        ->capture_default_str();
    fig6->add_option("--snapshots", f6.snapshots, "grid snapshots per probe")->capture_default_str();
    fig6->add_option("--horizon", f6.horizon, "slots per run")->capture_default_str();
    fig6->add_option("--n", f6.n_list, "MG counts")->capture_default_str();

    // selftest
    auto* selftest = app.add_subcommand("selftest", "run the oracle suite");
    std::uint64_t selftest_seed = 20140328;
    selftest->add_option("--seed", selftest_seed, "oracle stream seed")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (analytic->parsed()) {
            emit(mgsim::run_analytic(an), analytic_args, an.two_mg ? "analytic_two_mg.csv"
                                                                   : "analytic.csv");
            return 0;
        }
        if (simulate->parsed()) {
            auto cfg = mgsim::load_config(simulate_args.config_path);
            if (simulate_args.seed_override) cfg.seed = *simulate_args.seed_override;
            if (simulate_args.trace) cfg.write_trace = true;
            if (simulate_args.out_dir == "." && !cfg.out_dir.empty())
                simulate_args.out_dir = cfg.out_dir;
            const auto out = mgsim::run_simulate(cfg, simulate_args.jobs);
            emit(out.summary_csv, simulate_args, "summary.csv");
            if (out.trace_csv) emit(*out.trace_csv, simulate_args, "trace.csv");
            std::cout << "mean normalized cost " << mgsim::csv::fmt(out.summary.mean_normalized)
                      << " +/- " << mgsim::csv::fmt(out.summary.se_normalized) << "\n";
            return 0;
        }
        if (sweep->parsed()) {
            auto cfg = mgsim::load_config(sweep_args.config_path);
            if (sweep_args.seed_override) cfg.seed = *sweep_args.seed_override;
            if (sweep_args.out_dir == "." && !cfg.out_dir.empty())
                sweep_args.out_dir = cfg.out_dir;
            emit(mgsim::run_sweep(cfg, sweep_args.jobs), sweep_args, "sweep.csv");
            return 0;
        }
        if (fig4->parsed()) {
            if (fig4_args.seed_override) f4.seed = *fig4_args.seed_override;
            if (fig4_args.paper_scale) f4.horizon = 5000;
            emit(mgsim::run_fig4(f4), fig4_args, "fig4.csv");
            return 0;
        }
        if (fig5->parsed()) {
            if (fig5_args.seed_override) f5.seed = *fig5_args.seed_override;
            if (fig5_args.paper_scale) {
                f5.snapshots = 100;
                f5.horizon = 5000;
            }
            f5.jobs = fig5_args.jobs;
            if (fig5_args.verbose)
                f5.progress = [](const std::string& line) { std::cout << line << "\n"; };
            emit(mgsim::run_fig5(f5), fig5_args, "fig5.csv");
            return 0;
        }
        if (fig6->parsed()) {
            if (fig6_args.seed_override) f6.seed = *fig6_args.seed_override;
            if (fig6_args.paper_scale) {
                f6.snapshots = 100;
                f6.horizon = 5000;
            }
            f6.jobs = fig6_args.jobs;
            if (fig6_args.verbose)
                f6.progress = [](const std::string& line) { std::cout << line << "\n"; };
            const auto table = mgsim::run_fig6(f6);
            emit(table, fig6_args, "fig6.csv");
            for (const auto& row : table.rows)
                if (row.at(2) == "0") {
                    std::cerr << "target unreachable for n_mgs=" << row.at(0) << "\n";
                    return 3;
                }
            return 0;
        }
        if (selftest->parsed()) {
            return mgsim::run_selftest(selftest_seed).ok() ? 0 : 2;
        }
    } catch (const mgsim::InvariantFault& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 2;
    } catch (const mgsim::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
