// SPDX-License-Identifier: Apache-2.0
#pragma once

// Release-gate oracle suite behind `mgsim selftest`: closed forms against
// numeric solves, the LP against brute force, invariant-checked control runs,
// and a deliberate-fault run that proves the invariant monitors actually
// trip. Prints one line per check.

#include <cmath>
#include <cstdio>
#include <string>

#include "mgsim/analytics.hpp"
#include "mgsim/controllers.hpp"
#include "mgsim/oracles.hpp"
#include "mgsim/scenario.hpp"
#include "mgsim/sim.hpp"

namespace mgsim {

struct SelftestResult {
    int passed = 0;
    int failed = 0;
    bool ok() const { return failed == 0; }
};

namespace selftest_detail {

inline void report(SelftestResult& res, const std::string& name, bool pass,
                   const std::string& detail = "") {
    std::printf("[%s] %-52s %s\n", pass ? " ok " : "FAIL", name.c_str(), detail.c_str());
    (pass ? res.passed : res.failed) += 1;
}

}  // namespace selftest_detail

inline SelftestResult run_selftest(std::uint64_t seed = 20140328) {
    using selftest_detail::report;
    SelftestResult res;

    // closed-form stationary distribution vs dense linear solve
    {
        double worst = 0.0;
        for (double a : {0.1, 0.2, 0.3, 0.5})
            for (double d : {0.1, 0.2, 0.3, 0.5}) {
                if (a == d) continue;
                for (int e : {1, 2, 5, 10, 50}) {
                    const auto closed = birth_death_closed_form(a, d, e);
                    const auto numeric =
                        stationary_distribution(build_transition_matrix(ExcessPmf::simple(a, d), e));
                    for (std::size_t i = 0; i < closed.size(); ++i)
                        worst = std::max(worst, std::abs(closed[i] - numeric[i]));
                }
            }
        report(res, "closed-form pi vs linear solve", worst <= 1e-10,
               "max |err| = " + csv::fmt(worst));
    }

    // Monte Carlo walk vs the analytic borrowing cost
    {
        RandomStream rng = substream(seed, {1});
        const double mc = oracles::mc_single_mg_cost(ExcessPmf::simple(0.2, 0.5), 2, 1.0, 400000, rng);
        const double exact = single_mg_cost_closed(0.2, 0.5, 2, 1.0);
        const double rel = std::abs(mc - exact) / exact;
        report(res, "Monte Carlo walk vs analytic cost", rel < 0.05,
               "rel err = " + csv::fmt(rel));
    }

    // slot LP vs brute-force enumeration
    {
        RandomStream rng = substream(seed, {2});
        bool pass = true;
        std::string detail;
        for (int k = 0; k < 200 && pass; ++k) {
            const auto problem = oracles::random_slot_problem(rng);
            const auto fast = solve_slot(problem);
            const auto slow = brute_force_slot(problem, 0.01);
            const double bound = oracles::brute_force_gap_bound(problem, 0.01);
            if (fast.objective > slow.objective + 1e-9 ||
                slow.objective > fast.objective + bound + 1e-9 ||
                oracles::slot_problem_violation(problem, fast.decision) > kEnergyTol) {
                pass = false;
                detail = "instance " + std::to_string(k);
            }
        }
        report(res, "slot LP vs brute force (200 instances)", pass, detail);
    }

    // battery dynamics replay: recompute the trajectory from the trace
    {
        ScenarioConfig cfg;
        cfg.n_mgs = 1;
        cfg.price_mode = ScenarioConfig::PriceMode::Constant;
        cfg.constant_q_per_mwh = 1.0;
        cfg.e_max_mwh = 5.0;
        cfg.y_max_mw = 1.0;
        cfg.b_s_max_mw = 1.0;
        cfg.b_ex_max_mw = 0.0;
        cfg.arrival.dist = DiscreteArrival{ExcessPmf::simple(0.2, 0.5), 1.0};
        RandomStream geom = substream(seed, {3, 0});
        const auto s = build_scenario(cfg, geom);
        SimOptions opt;
        opt.horizon_slots = 20000;
        SimTrace trace;
        (void)run_simulation(s, Controller::make_no_coop(), opt, substream(seed, {3, 1}),
                             substream(seed, {3, 2}), &trace);
        double worst = 0.0;
        double e = trace.slots.front().energy_before.front();
        for (std::size_t t = 0; t < trace.slots.size(); ++t) {
            worst = std::max(worst, std::abs(e - trace.slots[t].energy_before[0]));
            e = e - trace.slots[t].discharge[0] + trace.slots[t].charge[0];
        }
        worst = std::max(worst, std::abs(e - trace.final_energy[0]));
        report(res, "battery trajectory replay", worst <= 1e-9, "max |err| = " + csv::fmt(worst));
    }

    // Lyapunov runs with always-on invariant checks, plus the drift bound
    {
        bool pass = true;
        std::string detail;
        try {
            for (int c = 0; c < 5; ++c) {
                RandomStream pick = substream(seed, {4, static_cast<std::uint64_t>(c)});
                ScenarioConfig cfg;
                cfg.n_mgs = 1 + static_cast<int>(pick.uniform01() * 3);
                cfg.e_max_mwh = pick.uniform(3.0, 30.0);
                cfg.y_max_mw = pick.uniform(0.3, cfg.e_max_mwh / 3.0);
                cfg.b_s_max_mw = pick.uniform(0.3, cfg.e_max_mwh / 3.0);
                cfg.arrival.dist = TruncatedNormalArrival{pick.uniform(1.0, 4.0), -10.0, 10.0, 0.0};
                SimOptions opt;
                opt.horizon_slots = 20000;
                opt.record_trace = c == 0;
                SimTrace trace;
                RandomStream geom = substream(seed, {5, static_cast<std::uint64_t>(c)});
                const auto s = build_scenario(cfg, geom);
                const auto report_ = run_simulation(
                    s, Controller::make_lyapunov(s), opt, substream(seed, {6, static_cast<std::uint64_t>(c)}),
                    substream(seed, {7, static_cast<std::uint64_t>(c)}), c == 0 ? &trace : nullptr);
                (void)report_;
                if (c == 0) {
                    const auto drift = check_drift_bound(trace);
                    if (!drift.pass) {
                        pass = false;
                        detail = "drift bound violated";
                    }
                }
            }
        } catch (const std::exception& e) {
            pass = false;
            detail = e.what();
        }
        report(res, "Lyapunov invariants over 5 random configs", pass, detail);
    }

    // alpha-policy transfer statistics
    {
        RandomStream rng = substream(seed, {8});
        const auto stats = oracles::simulate_two_mg_alpha(0.2, 0.5, 0.5, 5, 1.0, 3.0, 200000, rng);
        const double rate = stats.exchange_events / stats.opposite_sign_slots;
        const double se = std::sqrt(0.25 / (stats.opposite_sign_slots * 200000));
        report(res, "alpha-policy transfer rate", std::abs(rate - 0.5) < 3.0 * se + 0.01,
               "rate = " + csv::fmt(rate));
    }

    // deliberate fault: an oversized theta must trip the charge guard
    {
        ScenarioConfig cfg;
        cfg.n_mgs = 1;
        cfg.price_mode = ScenarioConfig::PriceMode::Constant;
        cfg.constant_q_per_mwh = 1.0;
        cfg.e_max_mwh = 5.0;
        cfg.y_max_mw = 1.0;
        cfg.b_s_max_mw = 1.0;
        cfg.arrival.dist = DiscreteArrival{ExcessPmf::simple(0.5, 0.2), 1.0};
        RandomStream geom = substream(seed, {9, 0});
        const auto s = build_scenario(cfg, geom);
        Controller broken;
        broken.type = Controller::Type::Lyapunov;
        broken.lyapunov = LyapunovParams::unchecked(max_v(s), 2.0 * (s.e_max_mwh - s.y_max_mwh));
        SimOptions opt;
        opt.horizon_slots = 5000;
        bool tripped = false;
        try {
            (void)run_simulation(s, broken, opt, substream(seed, {9, 1}), substream(seed, {9, 2}));
        } catch (const InvariantFault&) {
            tripped = true;
        }
        report(res, "fault injection: wrong theta is caught", tripped);
    }

    std::printf("selftest: %d passed, %d failed\n", res.passed, res.failed);
    return res;
}

}  // namespace mgsim
