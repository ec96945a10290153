// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mgsim/analytics.hpp"
#include "mgsim/sim.hpp"

using namespace mgsim;
using Catch::Approx;

namespace {

ScenarioConfig single_mg_discrete(double a, double d, double e_max, double unit_caps,
                                  double q = 1.0) {
    ScenarioConfig cfg;
    cfg.n_mgs = 1;
    cfg.price_mode = ScenarioConfig::PriceMode::Constant;
    cfg.constant_p_per_mwh = q;
    cfg.constant_q_per_mwh = q;
    cfg.e_max_mwh = e_max;
    cfg.y_max_mw = unit_caps;
    cfg.b_s_max_mw = unit_caps;
    cfg.b_ex_max_mw = 0.0;
    cfg.arrival.dist = DiscreteArrival{ExcessPmf::simple(a, d), 1.0};
    return cfg;
}

}  // namespace

TEST_CASE("degenerate arrivals cost nothing and never move the battery", "[sim]") {
    ScenarioConfig cfg = single_mg_discrete(0.0, 0.0, 5.0, 1.0);
    cfg.arrival.dist = DiscreteArrival{ExcessPmf(0, {1.0}), 1.0};
    RandomStream geom(derive_seed(5, {1}));
    const auto s = build_scenario(cfg, geom);
    SimOptions opt;
    opt.horizon_slots = 1000;
    const auto report = run_simulation(s, Controller::make_no_coop(), opt,
                                       substream(5, {2}), substream(5, {3}));
    CHECK(report.total_cost == 0.0);
    CHECK(report.battery_min[0] == 0.0);
    CHECK(report.battery_max[0] == 0.0);
}

TEST_CASE("greedy single MG reproduces the analytic steady cost", "[sim]") {
    // greedy store/discharge with unit caps is exactly the clipped walk
    ScenarioConfig cfg = single_mg_discrete(0.2, 0.5, 10.0, 1.0);
    RandomStream geom(derive_seed(6, {1}));
    const auto s = build_scenario(cfg, geom);
    SimOptions opt;
    opt.horizon_slots = 1000000;
    opt.invariant_check_stride = 97;
    const auto report = run_simulation(s, Controller::make_no_coop(), opt,
                                       substream(6, {2}), substream(6, {3}));
    const double analytic = single_mg_cost_closed(0.2, 0.5, 10, 1.0);
    CHECK(report.time_avg_cost == Approx(analytic).epsilon(0.02));
}

TEST_CASE("alpha policy simulation matches the two-MG analytic cost", "[sim]") {
    ScenarioConfig cfg;
    cfg.n_mgs = 2;
    cfg.price_mode = ScenarioConfig::PriceMode::Constant;
    cfg.constant_p_per_mwh = 1.0;
    cfg.constant_q_per_mwh = 3.0;
    cfg.e_max_mwh = 5.0;
    cfg.y_max_mw = 1.0;
    cfg.b_s_max_mw = 1.0;
    cfg.b_ex_max_mw = 10.0;
    cfg.arrival.dist = DiscreteArrival{ExcessPmf::simple(0.2, 0.5), 1.0};
    RandomStream geom(derive_seed(7, {1}));
    const auto s = build_scenario(cfg, geom);
    SimOptions opt;
    opt.horizon_slots = 400000;
    opt.invariant_check_stride = 101;
    const auto report = run_simulation(s, Controller::make_alpha(0.5), opt,
                                       substream(7, {2}), substream(7, {3}));
    TwoMgPolicy pol{0.5, 0.2, 0.5, 5, 1.0, 3.0};
    CHECK(report.time_avg_cost == Approx(two_mg_cost(pol)).epsilon(0.02));
}

TEST_CASE("one replication equals one simulation", "[sim]") {
    ScenarioConfig cfg = single_mg_discrete(0.2, 0.5, 5.0, 1.0);
    SimOptions opt;
    opt.horizon_slots = 5000;
    const auto summary = run_replications(cfg, ControllerChoice{ControllerKind::NoCoop, {}, 0.0},
                                          opt, 11, 1);
    RandomStream geom = substream(11, {streams::kGeometry, 0});
    const auto s = build_scenario(cfg, geom);
    const auto direct = run_simulation(s, Controller::make_no_coop(), opt,
                                       substream(11, {streams::kArrivals, 0}),
                                       substream(11, {streams::kPolicy, 0}));
    CHECK(summary.reports.size() == 1);
    CHECK(summary.mean_normalized == direct.normalized_cost);
    CHECK(summary.se_normalized == 0.0);
}

TEST_CASE("replication standard error shrinks like sqrt(K)", "[sim]") {
    ScenarioConfig cfg;
    cfg.n_mgs = 2;
    cfg.e_max_mwh = 5.0;
    cfg.y_max_mw = 1.0;
    cfg.b_s_max_mw = 1.0;
    cfg.arrival.dist = TruncatedNormalArrival{3.0, -10.0, 10.0, 0.0};
    SimOptions opt;
    opt.horizon_slots = 300;
    const ControllerChoice lyap{ControllerKind::Lyapunov, {}, 0.0};
    const auto small = run_replications(cfg, lyap, opt, 13, 25, 2);
    const auto large = run_replications(cfg, lyap, opt, 13, 100, 2);
    CHECK(large.se_normalized < small.se_normalized);
    const double ratio = large.se_normalized / small.se_normalized;
    CHECK(ratio > 0.25);
    CHECK(ratio < 0.8);  // ideal is 0.5
}

TEST_CASE("results are reproducible and independent of the thread count", "[sim]") {
    ScenarioConfig cfg;
    cfg.n_mgs = 3;
    cfg.e_max_mwh = 6.0;
    cfg.y_max_mw = 1.0;
    cfg.b_s_max_mw = 1.0;
    cfg.arrival.dist = TruncatedNormalArrival{3.0, -10.0, 10.0, 0.0};
    SimOptions opt;
    opt.horizon_slots = 500;
    const ControllerChoice lyap{ControllerKind::Lyapunov, {}, 0.0};
    const auto a = run_replications(cfg, lyap, opt, 17, 8, 1);
    const auto b = run_replications(cfg, lyap, opt, 17, 8, 4);
    REQUIRE(a.reports.size() == b.reports.size());
    CHECK(a.mean_normalized == b.mean_normalized);
    for (std::size_t k = 0; k < a.reports.size(); ++k)
        CHECK(a.reports[k].total_cost == b.reports[k].total_cost);
}

TEST_CASE("drift bound holds on an idle trace", "[sim]") {
    SimTrace trace;
    trace.n = 2;
    trace.theta = 3.0;
    trace.y_max = 1.0;
    trace.b_s_max = 1.0;
    SlotRecord rec;
    rec.energy_before = {1.0, 2.0};
    rec.excess = rec.deficit = rec.charge = rec.discharge = {0.0, 0.0};
    rec.received = rec.sent = rec.macro = rec.cost = {0.0, 0.0};
    trace.slots = {rec, rec};
    trace.final_energy = {1.0, 2.0};
    const auto res = check_drift_bound(trace);
    CHECK(res.pass);
    CHECK(res.worst_slack == Approx(2.0));  // N C / 2 with C = 2
}

TEST_CASE("drift bound holds on a controlled trace with positive slack", "[sim]") {
    ScenarioConfig cfg;
    cfg.n_mgs = 2;
    cfg.e_max_mwh = 8.0;
    cfg.y_max_mw = 1.5;
    cfg.b_s_max_mw = 1.5;
    cfg.arrival.dist = TruncatedNormalArrival{3.0, -10.0, 10.0, 0.0};
    RandomStream geom = substream(19, {streams::kGeometry, 0});
    const auto s = build_scenario(cfg, geom);
    SimOptions opt;
    opt.horizon_slots = 10000;
    SimTrace trace;
    (void)run_simulation(s, Controller::make_lyapunov(s), opt,
                         substream(19, {streams::kArrivals, 0}),
                         substream(19, {streams::kPolicy, 0}), &trace);
    const auto res = check_drift_bound(trace);
    CHECK(res.pass);
    CHECK(res.worst_slack > 0.0);
}

TEST_CASE("a tampered trace fails the drift check", "[sim]") {
    SimTrace trace;
    trace.n = 1;
    trace.theta = 2.0;
    trace.y_max = 1.0;
    trace.b_s_max = 1.0;
    SlotRecord rec;
    rec.energy_before = {0.0};
    rec.excess = rec.deficit = rec.charge = rec.discharge = {0.0};
    rec.received = rec.sent = rec.macro = rec.cost = {0.0};
    trace.slots = {rec};
    trace.final_energy = {5.0};  // battery jumped without a recorded charge
    CHECK_FALSE(check_drift_bound(trace).pass);
}

TEST_CASE("cost decreases with V for the single-MG chain", "[sim]") {
    ScenarioConfig cfg = single_mg_discrete(0.2, 0.5, 12.0, 1.0);
    SimOptions opt;
    opt.horizon_slots = 20000;
    ControllerChoice big_v{ControllerKind::Lyapunov, {}, 0.0};  // defaults to max_v
    ControllerChoice small_v{ControllerKind::Lyapunov, 1.0, 0.0};  // max_v / 10
    const auto big = run_replications(cfg, big_v, opt, 23, 30, 2);
    const auto small = run_replications(cfg, small_v, opt, 23, 30, 2);
    const double pooled = std::sqrt(big.se_normalized * big.se_normalized +
                                    small.se_normalized * small.se_normalized);
    CHECK(big.mean_normalized <= small.mean_normalized + 3.0 * pooled);
}

TEST_CASE("storage search returns the smallest probe under a trivial target", "[sim]") {
    ScenarioConfig cfg;
    cfg.n_mgs = 1;
    cfg.price_mode = ScenarioConfig::PriceMode::Constant;
    cfg.constant_q_per_mwh = 3.0;
    cfg.arrival.dist = TruncatedNormalArrival{3.0, -10.0, 10.0, 0.0};
    SimOptions opt;
    opt.horizon_slots = 500;
    StorageSearchOptions search;
    search.max_e_mwh = 32.0;
    search.jobs = 2;
    const auto res = storage_requirement_search(cfg, ControllerChoice{ControllerKind::Lyapunov, {}, 0.0},
                                                opt, 29, 5, 1e9, search);
    REQUIRE(res.reachable);
    CHECK(res.e_max_mwh == 0.0);
}

TEST_CASE("storage search reports an unreachable target", "[sim]") {
    ScenarioConfig cfg;
    cfg.n_mgs = 1;
    cfg.price_mode = ScenarioConfig::PriceMode::Constant;
    cfg.constant_q_per_mwh = 3.0;
    cfg.arrival.dist = TruncatedNormalArrival{3.0, -10.0, 10.0, 0.0};
    SimOptions opt;
    opt.horizon_slots = 500;
    StorageSearchOptions search;
    search.max_e_mwh = 16.0;
    search.max_k_doublings = 0;
    search.jobs = 2;
    const auto res = storage_requirement_search(cfg, ControllerChoice{ControllerKind::Lyapunov, {}, 0.0},
                                                opt, 31, 5, 0.0, search);
    CHECK_FALSE(res.reachable);
    CHECK(res.probes.size() >= 2);
}

TEST_CASE("burn-in discards the configured prefix from accounting", "[sim]") {
    ScenarioConfig cfg = single_mg_discrete(0.2, 0.5, 5.0, 1.0);
    RandomStream geom = substream(37, {streams::kGeometry, 0});
    const auto s = build_scenario(cfg, geom);
    SimOptions opt;
    opt.horizon_slots = 1000;
    opt.burn_in_fraction = 0.1;
    const auto report = run_simulation(s, Controller::make_no_coop(), opt,
                                       substream(37, {streams::kArrivals, 0}),
                                       substream(37, {streams::kPolicy, 0}));
    CHECK(report.burn_in_slots == 100);
    CHECK(report.time_avg_cost == Approx(report.total_cost / 900.0));
    CHECK(report.normalized_cost == Approx(report.time_avg_cost));
}
