// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "mgsim/experiments.hpp"

using namespace mgsim;
using Catch::Approx;

TEST_CASE("csv doubles survive a round trip at 12 significant digits", "[experiments]") {
    RandomStream rng(3);
    for (int k = 0; k < 1000; ++k) {
        const double v = (rng.uniform01() - 0.5) * std::pow(10.0, rng.uniform(-6.0, 6.0));
        const std::string s = csv::fmt(v);
        const double parsed = std::stod(s);
        CHECK(csv::fmt(parsed) == s);              // formatting is stable
        CHECK(parsed == Approx(v).epsilon(1e-11));  // 12 significant digits
    }
}

TEST_CASE("csv tables round trip through files", "[experiments]") {
    csv::Table t;
    t.header = {"x", "y", "label"};
    auto& r1 = t.add_row();
    r1 = {csv::fmt(1.5), csv::fmt(-2.25e-7), "alpha"};
    auto& r2 = t.add_row();
    r2 = {csv::fmt(3.0), csv::join({0.1, 0.2}), "beta"};
    const std::string path = "/tmp/mgsim_test_table.csv";
    t.write(path);
    const auto back = csv::Table::read(path);
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    std::remove(path.c_str());
}

TEST_CASE("analytic sweep is monotone non-increasing in capacity", "[experiments]") {
    AnalyticOptions opt;
    opt.e_max_list = {0, 1, 2, 3, 5, 8, 13, 21, 34, 50};
    const auto table = run_analytic(opt);
    REQUIRE(table.rows.size() == opt.e_max_list.size());
    double prev = 1e300;
    for (const auto& row : table.rows) {
        const double cost = std::stod(row.at(4));
        CHECK(cost <= prev + 1e-12);
        prev = cost;
    }
}

TEST_CASE("analytic two-MG table exposes the sharing extremes", "[experiments]") {
    AnalyticOptions opt;
    opt.two_mg = true;
    opt.p_max = 1.0;
    opt.q_max = 3.0;
    opt.e_max_list = {0};
    const auto table = run_analytic(opt);
    CHECK(table.rows.at(0).at(5) == "1");  // alpha* = 1 when p < q with no storage
}

TEST_CASE("fig4 columns agree at a modest horizon", "[experiments]") {
    Fig4Options opt;
    opt.e_max_units = {0, 3, 5, 10};
    opt.horizon = 20000;
    opt.seed = 7;
    const auto table = run_fig4(opt);
    REQUIRE(table.rows.size() == 4);
    for (const auto& row : table.rows) {
        const double analytic = std::stod(row.at(1));
        const double simulated = std::stod(row.at(2));
        CHECK(std::abs(simulated - analytic) / analytic < 0.10);
    }
    double prev = 1e300;
    for (const auto& row : table.rows) {
        const double simulated = std::stod(row.at(2));
        CHECK(simulated <= prev + 1e-12);
        prev = simulated;
    }
}

TEST_CASE("fig4 rejects capacities the unit-step chain cannot realize", "[experiments]") {
    Fig4Options opt;
    opt.e_max_units = {2};
    CHECK_THROWS_AS(run_fig4(opt), ValidationError);
}

TEST_CASE("experiment tables are byte-identical across reruns", "[experiments]") {
    Fig4Options f4;
    f4.e_max_units = {0, 3, 5};
    f4.horizon = 2000;
    f4.seed = 11;
    CHECK(run_fig4(f4).to_string() == run_fig4(f4).to_string());

    Fig5Options f5;
    f5.n_list = {1, 2};
    f5.capacities = {{2.0, 0.5}};
    f5.snapshots = 4;
    f5.horizon = 300;
    f5.seed = 11;
    f5.jobs = 2;
    CHECK(run_fig5(f5).to_string() == run_fig5(f5).to_string());
}

TEST_CASE("simulate emits summary rows and an optional trace", "[experiments]") {
    const char* body = R"({
      "seed": 5, "horizon_slots": 200, "replications": 3, "write_trace": true,
      "scenario": {"n_mgs": 2, "e_max_mwh": 4.0, "y_max_mw": 1.0, "b_s_max_mw": 1.0,
                   "arrival": {"type": "truncated_normal", "sigma_mw": 3.0}},
      "controller": {"type": "lyapunov"}
    })";
    const std::string path = "/tmp/mgsim_test_sim_cfg.json";
    {
        std::ofstream out(path);
        out << body;
    }
    const auto cfg = load_config(path);
    const auto out = run_simulate(cfg, 2);
    CHECK(out.summary_csv.rows.size() == 3);
    REQUIRE(out.trace_csv.has_value());
    CHECK(out.trace_csv->rows.size() == 200 * 2);
    // the digest column ties every row back to this config
    for (const auto& row : out.summary_csv.rows) CHECK(row.back() == cfg.digest);
    std::remove(path.c_str());
}

TEST_CASE("sweep can vary the trade-off weight", "[experiments]") {
    const char* body = R"({
      "seed": 5, "horizon_slots": 2000, "replications": 4,
      "scenario": {"n_mgs": 1, "e_max_mwh": 12.0, "y_max_mw": 1.0, "b_s_max_mw": 1.0,
                   "price_mode": "constant", "constant_q_per_mwh": 1.0,
                   "arrival": {"type": "discrete", "up_prob": 0.2, "down_prob": 0.5}},
      "controller": {"type": "lyapunov"},
      "sweep": {"parameter": "v", "values": [1.0, 5.0, 10.0]}
    })";
    const std::string path = "/tmp/mgsim_test_vsweep_cfg.json";
    {
        std::ofstream out(path);
        out << body;
    }
    const auto cfg = load_config(path);
    const auto table = run_sweep(cfg, 2);
    REQUIRE(table.rows.size() == 3);

    ExperimentConfig bad = cfg;
    CHECK_THROWS_AS(apply_sweep_value(bad, "unknown_knob", 1.0), ValidationError);
    std::remove(path.c_str());
}

TEST_CASE("sweep applies values to the declared parameter", "[experiments]") {
    const char* body = R"({
      "seed": 5, "horizon_slots": 300, "replications": 4,
      "scenario": {"n_mgs": 1, "e_max_mwh": 4.0, "y_max_mw": 1.0, "b_s_max_mw": 1.0,
                   "arrival": {"type": "discrete", "up_prob": 0.2, "down_prob": 0.5}},
      "controller": {"type": "lyapunov"},
      "sweep": {"parameter": "e_max_mwh", "values": [4.0, 8.0, 16.0]}
    })";
    const std::string path = "/tmp/mgsim_test_sweep_cfg.json";
    {
        std::ofstream out(path);
        out << body;
    }
    const auto cfg = load_config(path);
    const auto table = run_sweep(cfg, 2);
    REQUIRE(table.rows.size() == 3);
    CHECK(table.rows.at(0).at(0) == "e_max_mwh");
    CHECK(std::stod(table.rows.at(2).at(1)) == 16.0);
    CHECK(run_sweep(cfg, 1).to_string() == table.to_string());
    std::remove(path.c_str());
}
