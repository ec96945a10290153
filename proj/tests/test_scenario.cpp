// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mgsim/scenario.hpp"

using namespace mgsim;
using Catch::Approx;

namespace {

std::string write_temp_config(const std::string& name, const std::string& body) {
    const std::string path = "/tmp/mgsim_test_" + name + ".json";
    std::ofstream out(path);
    out << body;
    return path;
}

const char* kBaseConfig = R"({
  "seed": 42,
  "horizon_slots": 100,
  "replications": 2,
  "scenario": {
    "n_mgs": 3,
    "e_max_mwh": 2.0,
    "y_max_mw": 0.5,
    "b_s_max_mw": 0.5,
    "b_ex_max_mw": 10.0,
    "arrival": { "type": "truncated_normal", "sigma_mw": 3.0 }
  },
  "controller": { "type": "lyapunov" }
})";

}  // namespace

TEST_CASE("snapshot geometry lands inside the farm", "[scenario]") {
    RandomStream rng(1);
    const auto pos = sample_snapshot(rng, 50, 10.0);
    for (const auto& p : pos) {
        CHECK(p[0] >= 0.0);
        CHECK(p[0] <= 10.0);
        CHECK(p[1] >= 0.0);
        CHECK(p[1] <= 10.0);
    }
}

TEST_CASE("distance to the macro-grid from the corner", "[scenario]") {
    // an MG pinned at the origin with the macro at (20, 20)
    const std::vector<std::array<double, 2>> pos{{0.0, 0.0}};
    const auto prices = distance_prices(1.0, pos, {20.0, 20.0});
    CHECK(prices.macro[0] == Approx(20.0 * std::sqrt(2.0)));
}

TEST_CASE("distance prices are symmetric with a zero diagonal", "[scenario]") {
    RandomStream rng(2);
    const auto pos = sample_snapshot(rng, 6, 10.0);
    const auto prices = distance_prices(1.0, pos, {20.0, 20.0});
    for (int i = 0; i < 6; ++i) {
        CHECK(prices.exchange[static_cast<std::size_t>(i) * 6 + i] == 0.0);
        for (int j = 0; j < 6; ++j) {
            CHECK(prices.exchange[static_cast<std::size_t>(i) * 6 + j] ==
                  Approx(prices.exchange[static_cast<std::size_t>(j) * 6 + i]));
            CHECK(prices.exchange[static_cast<std::size_t>(i) * 6 + j] >= 0.0);
        }
    }
    CHECK(prices.q_max <= 1.0 * std::hypot(20.0, 20.0));
}

TEST_CASE("beta scales pairwise prices", "[scenario]") {
    const std::vector<std::array<double, 2>> pos{{0.0, 0.0}, {3.0, 0.0}};
    const auto prices = distance_prices(1.0, pos, {20.0, 20.0});
    CHECK(prices.exchange[1] == Approx(3.0));
    const auto scaled = distance_prices(2.5, pos, {20.0, 20.0});
    CHECK(scaled.exchange[1] == Approx(7.5));
}

TEST_CASE("constant prices mirror the storage-study setup", "[scenario]") {
    const auto prices = constant_prices(3, 1.0, 3.0);
    CHECK(prices.exchange[1] == 1.0);
    CHECK(prices.macro[0] == 3.0);
    CHECK(prices.p_max == 1.0);
    CHECK(prices.q_max == 3.0);
}

TEST_CASE("identical seeds give identical scenarios and arrivals", "[scenario]") {
    ScenarioConfig cfg;
    cfg.n_mgs = 4;
    cfg.e_max_mwh = 5.0;
    cfg.y_max_mw = 1.0;
    cfg.b_s_max_mw = 1.0;
    RandomStream g1(derive_seed(99, {1}));
    RandomStream g2(derive_seed(99, {1}));
    const auto s1 = build_scenario(cfg, g1);
    const auto s2 = build_scenario(cfg, g2);
    CHECK(s1.positions_km == s2.positions_km);
    CHECK(s1.exchange_price == s2.exchange_price);

    RandomStream a1(derive_seed(99, {2}));
    RandomStream a2(derive_seed(99, {2}));
    for (int t = 0; t < 100; ++t)
        CHECK(sample_excess(a1, cfg.arrival, 4) == sample_excess(a2, cfg.arrival, 4));
}

TEST_CASE("truncated normal samples respect the bounds and center", "[scenario]") {
    ArrivalSpec spec;
    spec.dist = TruncatedNormalArrival{3.0, -10.0, 10.0, 0.0};
    RandomStream rng(7);
    double sum = 0.0;
    const int n_draws = 200000;
    for (int k = 0; k < n_draws; ++k) {
        const auto x = sample_excess(rng, spec, 1);
        REQUIRE(x[0] >= -10.0);
        REQUIRE(x[0] <= 10.0);
        sum += x[0];
    }
    const double mean = sum / n_draws;
    const double se = 3.0 / std::sqrt(static_cast<double>(n_draws));
    CHECK(std::abs(mean) < 3.0 * se);
}

TEST_CASE("discrete arrival frequencies match the pmf", "[scenario]") {
    ArrivalSpec spec;
    spec.dist = DiscreteArrival{ExcessPmf(1, {0.5, 0.3, 0.2}), 1.0};
    RandomStream rng(8);
    int counts[3] = {0, 0, 0};
    const int n_draws = 100000;
    for (int k = 0; k < n_draws; ++k) {
        const auto x = sample_excess(rng, spec, 1);
        counts[static_cast<int>(x[0]) + 1] += 1;
    }
    const double expect[3] = {0.5, 0.3, 0.2};
    for (int i = 0; i < 3; ++i) {
        const double freq = static_cast<double>(counts[i]) / n_draws;
        const double se = std::sqrt(expect[i] * (1.0 - expect[i]) / n_draws);
        CHECK(std::abs(freq - expect[i]) < 3.0 * se);
    }
}

TEST_CASE("empty truncation support is rejected", "[scenario]") {
    ArrivalSpec spec;
    spec.dist = TruncatedNormalArrival{3.0, 0.0, 0.0, 0.0};
    CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("shared-weight arrivals stay comonotone", "[scenario]") {
    ArrivalSpec spec;
    spec.dist = TruncatedNormalArrival{3.0, -10.0, 10.0, 1.0};
    RandomStream rng(9);
    for (int k = 0; k < 100; ++k) {
        const auto x = sample_excess(rng, spec, 5);
        for (int i = 1; i < 5; ++i) CHECK(x[static_cast<std::size_t>(i)] == x[0]);
    }
}

TEST_CASE("config with the first capacity row is accepted", "[scenario]") {
    const auto path = write_temp_config("ok", kBaseConfig);
    const auto cfg = load_config(path);
    CHECK(cfg.scenario.e_max_mwh == 2.0);
    CHECK(cfg.seed == 42);
    CHECK_FALSE(cfg.digest.empty());
    std::remove(path.c_str());
}

TEST_CASE("config violating the capacity assumption is rejected", "[scenario]") {
    const auto path = write_temp_config("badc", R"({
      "seed": 1, "horizon_slots": 10,
      "scenario": {"n_mgs": 1, "e_max_mwh": 1.0, "y_max_mw": 1.0, "b_s_max_mw": 1.0,
                   "arrival": {"type": "discrete", "up_prob": 0.2, "down_prob": 0.5}},
      "controller": {"type": "no_coop"}
    })");
    CHECK_THROWS_AS(load_config(path), ValidationError);
    std::remove(path.c_str());
}

TEST_CASE("config without a seed is rejected", "[scenario]") {
    const auto path = write_temp_config("noseed", R"({
      "horizon_slots": 10,
      "scenario": {"n_mgs": 1, "e_max_mwh": 5.0, "y_max_mw": 1.0, "b_s_max_mw": 1.0,
                   "arrival": {"type": "discrete", "up_prob": 0.2, "down_prob": 0.5}},
      "controller": {"type": "no_coop"}
    })");
    CHECK_THROWS_WITH(load_config(path), Catch::Matchers::ContainsSubstring("seed"));
    std::remove(path.c_str());
}

TEST_CASE("field-level message on malformed arrival", "[scenario]") {
    const auto path = write_temp_config("badpmf", R"({
      "seed": 1, "horizon_slots": 10,
      "scenario": {"n_mgs": 1, "e_max_mwh": 5.0, "y_max_mw": 1.0, "b_s_max_mw": 1.0,
                   "arrival": {"type": "discrete", "up_prob": 0.9, "down_prob": 0.5}},
      "controller": {"type": "no_coop"}
    })");
    CHECK_THROWS_WITH(load_config(path), Catch::Matchers::ContainsSubstring("arrival"));
    std::remove(path.c_str());
}

TEST_CASE("truncation bounds default to the configured load", "[scenario]") {
    const auto path = write_temp_config("loadbounds", R"({
      "seed": 1, "horizon_slots": 10,
      "scenario": {"n_mgs": 1, "load_mw": 25.0, "e_max_mwh": 5.0, "y_max_mw": 1.0,
                   "b_s_max_mw": 1.0,
                   "arrival": {"type": "truncated_normal", "sigma_mw": 3.0}},
      "controller": {"type": "lyapunov"}
    })");
    const auto cfg = load_config(path);
    const auto& tn = std::get<TruncatedNormalArrival>(cfg.scenario.arrival.dist);
    CHECK(tn.lower_mwh == -25.0);
    CHECK(tn.upper_mwh == 25.0);
    std::remove(path.c_str());
}

TEST_CASE("variance interpretation knob", "[scenario]") {
    const auto path = write_temp_config("varknob", R"({
      "seed": 1, "horizon_slots": 10,
      "scenario": {"n_mgs": 1, "e_max_mwh": 5.0, "y_max_mw": 1.0, "b_s_max_mw": 1.0,
                   "arrival": {"type": "truncated_normal", "sigma_mw": 9.0,
                                "sigma_is_variance": true}},
      "controller": {"type": "lyapunov"}
    })");
    const auto cfg = load_config(path);
    CHECK(std::get<TruncatedNormalArrival>(cfg.scenario.arrival.dist).sigma_mwh == Approx(3.0));
    std::remove(path.c_str());
}
