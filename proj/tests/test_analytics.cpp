// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mgsim/analytics.hpp"
#include "mgsim/oracles.hpp"

using namespace mgsim;
using Catch::Approx;

TEST_CASE("transition matrix of the unit-step chain is tridiagonal", "[analytics]") {
    const double a = 0.2, d = 0.5;
    const auto P = build_transition_matrix(ExcessPmf::simple(a, d), 2);
    CHECK(P.at(0, 0) == Approx(1.0 - a));
    CHECK(P.at(0, 1) == Approx(a));
    CHECK(P.at(0, 2) == 0.0);
    CHECK(P.at(1, 0) == Approx(d));
    CHECK(P.at(1, 1) == Approx(1.0 - a - d));
    CHECK(P.at(1, 2) == Approx(a));
    CHECK(P.at(2, 1) == Approx(d));
    CHECK(P.at(2, 2) == Approx(1.0 - d));
    CHECK(P.max_row_sum_error() < 1e-15);
}

TEST_CASE("degenerate pmf gives the identity chain", "[analytics]") {
    const auto P = build_transition_matrix(ExcessPmf(0, {1.0}), 3);
    for (int i = 0; i <= 3; ++i)
        for (int j = 0; j <= 3; ++j) CHECK(P.at(i, j) == (i == j ? 1.0 : 0.0));
}

TEST_CASE("boundary states absorb clipped mass", "[analytics]") {
    // pmf {-2: 0.3, +1: 0.7} on states {0, 1}: from 0, -2 clips to 0; from 1,
    // -2 clips to 0 and +1 clips to 1
    const auto P = build_transition_matrix(ExcessPmf(2, {0.3, 0.0, 0.0, 0.7, 0.0}), 1);
    CHECK(P.at(0, 0) == Approx(0.3));
    CHECK(P.at(0, 1) == Approx(0.7));
    CHECK(P.at(1, 0) == Approx(0.3));
    CHECK(P.at(1, 1) == Approx(0.7));
}

TEST_CASE("stationary distribution rejects reducible chains", "[analytics]") {
    CHECK_THROWS_AS(stationary_distribution(build_transition_matrix(ExcessPmf(0, {1.0}), 2)),
                    ValidationError);
}

TEST_CASE("stationary distribution matches the geometric form", "[analytics]") {
    const auto pi = stationary_distribution(build_transition_matrix(ExcessPmf::simple(0.2, 0.5), 2));
    // r = 0.4: pi = (0.6, 0.24, 0.096) / 0.936
    CHECK(pi[0] == Approx(0.6 / 0.936).epsilon(1e-12));
    CHECK(pi[1] == Approx(0.24 / 0.936).epsilon(1e-12));
    CHECK(pi[2] == Approx(0.096 / 0.936).epsilon(1e-12));
}

TEST_CASE("symmetric chain is uniform", "[analytics]") {
    const auto pi = stationary_distribution(build_transition_matrix(ExcessPmf::simple(0.3, 0.3), 4));
    for (double v : pi) CHECK(v == Approx(0.2).margin(1e-12));
}

TEST_CASE("closed form equals the numeric solve across the parameter grid", "[analytics]") {
    for (double a : {0.1, 0.25, 0.5})
        for (double d : {0.1, 0.3, 0.45}) {
            for (int e : {0, 1, 2, 7, 25}) {
                const auto closed = birth_death_closed_form(a, d, e);
                const auto numeric =
                    stationary_distribution(build_transition_matrix(ExcessPmf::simple(a, d), e));
                for (std::size_t i = 0; i < closed.size(); ++i)
                    CHECK(closed[i] == Approx(numeric[i]).margin(1e-10));
            }
        }
}

TEST_CASE("closed form limits", "[analytics]") {
    const auto uniform = birth_death_closed_form(0.3, 0.3, 4);
    for (double v : uniform) CHECK(v == Approx(0.2).margin(1e-12));
    CHECK(birth_death_closed_form(0.2, 0.5, 0) == std::vector<double>{1.0});
    CHECK_THROWS_AS(birth_death_closed_form(0.2, 0.0, 3), ValidationError);
}

TEST_CASE("single MG cost: no storage pays for every down step", "[analytics]") {
    CHECK(single_mg_cost(ExcessPmf::simple(0.2, 0.5), 0, 1.0) == Approx(0.5).margin(1e-12));
    CHECK(single_mg_cost_closed(0.2, 0.5, 0, 1.0) == Approx(0.5).margin(1e-12));
}

TEST_CASE("single MG cost with storage matches the closed form", "[analytics]") {
    const double expect = 0.5 * 0.6 / 0.936;  // q d pi(0)
    CHECK(single_mg_cost(ExcessPmf::simple(0.2, 0.5), 2, 1.0) == Approx(expect).epsilon(1e-12));
    CHECK(single_mg_cost_closed(0.2, 0.5, 2, 1.0) == Approx(expect).epsilon(1e-12));
}

TEST_CASE("single MG cost vanishes without deficits", "[analytics]") {
    CHECK(single_mg_cost(ExcessPmf(1, {0.0, 0.8, 0.2}), 3, 5.0) == 0.0);
}

TEST_CASE("general-pmf cost agrees with Monte Carlo", "[analytics]") {
    const ExcessPmf pmf(2, {0.15, 0.25, 0.2, 0.25, 0.15});
    const double exact = single_mg_cost(pmf, 3, 2.0);
    RandomStream rng(11);
    const double mc = oracles::mc_single_mg_cost(pmf, 3, 2.0, 600000, rng);
    CHECK(mc == Approx(exact).epsilon(0.02));
}

TEST_CASE("Monte Carlo occupancy reproduces pi within 3 batch SEs", "[analytics]") {
    const auto pmf = ExcessPmf::simple(0.2, 0.5);
    const auto pi = stationary_distribution(build_transition_matrix(pmf, 4));
    RandomStream rng(13);
    const auto stats = oracles::simulate_clipped_walk(pmf, 4, 1000000, rng);
    for (std::size_t s = 0; s < pi.size(); ++s) {
        const double tol = 3.0 * stats.occupancy_se[s] + 1e-4;
        CHECK(std::abs(stats.occupancy[s] - pi[s]) < tol);
    }
}

TEST_CASE("effective two-MG pmf", "[analytics]") {
    {
        const auto pmf = two_mg_effective_pmf(0.2, 0.5, 0.0);
        CHECK(pmf.down(1) == Approx(0.5));
        CHECK(pmf.prob(0) == Approx(0.3));
        CHECK(pmf.up(1) == Approx(0.2));
    }
    {
        const auto pmf = two_mg_effective_pmf(0.2, 0.5, 1.0);
        CHECK(pmf.down(1) == Approx(0.4));
        CHECK(pmf.prob(0) == Approx(0.5));
        CHECK(pmf.up(1) == Approx(0.1));
    }
    {
        const auto pmf = two_mg_effective_pmf(0.5, 0.5, 1.0);
        CHECK(pmf.down(1) == Approx(0.25));
        CHECK(pmf.prob(0) == Approx(0.5));
        CHECK(pmf.up(1) == Approx(0.25));
    }
    for (int k = 0; k <= 100; ++k) {
        const auto pmf = two_mg_effective_pmf(0.2, 0.5, k / 100.0);
        double sum = 0.0;
        for (double p : pmf.probs()) sum += p;
        CHECK(sum == Approx(1.0).margin(1e-15));
    }
}

TEST_CASE("two-MG cost, no storage", "[analytics]") {
    // Cost2Grid with pi(0) = 1: 2 d q + 2 a d alpha (p - q)
    for (double alpha : {0.0, 0.3, 1.0}) {
        TwoMgPolicy pol{alpha, 0.2, 0.5, 0, 1.0, 3.0};
        const double expect = 2.0 * 0.5 * 3.0 + 2.0 * 0.2 * 0.5 * alpha * (1.0 - 3.0);
        CHECK(two_mg_cost(pol) == Approx(expect).margin(1e-12));
    }
}

TEST_CASE("two-MG cost, infinite storage", "[analytics]") {
    // pi(0) = (d-a)/(d(1-alpha a)): cost = 2 (d-a) q + 2 a d alpha p
    for (double alpha : {0.0, 0.5, 1.0}) {
        TwoMgPolicy pol{alpha, 0.2, 0.5, TwoMgPolicy::kInfiniteCapacity, 1.0, 3.0};
        const double expect = 2.0 * 0.3 * 3.0 + 2.0 * 0.2 * 0.5 * alpha * 1.0;
        CHECK(two_mg_cost(pol) == Approx(expect).margin(1e-12));
    }
    TwoMgPolicy drifting{0.0, 0.5, 0.2, TwoMgPolicy::kInfiniteCapacity, 1.0, 3.0};
    CHECK_THROWS_AS(two_mg_cost(drifting), ValidationError);  // needs a < d
}

TEST_CASE("alpha = 0 decouples into two single MGs", "[analytics]") {
    for (int e : {0, 1, 3, 10}) {
        TwoMgPolicy pol{0.0, 0.2, 0.5, e, 1.0, 3.0};
        CHECK(two_mg_cost(pol) ==
              Approx(2.0 * single_mg_cost_closed(0.2, 0.5, e, 3.0)).margin(1e-12));
    }
}

TEST_CASE("coupled two-battery simulation matches the product-form cost", "[analytics]") {
    // The policy's effective arrivals are i.i.d. per battery, so the analytic
    // cost should be exact despite the coupling; checked empirically.
    RandomStream rng(17);
    TwoMgPolicy pol{0.5, 0.2, 0.5, 5, 1.0, 3.0};
    const auto stats = oracles::simulate_two_mg_alpha(0.2, 0.5, 0.5, 5, 1.0, 3.0, 1000000, rng);
    CHECK(stats.mean_cost_per_slot == Approx(two_mg_cost(pol)).epsilon(0.02));
}

TEST_CASE("alpha optimum: share always when storage-free exchange is cheap", "[analytics]") {
    const auto best = optimize_alpha(TwoMgPolicy{0.0, 0.2, 0.5, 0, 1.0, 3.0});
    CHECK(best.alpha == 1.0);
}

TEST_CASE("alpha optimum: never share when exchange is dear", "[analytics]") {
    const auto best = optimize_alpha(TwoMgPolicy{0.0, 0.2, 0.5, 0, 3.0, 1.0});
    CHECK(best.alpha == 0.0);
}

TEST_CASE("alpha optimum: store everything with huge batteries", "[analytics]") {
    const auto best = optimize_alpha(TwoMgPolicy{0.0, 0.2, 0.5, 10000, 1.0, 3.0});
    CHECK(best.alpha <= 1e-3);
}

TEST_CASE("alpha optimum beats a fine reference grid", "[analytics]") {
    for (const auto& pol : {TwoMgPolicy{0.0, 0.2, 0.5, 1, 2.0, 3.0},
                            TwoMgPolicy{0.0, 0.3, 0.4, 2, 0.5, 3.0},
                            TwoMgPolicy{0.0, 0.45, 0.5, 3, 1.0, 1.2},
                            TwoMgPolicy{0.0, 0.1, 0.6, 5, 2.9, 3.0}}) {
        const auto best = optimize_alpha(pol);
        double grid_best = 1e300;
        for (int k = 0; k <= 10000; ++k) {
            TwoMgPolicy probe = pol;
            probe.alpha = k / 10000.0;
            grid_best = std::min(grid_best, two_mg_cost(probe));
        }
        CHECK(best.cost <= grid_best + 1e-9);
    }
}

TEST_CASE("alpha optimum is invariant to a common price scale", "[analytics]") {
    for (double scale : {0.1, 1.0, 25.0}) {
        const auto base = optimize_alpha(TwoMgPolicy{0.0, 0.2, 0.5, 2, 1.0, 3.0});
        const auto scaled = optimize_alpha(TwoMgPolicy{0.0, 0.2, 0.5, 2, scale, 3.0 * scale});
        CHECK(scaled.alpha == Approx(base.alpha).margin(1e-9));
    }
}

TEST_CASE("stationary model bundles validated pieces", "[analytics]") {
    const auto model = StationaryModel::build(ExcessPmf::simple(0.2, 0.5), 3);
    CHECK(model.e_max == 3);
    CHECK(model.pi.size() == 4);
    double residual = 0.0;
    for (int j = 0; j <= 3; ++j) {
        double s = 0.0;
        for (int i = 0; i <= 3; ++i) s += model.pi[static_cast<std::size_t>(i)] * model.P.at(i, j);
        residual = std::max(residual, std::abs(s - model.pi[static_cast<std::size_t>(j)]));
    }
    CHECK(residual < 1e-12);
}
