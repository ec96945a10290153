// SPDX-License-Identifier: Apache-2.0
#pragma once

// Independent Monte Carlo reference paths used by tests and the selftest.
// Everything here re-derives expected behavior from first principles (direct
// random-walk simulation), deliberately bypassing the analytic formulas and
// the LP controller it is used to check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "mgsim/excess_pmf.hpp"
#include "mgsim/rng.hpp"
#include "mgsim/slot_solver.hpp"

namespace mgsim::oracles {

struct ClippedWalkStats {
    std::vector<double> occupancy;     // empirical state frequencies
    std::vector<double> occupancy_se;  // batch-mean standard errors
    double mean_borrow_units = 0.0;    // average units bought per slot
    long long steps = 0;
};

/// Simulates E' = min(max(E + X, 0), e_max) and records occupancy and the
/// average shortfall bought from the macro-grid. Standard errors come from
/// batch means, which absorbs the autocorrelation of the walk.
inline ClippedWalkStats simulate_clipped_walk(const ExcessPmf& pmf, int e_max, long long steps,
                                              RandomStream& rng, int n_batches = 100) {
    ClippedWalkStats out;
    const int n_states = e_max + 1;
    out.occupancy.assign(static_cast<std::size_t>(n_states), 0.0);
    out.occupancy_se.assign(static_cast<std::size_t>(n_states), 0.0);
    out.steps = steps;

    std::vector<std::vector<double>> batch_freq(
        static_cast<std::size_t>(n_batches),
        std::vector<double>(static_cast<std::size_t>(n_states), 0.0));
    const long long batch_len = std::max<long long>(1, steps / n_batches);

    int e = 0;
    double borrow_total = 0.0;
    for (long long t = 0; t < steps; ++t) {
        const auto b = static_cast<std::size_t>(std::min<long long>(t / batch_len, n_batches - 1));
        batch_freq[b][static_cast<std::size_t>(e)] += 1.0;
        const int k = static_cast<int>(rng.pick(pmf.probs())) - pmf.m();
        const int raw = e + k;
        if (raw < 0) borrow_total += -raw;
        e = std::clamp(raw, 0, e_max);
    }

    for (int s = 0; s < n_states; ++s) {
        double mean = 0.0;
        for (int b = 0; b < n_batches; ++b) {
            batch_freq[static_cast<std::size_t>(b)][static_cast<std::size_t>(s)] /=
                static_cast<double>(batch_len);
            mean += batch_freq[static_cast<std::size_t>(b)][static_cast<std::size_t>(s)];
        }
        mean /= n_batches;
        double var = 0.0;
        for (int b = 0; b < n_batches; ++b) {
            const double dev =
                batch_freq[static_cast<std::size_t>(b)][static_cast<std::size_t>(s)] - mean;
            var += dev * dev;
        }
        var /= std::max(1, n_batches - 1);
        out.occupancy[static_cast<std::size_t>(s)] = mean;
        out.occupancy_se[static_cast<std::size_t>(s)] = std::sqrt(var / n_batches);
    }
    out.mean_borrow_units = borrow_total / static_cast<double>(steps);
    return out;
}

/// Expected macro cost per slot measured by direct simulation.
inline double mc_single_mg_cost(const ExcessPmf& pmf, int e_max, double q_max, long long steps,
                                RandomStream& rng) {
    return q_max * simulate_clipped_walk(pmf, e_max, steps, rng).mean_borrow_units;
}

struct TwoMgAlphaStats {
    double mean_cost_per_slot = 0.0;   // exchange plus macro, both MGs
    double exchange_events = 0.0;      // transfers per slot
    double opposite_sign_slots = 0.0;  // slots where a transfer was possible
};

/// Coupled simulation of the symmetric two-MG alpha-sharing policy with
/// three-point arrivals. Both batteries evolve jointly, so this checks the
/// product-form reasoning behind the analytic two-MG cost.
inline TwoMgAlphaStats simulate_two_mg_alpha(double a, double d, double alpha, int e_max,
                                             double p_max, double q_max, long long steps,
                                             RandomStream& rng) {
    int e1 = 0;
    int e2 = 0;
    double cost = 0.0;
    double transfers = 0.0;
    double opposite = 0.0;
    auto draw = [&]() {
        const double u = rng.uniform01();
        if (u < a) return +1;
        if (u < a + d) return -1;
        return 0;
    };
    auto store = [&](int& e) { e = std::min(e + 1, e_max); };
    auto serve = [&](int& e) {
        if (e > 0)
            --e;
        else
            cost += q_max;
    };
    for (long long t = 0; t < steps; ++t) {
        const int x1 = draw();
        const int x2 = draw();
        if (x1 == +1 && x2 == -1) {
            opposite += 1.0;
            if (rng.bernoulli(alpha)) {
                cost += p_max;
                transfers += 1.0;
            } else {
                store(e1);
                serve(e2);
            }
        } else if (x1 == -1 && x2 == +1) {
            opposite += 1.0;
            if (rng.bernoulli(alpha)) {
                cost += p_max;
                transfers += 1.0;
            } else {
                store(e2);
                serve(e1);
            }
        } else {
            if (x1 == +1) store(e1);
            if (x1 == -1) serve(e1);
            if (x2 == +1) store(e2);
            if (x2 == -1) serve(e2);
        }
    }
    const auto T = static_cast<double>(steps);
    return TwoMgAlphaStats{cost / T, transfers / T, opposite / T};
}

// ---------------------------------------------------------------------------
// Slot-LP test instances
// ---------------------------------------------------------------------------

/// Random small dispatch LP with budgets and caps on a 0.01 grid, sized so
/// the brute-force oracle stays cheap. Each MG is excess, deficit or idle;
/// coefficients span both signs.
inline SlotProblem random_slot_problem(RandomStream& rng, int max_n = 3) {
    const int n = 1 + static_cast<int>(rng.uniform01() * max_n) % max_n;
    auto grid01 = [&](double lo, double hi) {
        return std::round(rng.uniform(lo, hi) * 100.0) / 100.0;
    };
    SlotProblem p;
    p.n = n;
    const auto un = static_cast<std::size_t>(n);
    p.charge_cost.resize(un);
    p.discharge_cost.resize(un);
    p.exchange_cost.assign(un * un, 0.0);
    p.source_budget.assign(un, 0.0);
    p.sink_budget.assign(un, 0.0);
    p.y_max = grid01(0.02, 0.12);
    p.b_s_max = grid01(0.02, 0.12);
    p.b_ex_max = grid01(0.02, 0.12);
    for (int i = 0; i < n; ++i) {
        const double role = rng.uniform01();
        if (role < 0.45)
            p.source_budget[static_cast<std::size_t>(i)] = grid01(0.02, 0.12);
        else if (role < 0.9)
            p.sink_budget[static_cast<std::size_t>(i)] = grid01(0.02, 0.12);
        p.charge_cost[static_cast<std::size_t>(i)] = rng.uniform(-2.0, 2.0);
        p.discharge_cost[static_cast<std::size_t>(i)] = rng.uniform(-2.0, 2.0);
        for (int j = 0; j < n; ++j)
            if (j != i)
                p.exchange_cost[static_cast<std::size_t>(i) * n + j] = rng.uniform(-2.0, 2.0);
    }
    return p;
}

/// Worst constraint violation of a decision against a slot problem
/// (budgets and boxes); 0 for a feasible decision.
inline double slot_problem_violation(const SlotProblem& p, const SlotDecision& d) {
    double worst = 0.0;
    auto bump = [&](double v) { worst = std::max(worst, v); };
    for (int i = 0; i < p.n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        bump(d.charge_mwh[ui] + d.sent(i) - p.source_budget[ui]);
        bump(d.self_discharge_mwh[ui] + d.received(i) - p.sink_budget[ui]);
        bump(-d.charge_mwh[ui]);
        bump(d.charge_mwh[ui] - p.y_max);
        bump(-d.self_discharge_mwh[ui]);
        bump(d.self_discharge_mwh[ui] - p.b_s_max);
        for (int j = 0; j < p.n; ++j) {
            if (j == i) continue;
            bump(-d.exchange(i, j));
            bump(d.exchange(i, j) - p.b_ex_max);
        }
    }
    return worst;
}

/// Grid-rounding error bound for the brute-force oracle: rounding the true
/// optimum down coordinate-wise moves the objective by at most this much.
inline double brute_force_gap_bound(const SlotProblem& p, double grid_step) {
    double sum_abs = 0.0;
    for (int i = 0; i < p.n; ++i) {
        sum_abs += std::abs(p.charge_cost[static_cast<std::size_t>(i)]);
        sum_abs += std::abs(p.discharge_cost[static_cast<std::size_t>(i)]);
        for (int j = 0; j < p.n; ++j)
            if (j != i) sum_abs += std::abs(p.cx(i, j));
    }
    return grid_step * sum_abs;
}

}  // namespace mgsim::oracles
