// SPDX-License-Identifier: Apache-2.0
#pragma once

// Exact solver for the per-slot dispatch LP minimized by the drift-plus-
// penalty controller:
//
//   min  sum_i cY_i Y_i + sum_i cB_i B_ii + sum_{i != j} cX_ij B_ij
//   s.t. Y_i + sum_j B_ij <= x~_i          (source budget, excess MGs)
//        B_jj + sum_i B_ij <= l~_j         (sink budget, deficit MGs)
//        0 <= Y_i <= y_max, 0 <= B_ii <= b_s_max, 0 <= B_ij <= b_ex_max
//
// with cY_i = E~_i, cB_i = -(E~_i + V q_i), cX_ij = V (p_ij - q_j) and
// E~_i = E_i - theta. The battery-availability constraints are relaxed here;
// the controller's (V, theta) choice keeps the solution feasible for them.
//
// The LP is a transportation problem on a bipartite graph (excess MGs on one
// side, deficit MGs plus batteries on the other) and is solved by a dense
// bounded-variable simplex: small, deterministic, and exact to roundoff.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "mgsim/domain.hpp"

namespace mgsim {

/// Coefficients and budgets of one slot's dispatch LP.
struct SlotProblem {
    int n = 0;
    std::vector<double> charge_cost;     // cY_i = E~_i
    std::vector<double> discharge_cost;  // cB_i = -(E~_i + V q_i)
    std::vector<double> exchange_cost;   // cX_ij row-major, V (p_ij - q_j)
    std::vector<double> source_budget;   // x~_i
    std::vector<double> sink_budget;     // l~_i
    double y_max = 0.0;
    double b_s_max = 0.0;
    double b_ex_max = 0.0;

    double cx(int i, int j) const { return exchange_cost[static_cast<std::size_t>(i) * n + j]; }
};

inline SlotProblem build_slot_problem(double v, double theta, const GridScenario& s,
                                      const MicrogridState& state, const SlotExogenous& exo) {
    if (!(v > 0.0)) throw ValidationError("build_slot_problem: V must be > 0");
    SlotProblem p;
    p.n = s.n_mgs;
    const auto n = static_cast<std::size_t>(p.n);
    p.charge_cost.resize(n);
    p.discharge_cost.resize(n);
    p.exchange_cost.assign(n * n, 0.0);
    p.source_budget = exo.excess_mwh;
    p.sink_budget = exo.deficit_mwh;
    p.y_max = s.y_max_mwh;
    p.b_s_max = s.b_s_max_mwh;
    p.b_ex_max = s.b_ex_max_mwh;
    for (int i = 0; i < p.n; ++i) {
        const double e_shift = state.energy_mwh[static_cast<std::size_t>(i)] - theta;
        p.charge_cost[static_cast<std::size_t>(i)] = e_shift;
        p.discharge_cost[static_cast<std::size_t>(i)] = -(e_shift + v * exo.q(i));
        for (int j = 0; j < p.n; ++j)
            if (j != i)
                p.exchange_cost[static_cast<std::size_t>(i) * p.n + j] =
                    v * (exo.p(i, j) - exo.q(j));
    }
    return p;
}

struct SlotSolution {
    SlotDecision decision;  // macro draw left at zero; see recover_macro_draw
    double objective = 0.0;
};

/// Objective value of a decision under a problem's coefficients.
inline double slot_objective(const SlotProblem& p, const SlotDecision& d) {
    double obj = 0.0;
    for (int i = 0; i < p.n; ++i) {
        obj += p.charge_cost[static_cast<std::size_t>(i)] * d.charge_mwh[static_cast<std::size_t>(i)];
        obj += p.discharge_cost[static_cast<std::size_t>(i)] *
               d.self_discharge_mwh[static_cast<std::size_t>(i)];
        for (int j = 0; j < p.n; ++j)
            if (j != i) obj += p.cx(i, j) * d.exchange(i, j);
    }
    return obj;
}

namespace detail {

struct SimplexVar {
    enum class Kind { Discharge, Exchange, Charge } kind;
    int i = -1;
    int j = -1;
    double cost = 0.0;
    double ub = 0.0;
    int source_row = -1;  // index into rows, -1 if none
    int sink_row = -1;
};

/// Dense bounded-variable simplex over rows of the form (sum of vars <= rhs).
/// All structural variables live in [0, ub]. Starts from the all-zero point
/// (feasible: rhs >= 0). Entering rule: most negative effective reduced cost,
/// lowest index on ties; falls back to Bland's rule after a degenerate streak.
class BoundedSimplex {
public:
    BoundedSimplex(std::vector<SimplexVar> vars, std::vector<double> rhs)
        : vars_(std::move(vars)), rhs_(std::move(rhs)) {
        nrows_ = static_cast<int>(rhs_.size());
        nvars_ = static_cast<int>(vars_.size());
        ncols_ = nvars_ + nrows_;
        tab_.assign(static_cast<std::size_t>(nrows_) * ncols_, 0.0);
        for (int k = 0; k < nvars_; ++k) {
            if (vars_[static_cast<std::size_t>(k)].source_row >= 0)
                at(vars_[static_cast<std::size_t>(k)].source_row, k) = 1.0;
            if (vars_[static_cast<std::size_t>(k)].sink_row >= 0)
                at(vars_[static_cast<std::size_t>(k)].sink_row, k) = 1.0;
        }
        for (int r = 0; r < nrows_; ++r) at(r, nvars_ + r) = 1.0;
        basis_.resize(static_cast<std::size_t>(nrows_));
        xb_ = rhs_;
        state_.assign(static_cast<std::size_t>(ncols_), State::AtLower);
        for (int r = 0; r < nrows_; ++r) {
            basis_[static_cast<std::size_t>(r)] = nvars_ + r;
            state_[static_cast<std::size_t>(nvars_ + r)] = State::Basic;
        }
        cost_.assign(static_cast<std::size_t>(ncols_), 0.0);
        ub_.assign(static_cast<std::size_t>(ncols_), std::numeric_limits<double>::infinity());
        for (int k = 0; k < nvars_; ++k) {
            cost_[static_cast<std::size_t>(k)] = vars_[static_cast<std::size_t>(k)].cost;
            ub_[static_cast<std::size_t>(k)] = vars_[static_cast<std::size_t>(k)].ub;
        }
    }

    /// Runs to optimality and returns structural variable values.
    std::vector<double> solve(double eps) {
        int degenerate_streak = 0;
        bool bland = false;
        bool optimal = false;
        for (int iter = 0; iter < 20000 && !optimal; ++iter) {
            // reduced costs d_j = c_j - c_B^T tab_j
            int enter = -1;
            double best = 0.0;
            for (int j = 0; j < ncols_; ++j) {
                const State st = state_[static_cast<std::size_t>(j)];
                if (st == State::Basic) continue;
                double d = cost_[static_cast<std::size_t>(j)];
                for (int r = 0; r < nrows_; ++r) {
                    const double c = cost_[basis_[static_cast<std::size_t>(r)]];
                    if (c != 0.0) d -= c * at(r, j);
                }
                const double eff = (st == State::AtLower) ? d : -d;
                if (eff < -eps) {
                    if (bland) {
                        enter = j;
                        break;
                    }
                    if (eff < best) {
                        best = eff;
                        enter = j;
                    }
                }
            }
            if (enter < 0) {
                optimal = true;
                break;
            }

            const double sigma = (state_[static_cast<std::size_t>(enter)] == State::AtLower)
                                     ? 1.0
                                     : -1.0;
            // ratio test: entering moves by t >= 0 in direction sigma
            double t_star = ub_[static_cast<std::size_t>(enter)];
            int leave = -1;
            bool leave_to_upper = false;
            for (int r = 0; r < nrows_; ++r) {
                const double delta = sigma * at(r, enter);
                if (delta > kPivotEps) {
                    const double limit = xb_[static_cast<std::size_t>(r)] / delta;
                    if (limit < t_star) {
                        t_star = limit;
                        leave = r;
                        leave_to_upper = false;
                    }
                } else if (delta < -kPivotEps) {
                    const double cap = ub_[basis_[static_cast<std::size_t>(r)]];
                    if (std::isinf(cap)) continue;
                    const double limit = (cap - xb_[static_cast<std::size_t>(r)]) / (-delta);
                    if (limit < t_star) {
                        t_star = limit;
                        leave = r;
                        leave_to_upper = true;
                    }
                }
            }
            if (std::isinf(t_star))
                throw InvariantFault("slot LP reported unbounded; boxes should prevent this");
            if (t_star < 0.0) t_star = 0.0;
            degenerate_streak = (t_star <= 1e-13) ? degenerate_streak + 1 : 0;
            if (degenerate_streak > 64) bland = true;

            for (int r = 0; r < nrows_; ++r)
                xb_[static_cast<std::size_t>(r)] -= sigma * t_star * at(r, enter);
            if (leave < 0) {
                // bound flip, basis unchanged
                state_[static_cast<std::size_t>(enter)] =
                    (sigma > 0.0) ? State::AtUpper : State::AtLower;
                continue;
            }
            const double enter_value =
                (sigma > 0.0) ? t_star : ub_[static_cast<std::size_t>(enter)] - t_star;
            pivot(leave, enter);
            state_[basis_[static_cast<std::size_t>(leave)]] =
                leave_to_upper ? State::AtUpper : State::AtLower;
            basis_[static_cast<std::size_t>(leave)] = enter;
            state_[static_cast<std::size_t>(enter)] = State::Basic;
            xb_[static_cast<std::size_t>(leave)] = enter_value;
        }
        if (!optimal) throw InvariantFault("slot LP did not converge within the pivot budget");

        std::vector<double> x(static_cast<std::size_t>(nvars_), 0.0);
        for (int k = 0; k < nvars_; ++k) {
            switch (state_[static_cast<std::size_t>(k)]) {
                case State::Basic: break;
                case State::AtLower: x[static_cast<std::size_t>(k)] = 0.0; break;
                case State::AtUpper: x[static_cast<std::size_t>(k)] = ub_[static_cast<std::size_t>(k)]; break;
            }
        }
        for (int r = 0; r < nrows_; ++r)
            if (basis_[static_cast<std::size_t>(r)] < static_cast<std::size_t>(nvars_))
                x[basis_[static_cast<std::size_t>(r)]] = std::max(0.0, xb_[static_cast<std::size_t>(r)]);
        return x;
    }

private:
    enum class State : unsigned char { Basic, AtLower, AtUpper };
    static constexpr double kPivotEps = 1e-11;

    double& at(int r, int c) { return tab_[static_cast<std::size_t>(r) * ncols_ + c]; }

    void pivot(int prow, int pcol) {
        const double pv = at(prow, pcol);
        const double inv = 1.0 / pv;
        for (int c = 0; c < ncols_; ++c) at(prow, c) *= inv;
        at(prow, pcol) = 1.0;
        for (int r = 0; r < nrows_; ++r) {
            if (r == prow) continue;
            const double f = at(r, pcol);
            if (f == 0.0) continue;
            for (int c = 0; c < ncols_; ++c) at(r, c) -= f * at(prow, c);
            at(r, pcol) = 0.0;
        }
    }

    std::vector<SimplexVar> vars_;
    std::vector<double> rhs_;
    std::vector<double> tab_;
    std::vector<double> xb_;
    std::vector<double> cost_;
    std::vector<double> ub_;
    std::vector<std::size_t> basis_;
    std::vector<State> state_;
    int nrows_ = 0;
    int nvars_ = 0;
    int ncols_ = 0;
};

/// Active variable layout shared by the simplex path and the brute force.
/// Order encodes the deterministic tie preference: own-battery discharge,
/// then exchanges in (i, j) order, then charging.
inline std::vector<SimplexVar> enumerate_variables(const SlotProblem& p,
                                                   std::vector<int>& source_row_of,
                                                   std::vector<int>& sink_row_of,
                                                   std::vector<double>& rhs) {
    source_row_of.assign(static_cast<std::size_t>(p.n), -1);
    sink_row_of.assign(static_cast<std::size_t>(p.n), -1);
    rhs.clear();
    for (int i = 0; i < p.n; ++i) {
        if (p.source_budget[static_cast<std::size_t>(i)] > 0.0) {
            source_row_of[static_cast<std::size_t>(i)] = static_cast<int>(rhs.size());
            rhs.push_back(p.source_budget[static_cast<std::size_t>(i)]);
        }
        if (p.sink_budget[static_cast<std::size_t>(i)] > 0.0) {
            sink_row_of[static_cast<std::size_t>(i)] = static_cast<int>(rhs.size());
            rhs.push_back(p.sink_budget[static_cast<std::size_t>(i)]);
        }
    }
    std::vector<SimplexVar> vars;
    for (int i = 0; i < p.n; ++i)
        if (sink_row_of[static_cast<std::size_t>(i)] >= 0 && p.b_s_max > 0.0)
            vars.push_back(SimplexVar{SimplexVar::Kind::Discharge, i, i,
                                      p.discharge_cost[static_cast<std::size_t>(i)], p.b_s_max,
                                      -1, sink_row_of[static_cast<std::size_t>(i)]});
    for (int i = 0; i < p.n; ++i)
        for (int j = 0; j < p.n; ++j)
            if (i != j && source_row_of[static_cast<std::size_t>(i)] >= 0 &&
                sink_row_of[static_cast<std::size_t>(j)] >= 0 && p.b_ex_max > 0.0)
                vars.push_back(SimplexVar{SimplexVar::Kind::Exchange, i, j, p.cx(i, j),
                                          p.b_ex_max, source_row_of[static_cast<std::size_t>(i)],
                                          sink_row_of[static_cast<std::size_t>(j)]});
    for (int i = 0; i < p.n; ++i)
        if (source_row_of[static_cast<std::size_t>(i)] >= 0 && p.y_max > 0.0)
            vars.push_back(SimplexVar{SimplexVar::Kind::Charge, i, i,
                                      p.charge_cost[static_cast<std::size_t>(i)], p.y_max,
                                      source_row_of[static_cast<std::size_t>(i)], -1});
    return vars;
}

inline SlotDecision decision_from_values(const SlotProblem& p,
                                         const std::vector<SimplexVar>& vars,
                                         const std::vector<double>& x) {
    auto d = SlotDecision::zeros(p.n);
    for (std::size_t k = 0; k < vars.size(); ++k) {
        const auto& v = vars[k];
        switch (v.kind) {
            case SimplexVar::Kind::Discharge:
                d.self_discharge_mwh[static_cast<std::size_t>(v.i)] = x[k];
                break;
            case SimplexVar::Kind::Exchange: d.exchange(v.i, v.j) = x[k]; break;
            case SimplexVar::Kind::Charge:
                d.charge_mwh[static_cast<std::size_t>(v.i)] = x[k];
                break;
        }
    }
    return d;
}

}  // namespace detail

/// Globally optimal solution of the slot LP. Deterministic: identical inputs
/// give identical outputs. Zero-reduced-cost exchange and charge variables
/// stay at zero; a zero-cost own-battery discharge is exercised (it fills the
/// remaining sink budget), which keeps the storage chain aligned with the
/// clipped random walk the steady-state analytics assume.
inline SlotSolution solve_slot(const SlotProblem& p, double tolerance = 1e-9) {
    std::vector<int> source_row_of, sink_row_of;
    std::vector<double> rhs;
    auto vars = detail::enumerate_variables(p, source_row_of, sink_row_of, rhs);

    double scale = 1.0;
    for (const auto& v : vars) scale = std::max(scale, std::abs(v.cost));
    const double eps = tolerance * scale;

    std::vector<double> x;
    if (!vars.empty()) {
        detail::BoundedSimplex simplex(vars, rhs);
        x = simplex.solve(eps);
    }
    auto d = detail::decision_from_values(p, vars, x);

    // zero-cost discharge tie: prefer the battery over an equally priced
    // macro draw so that a full battery actually serves the deficit
    for (int j = 0; j < p.n; ++j) {
        if (sink_row_of[static_cast<std::size_t>(j)] < 0 || p.b_s_max <= 0.0) continue;
        if (std::abs(p.discharge_cost[static_cast<std::size_t>(j)]) > eps) continue;
        const double used = d.self_discharge_mwh[static_cast<std::size_t>(j)] + d.received(j);
        const double slack = p.sink_budget[static_cast<std::size_t>(j)] - used;
        if (slack <= 0.0) continue;
        const double room = p.b_s_max - d.self_discharge_mwh[static_cast<std::size_t>(j)];
        d.self_discharge_mwh[static_cast<std::size_t>(j)] += std::min(slack, room);
    }
    const double obj = slot_objective(p, d);
    return SlotSolution{std::move(d), obj};
}

/// Exhaustive grid search over every active variable; test oracle only.
/// Refuses instances with more than eight variables.
inline SlotSolution brute_force_slot(const SlotProblem& p, double grid_step) {
    if (!(grid_step > 0.0)) throw ValidationError("brute_force_slot: grid_step must be > 0");
    std::vector<int> source_row_of, sink_row_of;
    std::vector<double> rhs;
    auto vars = detail::enumerate_variables(p, source_row_of, sink_row_of, rhs);
    if (vars.size() > 8)
        throw ValidationError("brute_force_slot: instance too large (" +
                              std::to_string(vars.size()) + " variables)");

    std::vector<double> x(vars.size(), 0.0);
    std::vector<double> best = x;
    double best_obj = 0.0;
    std::vector<double> row_used(rhs.size(), 0.0);

    auto recurse = [&](auto&& self, std::size_t k, double obj) -> void {
        if (k == vars.size()) {
            if (obj < best_obj) {
                best_obj = obj;
                best = x;
            }
            return;
        }
        const auto& v = vars[k];
        double headroom = v.ub;
        if (v.source_row >= 0)
            headroom = std::min(headroom, rhs[static_cast<std::size_t>(v.source_row)] -
                                              row_used[static_cast<std::size_t>(v.source_row)]);
        if (v.sink_row >= 0)
            headroom = std::min(headroom, rhs[static_cast<std::size_t>(v.sink_row)] -
                                              row_used[static_cast<std::size_t>(v.sink_row)]);
        headroom = std::max(headroom, 0.0);
        const auto n_steps = static_cast<long long>(std::floor(headroom / grid_step + 1e-12));
        for (long long s = 0; s <= n_steps + 1; ++s) {
            const double value = (s <= n_steps) ? s * grid_step : headroom;
            if (s > n_steps && value <= n_steps * grid_step + 1e-15) break;  // headroom on grid
            x[k] = value;
            if (v.source_row >= 0) row_used[static_cast<std::size_t>(v.source_row)] += value;
            if (v.sink_row >= 0) row_used[static_cast<std::size_t>(v.sink_row)] += value;
            self(self, k + 1, obj + v.cost * value);
            if (v.source_row >= 0) row_used[static_cast<std::size_t>(v.source_row)] -= value;
            if (v.sink_row >= 0) row_used[static_cast<std::size_t>(v.sink_row)] -= value;
        }
        x[k] = 0.0;
    };
    recurse(recurse, 0, 0.0);

    auto d = detail::decision_from_values(p, vars, best);
    return SlotSolution{std::move(d), best_obj};
}

/// Completes a slot decision with the macro draw G_i = (l~_i - B_ii -
/// sum B_ji)^+. Faults if the LP overshot a sink budget.
inline std::vector<double> recover_macro_draw(const SlotDecision& d, const SlotExogenous& exo) {
    std::vector<double> g(static_cast<std::size_t>(d.n()), 0.0);
    for (int i = 0; i < d.n(); ++i) {
        const double residual = exo.deficit_mwh[static_cast<std::size_t>(i)] -
                                d.self_discharge_mwh[static_cast<std::size_t>(i)] - d.received(i);
        if (residual < -kEnergyTol)
            throw InvariantFault("recover_macro_draw: sink budget violated at mg " +
                                 std::to_string(i) + " by " + std::to_string(-residual));
        g[static_cast<std::size_t>(i)] = std::max(residual, 0.0);
    }
    return g;
}

}  // namespace mgsim
