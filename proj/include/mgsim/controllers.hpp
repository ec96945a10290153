// SPDX-License-Identifier: Apache-2.0
#pragma once

// Slot controllers: the Lyapunov drift-plus-penalty policy built around the
// slot LP, the symmetric two-MG alpha-sharing policy, and a greedy
// store-then-macro baseline (not from the analytic model; used to
// contextualize reports).

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include "mgsim/domain.hpp"
#include "mgsim/rng.hpp"
#include "mgsim/slot_solver.hpp"

namespace mgsim {

/// Largest admissible trade-off weight: (e_max - y_max - b_s_max) / q_max.
inline double max_v(const GridScenario& s) {
    if (!(s.e_max_mwh > s.y_max_mwh + s.b_s_max_mwh))
        throw ValidationError("max_v: requires e_max > y_max + b_s_max");
    if (!(s.q_max > 0.0)) throw ValidationError("max_v: requires q_max > 0");
    return (s.e_max_mwh - s.y_max_mwh - s.b_s_max_mwh) / s.q_max;
}

/// Trade-off weight V and the battery perturbation theta = b_s_max + V q_max.
/// Keeping V within max_v is what makes the relaxed slot LP's solution
/// feasible for the physical battery.
struct LyapunovParams {
    double v = 0.0;
    double theta = 0.0;

    static LyapunovParams for_scenario(const GridScenario& s,
                                       std::optional<double> v_choice = std::nullopt) {
        const double bound = max_v(s);
        const double v = v_choice.value_or(bound);
        if (!(v > 0.0) || v > bound + 1e-12)
            throw ValidationError("LyapunovParams: V must lie in (0, " + std::to_string(bound) +
                                  "]");
        return LyapunovParams{v, s.b_s_max_mwh + v * s.q_max};
    }

    /// Bypasses validation; exists so the selftest can inject a broken theta
    /// and confirm the invariant monitors trip.
    static LyapunovParams unchecked(double v, double theta) { return LyapunovParams{v, theta}; }
};

/// Consistency of a decision with the battery state: no charging near a
/// full battery, no discharging near an empty one. The (V, theta) choice
/// guarantees these hold for every slot-LP minimizer.
/// Returns a diagnostic string on violation.
inline std::optional<std::string> check_charge_discharge_guards(const GridScenario& s,
                                                                const MicrogridState& state,
                                                                const SlotDecision& d) {
    for (int i = 0; i < s.n_mgs; ++i) {
        const double e = state.energy_mwh[static_cast<std::size_t>(i)];
        if (e > s.e_max_mwh - s.y_max_mwh + kEnergyTol &&
            d.charge_mwh[static_cast<std::size_t>(i)] > kEnergyTol) {
            std::ostringstream os;
            os << "guard: mg " << i << " charges " << d.charge_mwh[static_cast<std::size_t>(i)]
               << " with E=" << e << " > e_max - y_max = " << s.e_max_mwh - s.y_max_mwh;
            return os.str();
        }
        if (e < s.b_s_max_mwh - kEnergyTol &&
            d.self_discharge_mwh[static_cast<std::size_t>(i)] > kEnergyTol) {
            std::ostringstream os;
            os << "guard: mg " << i << " discharges "
               << d.self_discharge_mwh[static_cast<std::size_t>(i)] << " with E=" << e
               << " < b_s_max = " << s.b_s_max_mwh;
            return os.str();
        }
    }
    return std::nullopt;
}

/// One drift-plus-penalty step: build the slot LP, solve, recover the macro
/// draw. The result is feasible for the original battery constraints; that is
/// asserted, not assumed. For the explicit zero-battery scenario the LP
/// degenerates to the V-independent exchange-vs-macro dispatch.
inline SlotDecision lyapunov_decide(const LyapunovParams& params, const GridScenario& s,
                                    const MicrogridState& state, const SlotExogenous& exo) {
    const double v = s.has_battery() ? params.v : 1.0;
    const double theta = s.has_battery() ? params.theta : 0.0;
    const auto problem = build_slot_problem(v, theta, s, state, exo);
    auto solution = solve_slot(problem);
    solution.decision.macro_mwh = recover_macro_draw(solution.decision, exo);
    if (auto guard = check_charge_discharge_guards(s, state, solution.decision)) {
        std::ostringstream os;
        os << "lyapunov_decide: " << *guard << " (V=" << params.v << ", theta=" << params.theta
           << ")";
        throw InvariantFault(os.str());
    }
    return solution.decision;
}

/// Probabilistic sharing rule for two symmetric MGs with unit arrivals:
/// a lone surplus unit is shipped to a deficient neighbor with probability
/// alpha, otherwise stored (or discarded when the battery is full); deficits
/// without a transfer are served battery-first, then from the macro-grid.
inline SlotDecision alpha_policy_decide(double alpha, RandomStream& rng, const GridScenario& s,
                                        const MicrogridState& state, const SlotExogenous& exo) {
    if (s.n_mgs != 2) throw ValidationError("alpha_policy_decide: requires exactly 2 MGs");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ValidationError("alpha_policy_decide: alpha must lie in [0,1]");
    if (!s.arrival.is_discrete() || s.arrival.discrete().pmf.m() != 1)
        throw ValidationError("alpha_policy_decide: requires unit {-1,0,+1} arrivals");
    const double unit = s.arrival.discrete().unit_mwh;
    if (s.b_ex_max_mwh + kEnergyTol < unit)
        throw ValidationError("alpha_policy_decide: b_ex_max below one arrival unit");
    for (int i = 0; i < 2; ++i) {
        const double x = exo.excess_mwh[static_cast<std::size_t>(i)];
        const double l = exo.deficit_mwh[static_cast<std::size_t>(i)];
        if ((x > kEnergyTol && std::abs(x - unit) > kEnergyTol) ||
            (l > kEnergyTol && std::abs(l - unit) > kEnergyTol))
            throw ValidationError("alpha_policy_decide: arrivals are not unit-quantized");
    }

    auto d = SlotDecision::zeros(2);
    auto store = [&](int i) {
        d.charge_mwh[static_cast<std::size_t>(i)] =
            std::min({exo.excess_mwh[static_cast<std::size_t>(i)], s.y_max_mwh,
                      s.e_max_mwh - state.energy_mwh[static_cast<std::size_t>(i)]});
    };
    auto serve = [&](int i) {
        const double from_battery =
            std::min({exo.deficit_mwh[static_cast<std::size_t>(i)], s.b_s_max_mwh,
                      state.energy_mwh[static_cast<std::size_t>(i)]});
        d.self_discharge_mwh[static_cast<std::size_t>(i)] = from_battery;
        d.macro_mwh[static_cast<std::size_t>(i)] =
            exo.deficit_mwh[static_cast<std::size_t>(i)] - from_battery;
    };

    const bool surplus0 = exo.excess_mwh[0] > kEnergyTol;
    const bool surplus1 = exo.excess_mwh[1] > kEnergyTol;
    const bool deficit0 = exo.deficit_mwh[0] > kEnergyTol;
    const bool deficit1 = exo.deficit_mwh[1] > kEnergyTol;

    if (surplus0 && deficit1) {
        if (rng.bernoulli(alpha)) {
            d.exchange(0, 1) = unit;
        } else {
            store(0);
            serve(1);
        }
    } else if (surplus1 && deficit0) {
        if (rng.bernoulli(alpha)) {
            d.exchange(1, 0) = unit;
        } else {
            store(1);
            serve(0);
        }
    } else {
        if (surplus0) store(0);
        if (surplus1) store(1);
        if (deficit0) serve(0);
        if (deficit1) serve(1);
    }
    return d;
}

/// Greedy baseline: store what fits, discharge what is available, buy the
/// rest; never exchanges.
inline SlotDecision no_coop_decide(const GridScenario& s, const MicrogridState& state,
                                   const SlotExogenous& exo) {
    auto d = SlotDecision::zeros(s.n_mgs);
    for (int i = 0; i < s.n_mgs; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        d.charge_mwh[ui] = std::min(
            {exo.excess_mwh[ui], s.y_max_mwh, s.e_max_mwh - state.energy_mwh[ui]});
        d.self_discharge_mwh[ui] =
            std::min({exo.deficit_mwh[ui], s.b_s_max_mwh, state.energy_mwh[ui]});
        d.macro_mwh[ui] = exo.deficit_mwh[ui] - d.self_discharge_mwh[ui];
    }
    return d;
}

/// Value-semantic controller selection, dispatched per slot by the engine.
struct Controller {
    enum class Type { Lyapunov, AlphaPolicy, NoCoop };

    Type type = Type::NoCoop;
    LyapunovParams lyapunov{};
    double alpha = 0.0;

    static Controller make_lyapunov(const GridScenario& s,
                                    std::optional<double> v = std::nullopt) {
        Controller c;
        c.type = Type::Lyapunov;
        c.lyapunov = s.has_battery() ? LyapunovParams::for_scenario(s, v)
                                     : LyapunovParams::unchecked(1.0, 0.0);
        return c;
    }
    static Controller make_alpha(double alpha) {
        Controller c;
        c.type = Type::AlphaPolicy;
        c.alpha = alpha;
        return c;
    }
    static Controller make_no_coop() { return Controller{}; }
};

inline SlotDecision decide(const Controller& c, const GridScenario& s,
                           const MicrogridState& state, const SlotExogenous& exo,
                           RandomStream& policy_rng) {
    switch (c.type) {
        case Controller::Type::Lyapunov: return lyapunov_decide(c.lyapunov, s, state, exo);
        case Controller::Type::AlphaPolicy:
            return alpha_policy_decide(c.alpha, policy_rng, s, state, exo);
        case Controller::Type::NoCoop: return no_coop_decide(s, state, exo);
    }
    throw ValidationError("decide: unknown controller type");
}

}  // namespace mgsim
