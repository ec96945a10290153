// SPDX-License-Identifier: Apache-2.0
#pragma once

// Physical quantities, feasibility rules, battery dynamics and cost
// accounting for a grid of cooperating microgrids.
//
// Units: one slot is one hour by convention, so MW and MWh-per-slot are
// numerically interchangeable. All energies are MWh, prices money/MWh,
// distances km.

#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mgsim/excess_pmf.hpp"

namespace mgsim {

/// Absolute tolerance for equality/feasibility checks on energy quantities.
inline constexpr double kEnergyTol = 1e-9;

/// Input that fails domain validation (bad config, bad argument).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Internal contract broken (controller or solver bug), not a data error.
class InvariantFault : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// ---------------------------------------------------------------------------
// Arrival process description
// ---------------------------------------------------------------------------

/// Integer-unit excess arrivals: X~ = unit_mwh * K with K ~ pmf.
struct DiscreteArrival {
    ExcessPmf pmf;
    double unit_mwh = 1.0;
};

/// Zero-mean normal excess arrivals conditioned on [lower, upper].
/// shared_weight is a correlation hook: with that probability all MGs in a
/// slot share one draw (comonotone mixture, marginals unchanged). Default off.
struct TruncatedNormalArrival {
    double sigma_mwh = 3.0;
    double lower_mwh = -10.0;
    double upper_mwh = 10.0;
    double shared_weight = 0.0;
};

struct ArrivalSpec {
    std::variant<TruncatedNormalArrival, DiscreteArrival> dist{TruncatedNormalArrival{}};

    bool is_discrete() const { return std::holds_alternative<DiscreteArrival>(dist); }
    const DiscreteArrival& discrete() const { return std::get<DiscreteArrival>(dist); }
    const TruncatedNormalArrival& truncated_normal() const {
        return std::get<TruncatedNormalArrival>(dist);
    }

    void validate() const {
        if (const auto* tn = std::get_if<TruncatedNormalArrival>(&dist)) {
            if (!(tn->sigma_mwh > 0.0)) throw ValidationError("arrival: sigma must be > 0");
            if (!(tn->lower_mwh < 0.0 && tn->upper_mwh > 0.0))
                throw ValidationError("arrival: truncation bounds must straddle 0");
            if (tn->shared_weight < 0.0 || tn->shared_weight > 1.0)
                throw ValidationError("arrival: shared_weight must lie in [0,1]");
        } else {
            const auto& d = std::get<DiscreteArrival>(dist);
            if (!(d.unit_mwh > 0.0)) throw ValidationError("arrival: unit_mwh must be > 0");
            // pmf validated on construction
        }
    }
};

// ---------------------------------------------------------------------------
// Static grid description
// ---------------------------------------------------------------------------

/// One grid instance: geometry, prices, capacities and the arrival process.
struct GridScenario {
    int n_mgs = 1;
    std::vector<std::array<double, 2>> positions_km;  // per MG
    std::array<double, 2> macro_position_km{20.0, 20.0};
    double beta = 1.0;  // price per unit per km

    std::vector<double> exchange_price;  // row-major n x n, money/MWh, diagonal unused (0)
    std::vector<double> macro_price;     // q_i, money/MWh
    double p_max = 0.0;                  // recorded bound over p_ij
    double q_max = 0.0;                  // recorded bound over q_i

    std::vector<double> load_mwh;  // L_i per slot
    double l_max = 0.0;

    double e_max_mwh = 0.0;    // battery capacity
    double y_max_mwh = 0.0;    // max charge per slot
    double b_s_max_mwh = 0.0;  // max self-discharge per slot
    double b_ex_max_mwh = 0.0; // max pairwise exchange per slot

    ArrivalSpec arrival;
    double slot_hours = 1.0;
    double initial_energy_mwh = 0.0;

    double p(int i, int j) const { return exchange_price[static_cast<std::size_t>(i) * n_mgs + j]; }
    double q(int i) const { return macro_price[static_cast<std::size_t>(i)]; }

    /// True unless this is the explicit no-storage configuration.
    bool has_battery() const { return e_max_mwh > 0.0; }

    void validate() const {
        if (n_mgs < 1) throw ValidationError("scenario: n_mgs must be >= 1");
        const auto n = static_cast<std::size_t>(n_mgs);
        if (positions_km.size() != n) throw ValidationError("scenario: positions size mismatch");
        if (exchange_price.size() != n * n)
            throw ValidationError("scenario: exchange_price must be n*n");
        if (macro_price.size() != n) throw ValidationError("scenario: macro_price size mismatch");
        if (load_mwh.size() != n) throw ValidationError("scenario: load size mismatch");
        for (double v : exchange_price)
            if (!(v >= 0.0) || !std::isfinite(v))
                throw ValidationError("scenario: exchange prices must be nonnegative and finite");
        for (double v : macro_price)
            if (!(v >= 0.0) || !std::isfinite(v))
                throw ValidationError("scenario: macro prices must be nonnegative and finite");
        for (int i = 0; i < n_mgs; ++i)
            for (int j = 0; j < n_mgs; ++j)
                if (p(i, j) > p_max + kEnergyTol)
                    throw ValidationError("scenario: p_ij exceeds recorded p_max");
        for (int i = 0; i < n_mgs; ++i)
            if (q(i) > q_max + kEnergyTol)
                throw ValidationError("scenario: q_i exceeds recorded q_max");
        for (double v : load_mwh) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("scenario: loads must be >= 0");
            if (v > l_max + kEnergyTol) throw ValidationError("scenario: L_i exceeds recorded L_max");
        }
        if (e_max_mwh < 0.0 || y_max_mwh < 0.0 || b_s_max_mwh < 0.0 || b_ex_max_mwh < 0.0)
            throw ValidationError("scenario: capacities must be nonnegative");
        const bool zero_battery = e_max_mwh == 0.0 && y_max_mwh == 0.0 && b_s_max_mwh == 0.0;
        if (!zero_battery && !(e_max_mwh > y_max_mwh + b_s_max_mwh))
            throw ValidationError(
                "scenario: battery capacity must satisfy e_max > y_max + b_s_max "
                "(or be the explicit zero-battery case)");
        if (initial_energy_mwh < -kEnergyTol || initial_energy_mwh > e_max_mwh + kEnergyTol)
            throw ValidationError("scenario: initial battery level outside [0, e_max]");
        if (!(slot_hours > 0.0)) throw ValidationError("scenario: slot_hours must be > 0");
        arrival.validate();
    }
};

// ---------------------------------------------------------------------------
// Per-slot state and data
// ---------------------------------------------------------------------------

/// Battery levels E_i, the only controller-relevant state.
struct MicrogridState {
    std::vector<double> energy_mwh;

    static MicrogridState initial(const GridScenario& s) {
        return MicrogridState{std::vector<double>(static_cast<std::size_t>(s.n_mgs),
                                                  s.initial_energy_mwh)};
    }
};

/// One slot's realized arrivals, loads, prices and the excess/deficit split.
struct SlotExogenous {
    std::vector<double> harvest_mwh;   // X_i
    std::vector<double> load_mwh;      // L_i
    std::vector<double> excess_mwh;    // (X_i - L_i)^+
    std::vector<double> deficit_mwh;   // (L_i - X_i)^+
    std::vector<double> exchange_price;  // p_ij for the slot, row-major
    std::vector<double> macro_price;     // q_i for the slot

    double p(int i, int j) const {
        return exchange_price[static_cast<std::size_t>(i) * macro_price.size() + j];
    }
    double q(int i) const { return macro_price[static_cast<std::size_t>(i)]; }
};

/// Control action for one slot.
struct SlotDecision {
    std::vector<double> charge_mwh;          // Y_i
    std::vector<double> self_discharge_mwh;  // B_ii
    std::vector<double> exchange_mwh;        // B_ij row-major, diagonal 0
    std::vector<double> macro_mwh;           // G_i

    static SlotDecision zeros(int n) {
        const auto un = static_cast<std::size_t>(n);
        return SlotDecision{std::vector<double>(un, 0.0), std::vector<double>(un, 0.0),
                            std::vector<double>(un * un, 0.0), std::vector<double>(un, 0.0)};
    }

    int n() const { return static_cast<int>(charge_mwh.size()); }
    double exchange(int i, int j) const {
        return exchange_mwh[static_cast<std::size_t>(i) * charge_mwh.size() + j];
    }
    double& exchange(int i, int j) {
        return exchange_mwh[static_cast<std::size_t>(i) * charge_mwh.size() + j];
    }
    /// Total energy shipped into MG j from other MGs.
    double received(int j) const {
        double sum = 0.0;
        for (int i = 0; i < n(); ++i)
            if (i != j) sum += exchange(i, j);
        return sum;
    }
    /// Total energy shipped out of MG i to other MGs.
    double sent(int i) const {
        double sum = 0.0;
        for (int j = 0; j < n(); ++j)
            if (j != i) sum += exchange(i, j);
        return sum;
    }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Splits harvest/load into (excess, deficit) positive parts.
inline std::pair<std::vector<double>, std::vector<double>> split_excess_deficit(
    const std::vector<double>& harvest, const std::vector<double>& load) {
    if (harvest.size() != load.size())
        throw ValidationError("split_excess_deficit: size mismatch");
    std::vector<double> excess(harvest.size()), deficit(harvest.size());
    for (std::size_t i = 0; i < harvest.size(); ++i) {
        if (!(harvest[i] >= 0.0) || !(load[i] >= 0.0))
            throw ValidationError("split_excess_deficit: inputs must be nonnegative");
        excess[i] = std::max(harvest[i] - load[i], 0.0);
        deficit[i] = std::max(load[i] - harvest[i], 0.0);
    }
    return {std::move(excess), std::move(deficit)};
}

enum class ViolationKind {
    SourceBudget,     // Y_i + sum_j B_ij > x~_i
    Balance,          // B_ii + sum_j B_ji + G_i != l~_i
    DischargeBounds,  // B_ii outside [0, min(E_i, b_s_max)]
    ChargeBounds,     // Y_i outside [0, min(e_max - E_i, y_max)]
    ExchangeBounds,   // B_ij outside [0, b_ex_max]
    ExchangeWithoutExcess,  // B_ij > 0 while x~_i == 0
    NegativeMacro,    // G_i < 0
};

inline const char* to_string(ViolationKind k) {
    switch (k) {
        case ViolationKind::SourceBudget: return "source-budget";
        case ViolationKind::Balance: return "balance";
        case ViolationKind::DischargeBounds: return "discharge-bounds";
        case ViolationKind::ChargeBounds: return "charge-bounds";
        case ViolationKind::ExchangeBounds: return "exchange-bounds";
        case ViolationKind::ExchangeWithoutExcess: return "exchange-without-excess";
        case ViolationKind::NegativeMacro: return "negative-macro";
    }
    return "?";
}

struct Violation {
    ViolationKind kind;
    int mg = -1;
    int other = -1;      // second MG for pairwise constraints
    double slack = 0.0;  // signed amount by which the constraint is missed
};

/// Infeasibility is data, not failure: an empty report means feasible.
struct ViolationReport {
    std::vector<Violation> items;

    bool ok() const { return items.empty(); }

    std::string describe() const {
        std::ostringstream os;
        for (const auto& v : items) {
            os << to_string(v.kind) << " mg=" << v.mg;
            if (v.other >= 0) os << " other=" << v.other;
            os << " slack=" << v.slack << '\n';
        }
        return os.str();
    }
};

/// Checks every per-slot feasibility constraint of a completed decision
/// (macro draw included) against the original problem.
inline ViolationReport validate_decision(const GridScenario& s, const MicrogridState& state,
                                         const SlotExogenous& exo, const SlotDecision& d) {
    ViolationReport report;
    const int n = s.n_mgs;
    if (d.n() != n || static_cast<int>(state.energy_mwh.size()) != n)
        throw ValidationError("validate_decision: dimension mismatch");
    auto flag = [&](ViolationKind k, int i, int j, double slack) {
        report.items.push_back(Violation{k, i, j, slack});
    };
    for (int i = 0; i < n; ++i) {
        const double used = d.charge_mwh[i] + d.sent(i);
        if (used > exo.excess_mwh[i] + kEnergyTol)
            flag(ViolationKind::SourceBudget, i, -1, used - exo.excess_mwh[i]);

        const double served = d.self_discharge_mwh[i] + d.received(i) + d.macro_mwh[i];
        if (std::abs(served - exo.deficit_mwh[i]) > kEnergyTol)
            flag(ViolationKind::Balance, i, -1, served - exo.deficit_mwh[i]);

        const double dis_cap = std::min(state.energy_mwh[i], s.b_s_max_mwh);
        if (d.self_discharge_mwh[i] < -kEnergyTol ||
            d.self_discharge_mwh[i] > dis_cap + kEnergyTol)
            flag(ViolationKind::DischargeBounds, i, -1, d.self_discharge_mwh[i] - dis_cap);

        const double chg_cap = std::min(s.e_max_mwh - state.energy_mwh[i], s.y_max_mwh);
        if (d.charge_mwh[i] < -kEnergyTol || d.charge_mwh[i] > chg_cap + kEnergyTol)
            flag(ViolationKind::ChargeBounds, i, -1, d.charge_mwh[i] - chg_cap);

        if (d.macro_mwh[i] < -kEnergyTol)
            flag(ViolationKind::NegativeMacro, i, -1, d.macro_mwh[i]);

        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double bij = d.exchange(i, j);
            if (bij < -kEnergyTol || bij > s.b_ex_max_mwh + kEnergyTol)
                flag(ViolationKind::ExchangeBounds, i, j, bij - s.b_ex_max_mwh);
            if (bij > kEnergyTol && exo.excess_mwh[i] <= kEnergyTol)
                flag(ViolationKind::ExchangeWithoutExcess, i, j, bij);
        }
    }
    return report;
}

/// Advances battery levels by E_i' = E_i - B_ii + Y_i, exactly.
/// A result outside [0, e_max] beyond tolerance signals a controller bug.
inline MicrogridState battery_step(const GridScenario& s, const MicrogridState& state,
                                   const SlotDecision& d) {
    MicrogridState next = state;
    for (int i = 0; i < s.n_mgs; ++i) {
        double e = state.energy_mwh[i] - d.self_discharge_mwh[i] + d.charge_mwh[i];
        if (e < -kEnergyTol || e > s.e_max_mwh + kEnergyTol)
            throw InvariantFault("battery_step: E_" + std::to_string(i) + " = " +
                                 std::to_string(e) + " escapes [0, e_max]");
        // snap roundoff at the physical boundaries, never more than kEnergyTol
        if (e < 0.0) e = 0.0;
        if (e > s.e_max_mwh) e = s.e_max_mwh;
        next.energy_mwh[i] = e;
    }
    return next;
}

/// Cost booked to each MG: q_i G_i + sum_j p_ji B_ji (receiver pays).
inline std::vector<double> slot_cost(const SlotDecision& d, const SlotExogenous& exo) {
    const int n = d.n();
    std::vector<double> cost(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double c = exo.q(i) * d.macro_mwh[i];
        for (int j = 0; j < n; ++j)
            if (j != i) c += exo.p(j, i) * d.exchange(j, i);
        cost[static_cast<std::size_t>(i)] = c;
    }
    return cost;
}

/// Running totals of money and energy moved, per MG and grid-wide.
struct CostLedger {
    std::vector<double> cumulative_money;  // per MG
    double total_money = 0.0;
    double macro_energy_mwh = 0.0;
    double exchanged_energy_mwh = 0.0;

    explicit CostLedger(int n) : cumulative_money(static_cast<std::size_t>(n), 0.0) {}

    void accumulate(const SlotDecision& d, const SlotExogenous& exo) {
        const auto costs = slot_cost(d, exo);
        for (std::size_t i = 0; i < costs.size(); ++i) {
            cumulative_money[i] += costs[i];
            total_money += costs[i];
        }
        for (double g : d.macro_mwh) macro_energy_mwh += g;
        for (int i = 0; i < d.n(); ++i) exchanged_energy_mwh += d.sent(i);
    }
};

}  // namespace mgsim
