// SPDX-License-Identifier: Apache-2.0
#pragma once

// Discrete-time engine coupling scenario, controller, battery dynamics and
// cost accounting. Invariants (feasibility, charge/discharge guards, battery
// bounds, the pathwise drift bound) are enforced online; any violation aborts
// the run with slot-level diagnostics. Replications aggregate over random
// snapshots; the storage search inverts cost(e_max) for a target.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mgsim/controllers.hpp"
#include "mgsim/domain.hpp"
#include "mgsim/rng.hpp"
#include "mgsim/scenario.hpp"

namespace mgsim {

struct SimOptions {
    long long horizon_slots = 1;
    int invariant_check_stride = 1;   // validate every k-th slot (1 = always)
    double burn_in_fraction = 0.0;    // cost accounting discards this prefix
    bool record_trace = false;
};

/// Per-slot snapshot kept when tracing is on.
struct SlotRecord {
    std::vector<double> energy_before;
    std::vector<double> excess, deficit;
    std::vector<double> charge, discharge, received, sent, macro, cost;
};

struct SimTrace {
    int n = 0;
    double theta = 0.0;
    double y_max = 0.0;
    double b_s_max = 0.0;
    std::vector<SlotRecord> slots;
    std::vector<double> final_energy;
};

struct SimReport {
    long long horizon = 0;
    long long burn_in_slots = 0;
    int n_mgs = 0;
    double total_cost = 0.0;     // over accounted slots
    double time_avg_cost = 0.0;  // total / accounted slots
    double normalized_cost = 0.0;  // time average per MG
    std::vector<double> per_mg_cost;
    std::vector<double> per_mg_macro_mwh;
    std::vector<double> per_mg_received_mwh;
    std::vector<double> per_mg_stored_mwh;
    std::vector<double> battery_min, battery_max, battery_mean;
    long long invariant_violations = 0;  // always 0 in a returned report
    std::uint64_t seed = 0;
    std::string config_digest;
};

/// Pathwise drift bound on a recorded trace:
///   Psi[t+1] - Psi[t] <= N C / 2 - sum_i E~_i (B_ii - Y_i),
/// with C = y_max^2 + b_s_max^2 and Psi = 1/2 sum (E_i - theta)^2.
struct DriftCheckResult {
    bool pass = true;
    double worst_slack = std::numeric_limits<double>::infinity();
    long long violations = 0;
};

inline double lyapunov_value(const std::vector<double>& energy, double theta) {
    double psi = 0.0;
    for (double e : energy) psi += 0.5 * (e - theta) * (e - theta);
    return psi;
}

inline DriftCheckResult check_drift_bound(const SimTrace& trace) {
    DriftCheckResult res;
    const double c = trace.y_max * trace.y_max + trace.b_s_max * trace.b_s_max;
    for (std::size_t t = 0; t < trace.slots.size(); ++t) {
        const auto& slot = trace.slots[t];
        const auto& next_energy =
            (t + 1 < trace.slots.size()) ? trace.slots[t + 1].energy_before : trace.final_energy;
        const double lhs =
            lyapunov_value(next_energy, trace.theta) - lyapunov_value(slot.energy_before, trace.theta);
        double rhs = 0.5 * trace.n * c;
        for (int i = 0; i < trace.n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            rhs -= (slot.energy_before[ui] - trace.theta) * (slot.discharge[ui] - slot.charge[ui]);
        }
        const double slack = rhs - lhs;
        res.worst_slack = std::min(res.worst_slack, slack);
        if (slack < -1e-9) {
            res.pass = false;
            ++res.violations;
        }
    }
    return res;
}

/// Runs one simulation. Strictly sequential across slots; deterministic for
/// fixed streams. Aborts with diagnostics if any invariant breaks.
inline SimReport run_simulation(const GridScenario& s, const Controller& controller,
                                const SimOptions& opt, RandomStream arrival_rng,
                                RandomStream policy_rng, SimTrace* trace = nullptr) {
    if (opt.horizon_slots < 1) throw ValidationError("run_simulation: horizon must be >= 1");
    const int n = s.n_mgs;
    const auto un = static_cast<std::size_t>(n);
    const double theta =
        controller.type == Controller::Type::Lyapunov ? controller.lyapunov.theta : 0.0;
    const double drift_const = s.y_max_mwh * s.y_max_mwh + s.b_s_max_mwh * s.b_s_max_mwh;

    MicrogridState state = MicrogridState::initial(s);
    CostLedger ledger(n);
    SimReport report;
    report.n_mgs = n;
    report.horizon = opt.horizon_slots;
    report.burn_in_slots = static_cast<long long>(
        std::floor(opt.burn_in_fraction * static_cast<double>(opt.horizon_slots)));
    report.per_mg_cost.assign(un, 0.0);
    report.per_mg_macro_mwh.assign(un, 0.0);
    report.per_mg_received_mwh.assign(un, 0.0);
    report.per_mg_stored_mwh.assign(un, 0.0);
    report.battery_min.assign(un, std::numeric_limits<double>::infinity());
    report.battery_max.assign(un, -std::numeric_limits<double>::infinity());
    report.battery_mean.assign(un, 0.0);

    if (trace) {
        trace->n = n;
        trace->theta = theta;
        trace->y_max = s.y_max_mwh;
        trace->b_s_max = s.b_s_max_mwh;
        trace->slots.clear();
        trace->slots.reserve(static_cast<std::size_t>(opt.horizon_slots));
    }

    auto fail = [&](long long t, const std::string& what) {
        std::ostringstream os;
        os << "invariant violation at slot " << t << ": " << what;
        throw InvariantFault(os.str());
    };

    for (long long t = 0; t < opt.horizon_slots; ++t) {
        const auto exo = make_exogenous(s, sample_excess(arrival_rng, s.arrival, n));
        const auto decision = decide(controller, s, state, exo, policy_rng);

        const bool check = (t % opt.invariant_check_stride) == 0;
        if (check) {
            const auto violations = validate_decision(s, state, exo, decision);
            if (!violations.ok()) fail(t, "infeasible decision\n" + violations.describe());
            if (auto guard = check_charge_discharge_guards(s, state, decision)) fail(t, *guard);
        }

        const auto costs = slot_cost(decision, exo);
        const bool accounted = t >= report.burn_in_slots;
        if (accounted) {
            for (int i = 0; i < n; ++i) {
                const auto ui = static_cast<std::size_t>(i);
                report.per_mg_cost[ui] += costs[ui];
                report.per_mg_macro_mwh[ui] += decision.macro_mwh[ui];
                report.per_mg_received_mwh[ui] += decision.received(i);
                report.per_mg_stored_mwh[ui] += decision.charge_mwh[ui];
                report.total_cost += costs[ui];
            }
            ledger.accumulate(decision, exo);
        }

        if (trace) {
            SlotRecord rec;
            rec.energy_before = state.energy_mwh;
            rec.excess = exo.excess_mwh;
            rec.deficit = exo.deficit_mwh;
            rec.charge = decision.charge_mwh;
            rec.discharge = decision.self_discharge_mwh;
            rec.macro = decision.macro_mwh;
            rec.cost = costs;
            rec.received.assign(un, 0.0);
            rec.sent.assign(un, 0.0);
            for (int i = 0; i < n; ++i) {
                rec.received[static_cast<std::size_t>(i)] = decision.received(i);
                rec.sent[static_cast<std::size_t>(i)] = decision.sent(i);
            }
            trace->slots.push_back(std::move(rec));
        }

        const double psi_before = lyapunov_value(state.energy_mwh, theta);
        double drift_rhs = 0.5 * n * drift_const;
        for (int i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            drift_rhs -= (state.energy_mwh[ui] - theta) *
                         (decision.self_discharge_mwh[ui] - decision.charge_mwh[ui]);
        }

        state = battery_step(s, state, decision);  // faults if E escapes [0, e_max]

        if (check) {
            const double psi_after = lyapunov_value(state.energy_mwh, theta);
            if (psi_after - psi_before > drift_rhs + 1e-9) {
                std::ostringstream os;
                os << "drift bound broken: dPsi=" << psi_after - psi_before
                   << " > bound=" << drift_rhs;
                fail(t, os.str());
            }
            for (int i = 0; i < n; ++i) {
                const double e = state.energy_mwh[static_cast<std::size_t>(i)];
                if (e < -kEnergyTol || e > s.e_max_mwh + kEnergyTol)
                    fail(t, "battery bound broken at mg " + std::to_string(i));
            }
        }

        for (int i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            report.battery_min[ui] = std::min(report.battery_min[ui], state.energy_mwh[ui]);
            report.battery_max[ui] = std::max(report.battery_max[ui], state.energy_mwh[ui]);
            report.battery_mean[ui] += state.energy_mwh[ui];
        }
    }

    if (trace) trace->final_energy = state.energy_mwh;
    const auto accounted =
        static_cast<double>(opt.horizon_slots - report.burn_in_slots);
    report.time_avg_cost = report.total_cost / accounted;
    report.normalized_cost = report.time_avg_cost / n;
    for (auto& m : report.battery_mean) m /= static_cast<double>(opt.horizon_slots);
    return report;
}

// ---------------------------------------------------------------------------
// Replications over random snapshots
// ---------------------------------------------------------------------------

namespace streams {
// substream tag roles under the master seed
inline constexpr std::uint64_t kGeometry = 1;
inline constexpr std::uint64_t kArrivals = 2;
inline constexpr std::uint64_t kPolicy = 3;
}  // namespace streams

inline Controller make_controller(const ControllerChoice& choice, const GridScenario& s) {
    switch (choice.kind) {
        case ControllerKind::Lyapunov: return Controller::make_lyapunov(s, choice.v);
        case ControllerKind::AlphaPolicy: return Controller::make_alpha(choice.alpha);
        case ControllerKind::NoCoop: return Controller::make_no_coop();
    }
    throw ValidationError("make_controller: unknown kind");
}

struct ReplicationSummary {
    std::vector<SimReport> reports;
    double mean_normalized = 0.0;
    double se_normalized = 0.0;
};

/// K independent snapshots with substreams derived from (seed, role, k); the
/// aggregation order is fixed by k, so results do not depend on `jobs`.
inline ReplicationSummary run_replications(const ScenarioConfig& scenario,
                                           const ControllerChoice& controller,
                                           const SimOptions& opt, std::uint64_t seed,
                                           int k_snapshots, int jobs = 1) {
    if (k_snapshots < 1) throw ValidationError("run_replications: need K >= 1");
    ReplicationSummary summary;
    summary.reports.resize(static_cast<std::size_t>(k_snapshots));

    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::atomic<bool> stop{false};
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int k = next.fetch_add(1);
            if (k >= k_snapshots || stop.load()) break;
            try {
                RandomStream geometry = substream(seed, {streams::kGeometry, static_cast<std::uint64_t>(k)});
                RandomStream arrivals = substream(seed, {streams::kArrivals, static_cast<std::uint64_t>(k)});
                RandomStream policy = substream(seed, {streams::kPolicy, static_cast<std::uint64_t>(k)});
                const GridScenario s = build_scenario(scenario, geometry);
                const Controller c = make_controller(controller, s);
                auto report = run_simulation(s, c, opt, arrivals, policy);
                report.seed = seed;
                summary.reports[static_cast<std::size_t>(k)] = std::move(report);
            } catch (...) {
                std::scoped_lock lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                stop.store(true);
                break;
            }
        }
    };

    const int n_threads = std::max(1, std::min(jobs, k_snapshots));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    double mean = 0.0;
    for (const auto& r : summary.reports) mean += r.normalized_cost;
    mean /= k_snapshots;
    double var = 0.0;
    for (const auto& r : summary.reports) {
        const double d = r.normalized_cost - mean;
        var += d * d;
    }
    var /= std::max(1, k_snapshots - 1);
    summary.mean_normalized = mean;
    summary.se_normalized = std::sqrt(var / k_snapshots);
    return summary;
}

// ---------------------------------------------------------------------------
// Storage requirement search
// ---------------------------------------------------------------------------

struct StorageProbe {
    double e_max_mwh = 0.0;
    double mean_cost = 0.0;
    double se = 0.0;
};

struct StorageSearchResult {
    bool reachable = false;
    double e_max_mwh = 0.0;
    double cost_at = 0.0;
    int replications_used = 0;
    std::vector<StorageProbe> probes;
};

struct StorageSearchOptions {
    double max_e_mwh = 512.0;
    double resolution_mwh = 0.5;
    double cap_ratio = 0.25;  // y_max = b_s_max = cap_ratio * e_max per probe
    int jobs = 1;
    int max_k_doublings = 2;  // widens K when the cost curve looks non-monotone
};

/// Smallest e_max on a geometric-then-bisection grid whose mean normalized
/// cost meets the target. Snapshots and arrivals reuse the same substreams at
/// every probed e_max (common random numbers), which keeps the empirical
/// curve monotone unless the noise is real.
inline StorageSearchResult storage_requirement_search(ScenarioConfig base,
                                                      const ControllerChoice& controller,
                                                      const SimOptions& opt, std::uint64_t seed,
                                                      int k_snapshots, double cost_target,
                                                      const StorageSearchOptions& search = {}) {
    StorageSearchResult result;
    int k = k_snapshots;

    auto evaluate = [&](double e) {
        ScenarioConfig cfg = base;
        cfg.e_max_mwh = e;
        cfg.y_max_mw = search.cap_ratio * e;
        cfg.b_s_max_mw = search.cap_ratio * e;
        const auto summary = run_replications(cfg, controller, opt, seed, k, search.jobs);
        return StorageProbe{e, summary.mean_normalized, summary.se_normalized};
    };

    std::vector<double> grid{0.0};
    for (double e = 1.0; e <= search.max_e_mwh; e *= 2.0) grid.push_back(e);

    for (int attempt = 0;; ++attempt) {
        result.probes.clear();
        for (double e : grid) result.probes.push_back(evaluate(e));
        bool monotone = true;
        for (std::size_t i = 0; i + 1 < result.probes.size(); ++i) {
            const double rise = result.probes[i + 1].mean_cost - result.probes[i].mean_cost;
            const double pooled =
                std::sqrt(result.probes[i].se * result.probes[i].se +
                          result.probes[i + 1].se * result.probes[i + 1].se);
            if (rise > 2.0 * pooled + kEnergyTol) monotone = false;
        }
        if (monotone || attempt >= search.max_k_doublings) break;
        k *= 2;
    }
    result.replications_used = k;

    std::size_t first_pass = result.probes.size();
    for (std::size_t i = 0; i < result.probes.size(); ++i) {
        if (result.probes[i].mean_cost <= cost_target) {
            first_pass = i;
            break;
        }
    }
    if (first_pass == result.probes.size()) return result;  // unreachable on probed range

    if (first_pass == 0) {
        result.reachable = true;
        result.e_max_mwh = result.probes[0].e_max_mwh;
        result.cost_at = result.probes[0].mean_cost;
        return result;
    }

    double lo = result.probes[first_pass - 1].e_max_mwh;  // fails target
    double hi = result.probes[first_pass].e_max_mwh;      // meets target
    double cost_hi = result.probes[first_pass].mean_cost;
    while (hi - lo > search.resolution_mwh) {
        const double mid = 0.5 * (lo + hi);
        const auto probe = evaluate(mid);
        result.probes.push_back(probe);
        if (probe.mean_cost <= cost_target) {
            hi = mid;
            cost_hi = probe.mean_cost;
        } else {
            lo = mid;
        }
    }
    result.reachable = true;
    result.e_max_mwh = hi;
    result.cost_at = cost_hi;
    return result;
}

}  // namespace mgsim
