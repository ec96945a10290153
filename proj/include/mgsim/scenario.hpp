// SPDX-License-Identifier: Apache-2.0
#pragma once

// Grid instance generation and experiment configuration: random farm
// geometry, distance-proportional or constant prices, excess-energy arrival
// sampling, and the JSON config schema (every unit spelled out in the field
// names).

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgsim/domain.hpp"
#include "mgsim/excess_pmf.hpp"
#include "mgsim/rng.hpp"

namespace mgsim {

// ---------------------------------------------------------------------------
// Geometry and prices
// ---------------------------------------------------------------------------

/// MG positions drawn i.i.d. uniform on [0, side]^2.
inline std::vector<std::array<double, 2>> sample_snapshot(RandomStream& rng, int n,
                                                          double farm_side_km) {
    if (n < 1) throw ValidationError("sample_snapshot: n must be >= 1");
    if (!(farm_side_km > 0.0)) throw ValidationError("sample_snapshot: side must be > 0");
    std::vector<std::array<double, 2>> pos(static_cast<std::size_t>(n));
    for (auto& p : pos) {
        p[0] = rng.uniform(0.0, farm_side_km);
        p[1] = rng.uniform(0.0, farm_side_km);
    }
    return pos;
}

inline double euclidean(const std::array<double, 2>& a, const std::array<double, 2>& b) {
    return std::hypot(a[0] - b[0], a[1] - b[1]);
}

struct PriceTable {
    std::vector<double> exchange;  // n x n row-major, zero diagonal
    std::vector<double> macro;     // per MG
    double p_max = 0.0;
    double q_max = 0.0;
};

/// p_ij = beta * d_ij, q_i = beta * D_i, with the realized maxima recorded.
inline PriceTable distance_prices(double beta, const std::vector<std::array<double, 2>>& positions,
                                  const std::array<double, 2>& macro_position) {
    if (!(beta > 0.0)) throw ValidationError("distance_prices: beta must be > 0");
    const int n = static_cast<int>(positions.size());
    PriceTable t;
    t.exchange.assign(static_cast<std::size_t>(n) * n, 0.0);
    t.macro.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const double p = beta * euclidean(positions[static_cast<std::size_t>(i)],
                                              positions[static_cast<std::size_t>(j)]);
            t.exchange[static_cast<std::size_t>(i) * n + j] = p;
            t.p_max = std::max(t.p_max, p);
        }
        const double q = beta * euclidean(positions[static_cast<std::size_t>(i)], macro_position);
        t.macro[static_cast<std::size_t>(i)] = q;
        t.q_max = std::max(t.q_max, q);
    }
    return t;
}

/// Distance-independent prices (the storage-requirement study uses p = beta,
/// q = 3 beta).
inline PriceTable constant_prices(int n, double p_value, double q_value) {
    if (p_value < 0.0 || q_value < 0.0) throw ValidationError("constant_prices: negative price");
    PriceTable t;
    t.exchange.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) t.exchange[static_cast<std::size_t>(i) * n + j] = p_value;
    t.macro.assign(static_cast<std::size_t>(n), q_value);
    t.p_max = n > 1 ? p_value : 0.0;
    t.q_max = q_value;
    return t;
}

// ---------------------------------------------------------------------------
// Arrival sampling
// ---------------------------------------------------------------------------

/// One slot of signed excess arrivals X~_i, i.i.d. across time. MGs are
/// independent by default; the truncated-normal shared_weight knob makes all
/// MGs reuse a single draw with that probability (marginals unchanged).
inline std::vector<double> sample_excess(RandomStream& rng, const ArrivalSpec& spec, int n) {
    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    if (spec.is_discrete()) {
        const auto& d = spec.discrete();
        for (auto& v : x)
            v = d.unit_mwh * (static_cast<int>(rng.pick(d.pmf.probs())) - d.pmf.m());
        return x;
    }
    const auto& tn = spec.truncated_normal();
    const bool shared = tn.shared_weight > 0.0 && rng.bernoulli(tn.shared_weight);
    if (shared) {
        const double common = rng.truncated_normal(tn.sigma_mwh, tn.lower_mwh, tn.upper_mwh);
        std::fill(x.begin(), x.end(), common);
    } else {
        for (auto& v : x) v = rng.truncated_normal(tn.sigma_mwh, tn.lower_mwh, tn.upper_mwh);
    }
    return x;
}

/// Realizes one slot: X_i = L_i + X~_i, split into excess/deficit, prices
/// copied from the scenario (constant across slots in this artifact).
inline SlotExogenous make_exogenous(const GridScenario& s, const std::vector<double>& signed_excess) {
    SlotExogenous exo;
    exo.load_mwh = s.load_mwh;
    exo.harvest_mwh.resize(static_cast<std::size_t>(s.n_mgs));
    for (int i = 0; i < s.n_mgs; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        exo.harvest_mwh[ui] = std::max(s.load_mwh[ui] + signed_excess[ui], 0.0);
    }
    auto [excess, deficit] = split_excess_deficit(exo.harvest_mwh, exo.load_mwh);
    exo.excess_mwh = std::move(excess);
    exo.deficit_mwh = std::move(deficit);
    exo.exchange_price = s.exchange_price;
    exo.macro_price = s.macro_price;
    return exo;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

/// Template from which per-snapshot GridScenario instances are built.
struct ScenarioConfig {
    int n_mgs = 1;
    double farm_side_km = 10.0;
    std::array<double, 2> macro_position_km{20.0, 20.0};
    double beta_per_km = 1.0;

    enum class PriceMode { Distance, Constant } price_mode = PriceMode::Distance;
    double constant_p_per_mwh = 1.0;
    double constant_q_per_mwh = 3.0;

    double load_mw = 10.0;
    double e_max_mwh = 0.0;
    double y_max_mw = 0.0;
    double b_s_max_mw = 0.0;
    double b_ex_max_mw = 10.0;
    double initial_energy_mwh = 0.0;
    ArrivalSpec arrival;

    /// Fixed positions override (tests and single-snapshot studies).
    std::optional<std::vector<std::array<double, 2>>> fixed_positions_km;
};

enum class ControllerKind { Lyapunov, AlphaPolicy, NoCoop };

struct ControllerChoice {
    ControllerKind kind = ControllerKind::Lyapunov;
    std::optional<double> v;  // empty means max_v(scenario)
    double alpha = 0.0;
};

struct ExperimentConfig {
    ScenarioConfig scenario;
    ControllerChoice controller;
    long long horizon_slots = 1;
    int replications = 1;
    std::uint64_t seed = 0;
    double burn_in_fraction = 0.0;
    int invariant_check_stride = 1;
    bool write_trace = false;
    std::string out_dir;  // default output directory; the CLI --out wins

    std::string sweep_parameter;       // optional single-parameter sweep
    std::vector<double> sweep_values;

    std::string digest;  // stable hash of the source JSON, stamped into outputs
};

/// Stable digest of the canonical config serialization (FNV-1a, hex).
inline std::string config_digest(const nlohmann::json& j) {
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

/// Instantiates one grid snapshot from the template. Geometry comes from the
/// stream unless fixed positions are configured.
inline GridScenario build_scenario(const ScenarioConfig& cfg, RandomStream& geometry_rng) {
    GridScenario s;
    s.n_mgs = cfg.n_mgs;
    s.macro_position_km = cfg.macro_position_km;
    s.beta = cfg.beta_per_km;
    s.positions_km = cfg.fixed_positions_km
                         ? *cfg.fixed_positions_km
                         : sample_snapshot(geometry_rng, cfg.n_mgs, cfg.farm_side_km);
    if (static_cast<int>(s.positions_km.size()) != cfg.n_mgs)
        throw ValidationError("scenario: fixed positions size mismatch");
    const PriceTable prices =
        cfg.price_mode == ScenarioConfig::PriceMode::Distance
            ? distance_prices(cfg.beta_per_km, s.positions_km, s.macro_position_km)
            : constant_prices(cfg.n_mgs, cfg.constant_p_per_mwh, cfg.constant_q_per_mwh);
    s.exchange_price = prices.exchange;
    s.macro_price = prices.macro;
    s.p_max = prices.p_max;
    s.q_max = prices.q_max;
    s.load_mwh.assign(static_cast<std::size_t>(cfg.n_mgs), cfg.load_mw);
    s.l_max = cfg.load_mw;
    s.e_max_mwh = cfg.e_max_mwh;
    s.y_max_mwh = cfg.y_max_mw;
    s.b_s_max_mwh = cfg.b_s_max_mw;
    s.b_ex_max_mwh = cfg.b_ex_max_mw;
    s.initial_energy_mwh = cfg.initial_energy_mwh;
    s.arrival = cfg.arrival;
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// JSON parsing
// ---------------------------------------------------------------------------

namespace cfgdetail {

using nlohmann::json;

template <typename T>
T require(const json& j, const std::string& field) {
    if (!j.contains(field)) throw ValidationError("config field '" + field + "': missing");
    try {
        return j.at(field).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError("config field '" + field + "': " + e.what());
    }
}

template <typename T>
T optional_or(const json& j, const std::string& field, T fallback) {
    if (!j.contains(field)) return fallback;
    try {
        return j.at(field).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError("config field '" + field + "': " + e.what());
    }
}

inline ArrivalSpec parse_arrival(const json& j, double load_mw) {
    ArrivalSpec spec;
    const auto type = require<std::string>(j, "type");
    if (type == "truncated_normal") {
        TruncatedNormalArrival tn;
        double sigma = require<double>(j, "sigma_mw");
        if (optional_or<bool>(j, "sigma_is_variance", false)) sigma = std::sqrt(sigma);
        tn.sigma_mwh = sigma;
        // bounds default to +-L so the harvest X = L + X~ stays nonnegative
        tn.lower_mwh = optional_or<double>(j, "lower_mw", -load_mw);
        tn.upper_mwh = optional_or<double>(j, "upper_mw", load_mw);
        tn.shared_weight = optional_or<double>(j, "shared_weight", 0.0);
        spec.dist = tn;
    } else if (type == "discrete") {
        const double unit = optional_or<double>(j, "unit_mwh", 1.0);
        if (j.contains("probs")) {
            const auto& probs = j.at("probs");
            int m = 0;
            for (auto it = probs.begin(); it != probs.end(); ++it)
                m = std::max(m, std::abs(std::stoi(it.key())));
            std::vector<double> pv(static_cast<std::size_t>(2 * m + 1), 0.0);
            for (auto it = probs.begin(); it != probs.end(); ++it)
                pv[static_cast<std::size_t>(std::stoi(it.key()) + m)] = it.value().get<double>();
            try {
                spec.dist = DiscreteArrival{ExcessPmf(m, std::move(pv)), unit};
            } catch (const std::invalid_argument& e) {
                throw ValidationError(std::string("config field 'arrival.probs': ") + e.what());
            }
        } else {
            const double a = require<double>(j, "up_prob");
            const double d = require<double>(j, "down_prob");
            try {
                spec.dist = DiscreteArrival{ExcessPmf::simple(a, d), unit};
            } catch (const std::invalid_argument& e) {
                throw ValidationError(std::string("config field 'arrival': ") + e.what());
            }
        }
    } else {
        throw ValidationError("config field 'arrival.type': unknown type '" + type + "'");
    }
    spec.validate();
    return spec;
}

inline ScenarioConfig parse_scenario(const json& j) {
    ScenarioConfig c;
    c.n_mgs = require<int>(j, "n_mgs");
    c.farm_side_km = optional_or<double>(j, "farm_side_km", 10.0);
    if (j.contains("macro_position_km")) {
        const auto v = require<std::vector<double>>(j, "macro_position_km");
        if (v.size() != 2) throw ValidationError("config field 'macro_position_km': need [x, y]");
        c.macro_position_km = {v[0], v[1]};
    }
    c.beta_per_km = optional_or<double>(j, "beta_per_km", 1.0);
    const auto mode = optional_or<std::string>(j, "price_mode", "distance");
    if (mode == "distance")
        c.price_mode = ScenarioConfig::PriceMode::Distance;
    else if (mode == "constant")
        c.price_mode = ScenarioConfig::PriceMode::Constant;
    else
        throw ValidationError("config field 'price_mode': expected 'distance' or 'constant'");
    c.constant_p_per_mwh = optional_or<double>(j, "constant_p_per_mwh", c.beta_per_km);
    c.constant_q_per_mwh = optional_or<double>(j, "constant_q_per_mwh", 3.0 * c.beta_per_km);
    c.load_mw = optional_or<double>(j, "load_mw", 10.0);
    c.e_max_mwh = require<double>(j, "e_max_mwh");
    c.y_max_mw = require<double>(j, "y_max_mw");
    c.b_s_max_mw = require<double>(j, "b_s_max_mw");
    c.b_ex_max_mw = optional_or<double>(j, "b_ex_max_mw", 10.0);
    c.initial_energy_mwh = optional_or<double>(j, "initial_energy_mwh", 0.0);
    if (!j.contains("arrival")) throw ValidationError("config field 'arrival': missing");
    c.arrival = parse_arrival(j.at("arrival"), c.load_mw);
    if (j.contains("positions_km")) {
        const auto rows = require<std::vector<std::vector<double>>>(j, "positions_km");
        std::vector<std::array<double, 2>> pos;
        for (const auto& r : rows) {
            if (r.size() != 2) throw ValidationError("config field 'positions_km': need [x, y] rows");
            pos.push_back({r[0], r[1]});
        }
        c.fixed_positions_km = std::move(pos);
    }
    return c;
}

inline ControllerChoice parse_controller(const json& j) {
    ControllerChoice c;
    const auto type = require<std::string>(j, "type");
    if (type == "lyapunov") {
        c.kind = ControllerKind::Lyapunov;
        if (j.contains("v") && j.at("v").is_number()) c.v = j.at("v").get<double>();
        // "v": "max" (or omitted) selects max_v per scenario
    } else if (type == "alpha") {
        c.kind = ControllerKind::AlphaPolicy;
        c.alpha = require<double>(j, "alpha");
    } else if (type == "no_coop") {
        c.kind = ControllerKind::NoCoop;
    } else {
        throw ValidationError("config field 'controller.type': unknown type '" + type + "'");
    }
    return c;
}

}  // namespace cfgdetail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    using cfgdetail::optional_or;
    using cfgdetail::require;
    ExperimentConfig cfg;
    if (!j.contains("seed")) throw ValidationError("config field 'seed': missing (required)");
    cfg.seed = require<std::uint64_t>(j, "seed");
    cfg.horizon_slots = require<long long>(j, "horizon_slots");
    if (cfg.horizon_slots < 1) throw ValidationError("config field 'horizon_slots': must be >= 1");
    cfg.replications = optional_or<int>(j, "replications", 1);
    if (cfg.replications < 1) throw ValidationError("config field 'replications': must be >= 1");
    cfg.burn_in_fraction = optional_or<double>(j, "burn_in_fraction", 0.0);
    if (cfg.burn_in_fraction < 0.0 || cfg.burn_in_fraction >= 1.0)
        throw ValidationError("config field 'burn_in_fraction': must lie in [0, 1)");
    cfg.invariant_check_stride = optional_or<int>(j, "invariant_check_stride", 1);
    if (cfg.invariant_check_stride < 1)
        throw ValidationError("config field 'invariant_check_stride': must be >= 1");
    cfg.write_trace = optional_or<bool>(j, "write_trace", false);
    cfg.out_dir = optional_or<std::string>(j, "out_dir", "");
    if (!j.contains("scenario")) throw ValidationError("config field 'scenario': missing");
    cfg.scenario = cfgdetail::parse_scenario(j.at("scenario"));
    if (!j.contains("controller")) throw ValidationError("config field 'controller': missing");
    cfg.controller = cfgdetail::parse_controller(j.at("controller"));
    if (j.contains("sweep")) {
        cfg.sweep_parameter = require<std::string>(j.at("sweep"), "parameter");
        cfg.sweep_values = require<std::vector<double>>(j.at("sweep"), "values");
        if (cfg.sweep_values.empty())
            throw ValidationError("config field 'sweep.values': must be non-empty");
    }

    // probe build: every scenario invariant is enforced at load time
    RandomStream probe(derive_seed(cfg.seed, {0}));
    (void)build_scenario(cfg.scenario, probe);
    cfg.digest = config_digest(j);
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config: parse error in '" + path + "': " + e.what());
    }
    return parse_config(j);
}

}  // namespace mgsim
