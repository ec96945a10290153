// SPDX-License-Identifier: Apache-2.0
#pragma once

// Steady-state battery models: clipped random-walk Markov chains, their
// stationary distributions (numeric and closed form), and the analytic
// costs of the single-MG and symmetric two-MG sharing policies.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgsim/domain.hpp"
#include "mgsim/excess_pmf.hpp"

namespace mgsim {

// ---------------------------------------------------------------------------
// Transition matrices and stationary distributions
// ---------------------------------------------------------------------------

struct TransitionMatrix {
    int n = 0;
    std::vector<double> a;  // row-major

    static TransitionMatrix zero(int n) {
        return TransitionMatrix{n, std::vector<double>(static_cast<std::size_t>(n) * n, 0.0)};
    }
    double at(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
    double& at(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }

    double max_row_sum_error() const {
        double worst = 0.0;
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += at(i, j);
            worst = std::max(worst, std::abs(s - 1.0));
        }
        return worst;
    }
};

/// Chain of the battery level under E' = min(max(E + X, 0), e_max):
/// boundary states absorb the clipped overflow/underflow mass.
inline TransitionMatrix build_transition_matrix(const ExcessPmf& pmf, int e_max) {
    if (e_max < 0) throw ValidationError("build_transition_matrix: e_max must be >= 0");
    auto P = TransitionMatrix::zero(e_max + 1);
    for (int s = 0; s <= e_max; ++s)
        for (int k = -pmf.m(); k <= pmf.m(); ++k)
            P.at(s, std::clamp(s + k, 0, e_max)) += pmf.prob(k);
    return P;
}

namespace detail {

inline bool strongly_connected(const TransitionMatrix& P) {
    const int n = P.n;
    auto reach = [&](bool transpose) {
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        int count = 1;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (int v = 0; v < n; ++v) {
                const double w = transpose ? P.at(v, u) : P.at(u, v);
                if (w > 0.0 && !seen[v]) {
                    seen[v] = 1;
                    ++count;
                    stack.push_back(v);
                }
            }
        }
        return count == n;
    };
    return reach(false) && reach(true);
}

/// Solves the square system M x = rhs in place by Gaussian elimination with
/// partial pivoting. Throws on (numerically) singular systems.
inline std::vector<double> solve_dense(std::vector<double> M, std::vector<double> rhs) {
    const int n = static_cast<int>(rhs.size());
    auto at = [&](int i, int j) -> double& { return M[static_cast<std::size_t>(i) * n + j]; };
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(at(r, col)) > std::abs(at(piv, col))) piv = r;
        if (std::abs(at(piv, col)) < 1e-300)
            throw ValidationError("stationary solve: singular system");
        if (piv != col) {
            for (int j = 0; j < n; ++j) std::swap(at(piv, j), at(col, j));
            std::swap(rhs[piv], rhs[col]);
        }
        for (int r = col + 1; r < n; ++r) {
            const double f = at(r, col) / at(col, col);
            if (f == 0.0) continue;
            for (int j = col; j < n; ++j) at(r, j) -= f * at(col, j);
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    for (int i = n - 1; i >= 0; --i) {
        double s = rhs[i];
        for (int j = i + 1; j < n; ++j) s -= at(i, j) * x[j];
        x[i] = s / at(i, i);
    }
    return x;
}

}  // namespace detail

/// Chains larger than this use power iteration instead of a dense solve.
inline constexpr int kDenseStationaryLimit = 10000;

/// Unique pi with pi P = pi, sum(pi) = 1. Requires a stochastic, irreducible
/// chain; reducible chains are rejected because the limiting distribution
/// need not exist.
inline std::vector<double> stationary_distribution(const TransitionMatrix& P) {
    const int n = P.n;
    if (n <= 0) throw ValidationError("stationary_distribution: empty chain");
    if (P.max_row_sum_error() > 1e-12)
        throw ValidationError("stationary_distribution: matrix is not stochastic");
    if (!detail::strongly_connected(P))
        throw ValidationError("stationary_distribution: chain is reducible");

    std::vector<double> pi;
    if (n <= kDenseStationaryLimit) {
        // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1
        std::vector<double> M(static_cast<std::size_t>(n) * n, 0.0);
        std::vector<double> rhs(static_cast<std::size_t>(n), 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                M[static_cast<std::size_t>(i) * n + j] = P.at(j, i) - (i == j ? 1.0 : 0.0);
        for (int j = 0; j < n; ++j) M[static_cast<std::size_t>(n - 1) * n + j] = 1.0;
        rhs[static_cast<std::size_t>(n - 1)] = 1.0;
        pi = detail::solve_dense(std::move(M), std::move(rhs));
    } else {
        pi.assign(static_cast<std::size_t>(n), 1.0 / n);
        std::vector<double> next(pi.size(), 0.0);
        double res = 1.0;
        for (int it = 0; it < 2000000 && res > 1e-13; ++it) {
            std::fill(next.begin(), next.end(), 0.0);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) next[j] += pi[i] * P.at(i, j);
            res = 0.0;
            for (int j = 0; j < n; ++j) res = std::max(res, std::abs(next[j] - pi[j]));
            pi.swap(next);
        }
        if (res > 1e-13)
            throw ValidationError("stationary_distribution: power iteration did not converge");
    }

    double sum = 0.0;
    for (double& v : pi) {
        if (v < 0.0) {
            if (v < -1e-10)
                throw ValidationError("stationary_distribution: negative mass, chain degenerate");
            v = 0.0;
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-10)
        throw ValidationError("stationary_distribution: mass does not sum to 1");
    for (double& v : pi) v /= sum;

    double residual = 0.0;
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += pi[i] * P.at(i, j);
        residual = std::max(residual, std::abs(s - pi[j]));
    }
    if (residual > 1e-10)
        throw ValidationError("stationary_distribution: residual " + std::to_string(residual));
    return pi;
}

/// A battery chain bundled with its stationary distribution.
struct StationaryModel {
    ExcessPmf pmf;
    int e_max;
    TransitionMatrix P;
    std::vector<double> pi;

    static StationaryModel build(const ExcessPmf& pmf, int e_max) {
        auto P = build_transition_matrix(pmf, e_max);
        auto pi = stationary_distribution(P);
        return StationaryModel{pmf, e_max, std::move(P), std::move(pi)};
    }
};

/// pi(i) = r^i (1-r) / (1 - r^(e_max+1)) with r = a/d, continued analytically
/// to the uniform distribution as r -> 1. Overflow-safe for r > 1.
inline std::vector<double> birth_death_closed_form(double a, double d, int e_max) {
    if (e_max < 0) throw ValidationError("birth_death_closed_form: e_max must be >= 0");
    if (!(d > 0.0)) throw ValidationError("birth_death_closed_form: d must be > 0 (r undefined)");
    if (!(a > 0.0)) throw ValidationError("birth_death_closed_form: a must be > 0");
    const int n = e_max + 1;
    std::vector<double> pi(static_cast<std::size_t>(n), 0.0);
    const double r = a / d;
    if (std::abs(r - 1.0) < 1e-9) {
        std::fill(pi.begin(), pi.end(), 1.0 / n);
        return pi;
    }
    if (r < 1.0) {
        const double norm = (1.0 - r) / (1.0 - std::pow(r, n));
        for (int i = 0; i < n; ++i) pi[static_cast<std::size_t>(i)] = std::pow(r, i) * norm;
    } else {
        // multiply through by r^{-n}: pi(i) = (1 - 1/r) r^{i-e_max} / (1 - r^{-n})
        const double norm = (1.0 - 1.0 / r) / (1.0 - std::pow(r, -n));
        for (int i = 0; i < n; ++i)
            pi[static_cast<std::size_t>(i)] = std::pow(r, i - e_max) * norm;
    }
    return pi;
}

// ---------------------------------------------------------------------------
// Steady-state costs
// ---------------------------------------------------------------------------

/// Expected macro-grid cost per slot for a single MG: the chain borrows
/// i - j units at q_max whenever the arrival is -i and the battery holds
/// j < i units.
inline double single_mg_cost(const ExcessPmf& pmf, int e_max, double q_max) {
    bool ever_deficient = false;
    for (int i = 1; i <= pmf.m(); ++i) ever_deficient |= pmf.down(i) > 0.0;
    if (!ever_deficient) return 0.0;
    const auto pi = stationary_distribution(build_transition_matrix(pmf, e_max));
    double cost = 0.0;
    for (int i = 1; i <= pmf.m(); ++i) {
        const double di = pmf.down(i);
        if (di == 0.0) continue;
        for (int j = 0; j <= std::min(i, e_max); ++j)
            cost += (i - j) * di * pi[static_cast<std::size_t>(j)];
    }
    return q_max * cost;
}

/// Closed form of the same cost for the three-point pmf:
/// q_max d (1-r) / (1 - r^(e_max+1)).
inline double single_mg_cost_closed(double a, double d, int e_max, double q_max) {
    return q_max * d * birth_death_closed_form(a, d, e_max)[0];
}

// ---------------------------------------------------------------------------
// Symmetric two-MG alpha-sharing policy
// ---------------------------------------------------------------------------

/// Probabilistic sharing policy between two symmetric MGs with three-point
/// arrivals: excess is shipped to the deficient neighbor with probability
/// alpha, otherwise stored. e_max = kInfiniteCapacity selects the analytic
/// infinite-storage branch.
struct TwoMgPolicy {
    static constexpr int kInfiniteCapacity = -1;

    double alpha = 0.0;
    double a = 0.0;
    double d = 0.0;
    int e_max = 0;
    double p_max = 0.0;
    double q_max = 0.0;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("TwoMgPolicy: alpha in [0,1]");
        if (!(a >= 0.0 && d >= 0.0 && a + d <= 1.0 + 1e-12))
            throw ValidationError("TwoMgPolicy: need a,d >= 0 and a+d <= 1");
        if (e_max < 0 && e_max != kInfiniteCapacity)
            throw ValidationError("TwoMgPolicy: bad e_max");
        if (p_max < 0.0 || q_max < 0.0) throw ValidationError("TwoMgPolicy: negative price");
    }
};

/// Unconditional pmf of the effective arrival Z~ seen by each battery:
/// {-1: d(1-alpha a), 0: 2 alpha a d + (1-a-d), +1: a(1-alpha d)}.
inline ExcessPmf two_mg_effective_pmf(double a, double d, double alpha) {
    TwoMgPolicy{alpha, a, d, 0, 0.0, 0.0}.validate();
    const double down = d * (1.0 - alpha * a);
    const double up = a * (1.0 - alpha * d);
    return ExcessPmf(1, {down, 1.0 - down - up, up});
}

/// Cost(alpha) = 2 alpha a d p_max + 2 d (1 - alpha a) pi(0) q_max with pi
/// from the effective-arrival chain, r = a(1-alpha d) / (d(1-alpha a)).
inline double two_mg_cost(const TwoMgPolicy& pol) {
    pol.validate();
    const double a_eff = pol.a * (1.0 - pol.alpha * pol.d);
    const double d_eff = pol.d * (1.0 - pol.alpha * pol.a);
    double pi0;
    if (pol.e_max == TwoMgPolicy::kInfiniteCapacity) {
        if (!(a_eff < d_eff))
            throw ValidationError(
                "two_mg_cost: infinite storage needs effective downward drift (a_eff < d_eff)");
        pi0 = (pol.d - pol.a) / (pol.d * (1.0 - pol.alpha * pol.a));
    } else if (pol.e_max == 0) {
        pi0 = 1.0;
    } else if (d_eff == 0.0) {
        pi0 = 0.0;  // never deficient; the macro term carries a d_eff factor anyway
    } else if (a_eff == 0.0) {
        pi0 = 1.0;  // battery never fills
    } else {
        pi0 = birth_death_closed_form(a_eff, d_eff, pol.e_max)[0];
    }
    return 2.0 * pol.alpha * pol.a * pol.d * pol.p_max +
           2.0 * pol.d * (1.0 - pol.alpha * pol.a) * pi0 * pol.q_max;
}

struct AlphaOptimum {
    double alpha = 0.0;
    double cost = 0.0;
};

/// argmin over alpha in [0,1] of two_mg_cost: dense 1e-3 grid scan refined by
/// golden-section to 1e-6, ties broken toward smaller alpha.
inline AlphaOptimum optimize_alpha(TwoMgPolicy pol) {
    auto cost_at = [&](double alpha) {
        pol.alpha = alpha;
        return two_mg_cost(pol);
    };
    constexpr int kGrid = 1000;
    double best_alpha = 0.0;
    double best_cost = cost_at(0.0);
    for (int k = 1; k <= kGrid; ++k) {
        const double alpha = static_cast<double>(k) / kGrid;
        const double c = cost_at(alpha);
        if (c < best_cost) {
            best_cost = c;
            best_alpha = alpha;
        }
    }
    // golden-section refinement inside the bracketing grid cells
    double lo = std::max(0.0, best_alpha - 1.0 / kGrid);
    double hi = std::min(1.0, best_alpha + 1.0 / kGrid);
    constexpr double kInvPhi = 0.6180339887498949;
    double x1 = hi - kInvPhi * (hi - lo);
    double x2 = lo + kInvPhi * (hi - lo);
    double f1 = cost_at(x1);
    double f2 = cost_at(x2);
    while (hi - lo > 1e-6) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - kInvPhi * (hi - lo);
            f1 = cost_at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + kInvPhi * (hi - lo);
            f2 = cost_at(x2);
        }
    }
    // exact ties resolve toward the smaller alpha
    auto consider = [&](double cand) {
        const double c = cost_at(cand);
        if (c < best_cost || (c == best_cost && cand < best_alpha)) {
            best_cost = c;
            best_alpha = cand;
        }
    };
    consider(lo);
    consider(0.5 * (lo + hi));
    consider(hi);
    consider(0.0);
    consider(1.0);
    return AlphaOptimum{best_alpha, best_cost};
}

}  // namespace mgsim
