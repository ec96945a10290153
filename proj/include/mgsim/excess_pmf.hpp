// SPDX-License-Identifier: Apache-2.0
#pragma once

// Discrete p.m.f. of integer excess-energy arrivals on {-M, ..., +M}.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgsim {

/// Probability mass function of an integer-valued excess arrival process.
/// probs[k + m] holds P(X = k) for k in [-m, m].
class ExcessPmf {
public:
    static constexpr double kSumTolerance = 1e-12;

    ExcessPmf(int m, std::vector<double> probs) : m_(m), probs_(std::move(probs)) {
        if (m_ < 0) throw std::invalid_argument("ExcessPmf: negative support radius");
        if (probs_.size() != static_cast<std::size_t>(2 * m_ + 1))
            throw std::invalid_argument("ExcessPmf: probability vector must have 2m+1 entries");
        double sum = 0.0;
        for (double p : probs_) {
            if (!(p >= 0.0) || !std::isfinite(p))
                throw std::invalid_argument("ExcessPmf: probabilities must be nonnegative and finite");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kSumTolerance)
            throw std::invalid_argument("ExcessPmf: probabilities sum to " + std::to_string(sum) +
                                        ", expected 1");
    }

    /// Three-point pmf {-1: d, 0: 1-a-d, +1: a}.
    static ExcessPmf simple(double a, double d) {
        if (a < 0.0 || d < 0.0 || a + d > 1.0 + kSumTolerance)
            throw std::invalid_argument("ExcessPmf::simple: need a,d >= 0 and a+d <= 1");
        return ExcessPmf(1, {d, 1.0 - a - d, a});
    }

    int m() const { return m_; }
    double prob(int k) const { return probs_[static_cast<std::size_t>(k + m_)]; }
    const std::vector<double>& probs() const { return probs_; }

    /// P(X = +k) for k >= 1.
    double up(int k) const { return prob(k); }
    /// P(X = -k) for k >= 1.
    double down(int k) const { return prob(-k); }

    double mean() const {
        double mu = 0.0;
        for (int k = -m_; k <= m_; ++k) mu += k * prob(k);
        return mu;
    }

private:
    int m_;
    std::vector<double> probs_;
};

}  // namespace mgsim
