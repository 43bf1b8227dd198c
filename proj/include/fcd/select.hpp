#pragma once

// Test statistics and the data-dependent selection threshold.
//
// Scores are z-statistics of the debiased coordinates. The threshold is the
// infimum of { t in [0, t_cap] : 2p(1 - Phi(t)) / max(R(t), 1) <= q } with
// R(t) the number of |scores| at or above t. R is a step function, constant
// between sorted |score| values, so the infimum is computed exactly: on each
// constancy interval the candidate is the closed-form point where the
// continuous numerator crosses q * R, clamped to the interval. If no t
// qualifies below the cap, the fallback threshold sqrt(2 log p) is used and
// `threshold_found` reports false.
//
// A coordinate whose |score| ties the threshold exactly is selected (the
// rule is >=). Ties among scores carry multiplicity; no randomization.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "fcd/debias.hpp"
#include "fcd/gauss.hpp"

namespace fcd {

struct TestStatistics {
    Eigen::VectorXd scores;     // sqrt(n) coef_i / (sigma_hat sqrt(noise_var_i))
    double sigma_hat = 0.0;
    Eigen::VectorXd noise_var;  // diagonal of the noise covariance
};

inline TestStatistics test_statistics(const DebiasedEstimate& deb, double sigma_hat,
                                      Eigen::Index n) {
    if (!(sigma_hat > 0.0) || !std::isfinite(sigma_hat)) {
        throw std::domain_error("test_statistics: noise level must be positive");
    }
    if (n < 1) throw std::invalid_argument("test_statistics: sample count must be positive");
    TestStatistics stats;
    stats.sigma_hat = sigma_hat;
    stats.noise_var = deb.noise_cov.diagonal();
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    stats.scores.resize(deb.coef.size());
    for (Eigen::Index i = 0; i < deb.coef.size(); ++i) {
        const double v = stats.noise_var[i];
        if (!(v > 0.0)) throw std::domain_error("test_statistics: nonpositive variance entry");
        stats.scores[i] = sqrt_n * deb.coef[i] / (sigma_hat * std::sqrt(v));
    }
    return stats;
}

/// Upper end t_cap = sqrt(2 log p - 2 log log p) of the threshold search.
inline double threshold_search_ceiling(Eigen::Index p) {
    if (p < 3) throw std::domain_error("threshold_search_ceiling: requires p >= 3");
    const double lp = std::log(static_cast<double>(p));
    return std::sqrt(2.0 * lp - 2.0 * std::log(lp));
}

/// Threshold sqrt(2 log p) used when the search set is empty.
inline double fallback_threshold(Eigen::Index p) {
    if (p < 3) throw std::domain_error("fallback_threshold: requires p >= 3");
    return std::sqrt(2.0 * std::log(static_cast<double>(p)));
}

struct SelectionResult {
    double threshold = 0.0;
    bool threshold_found = false;
    std::vector<Eigen::Index> selected;  // ascending indices with |score| >= threshold
    std::vector<int> signs;              // sign of the score on selected, 0 elsewhere
    Eigen::VectorXd p_values;
};

inline Eigen::VectorXd compute_pvalues(const TestStatistics& stats) {
    Eigen::VectorXd p(stats.scores.size());
    for (Eigen::Index i = 0; i < stats.scores.size(); ++i) {
        p[i] = two_sided_tail(std::abs(stats.scores[i]));
    }
    return p;
}

/// Selection at level q with p nominal hypotheses (normally scores.size()).
inline SelectionResult fcd_threshold(const TestStatistics& stats, double q, Eigen::Index p) {
    if (!(q > 0.0 && q <= 1.0)) {
        throw std::domain_error("fcd_threshold: level must lie in (0, 1]");
    }
    if (p < 3) throw std::domain_error("fcd_threshold: requires p >= 3");
    if (!stats.scores.allFinite()) {
        throw std::domain_error("fcd_threshold: non-finite test statistic");
    }

    const Eigen::Index m = stats.scores.size();
    std::vector<double> abs_sorted(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) abs_sorted[static_cast<std::size_t>(i)] = std::abs(stats.scores[i]);
    std::sort(abs_sorted.begin(), abs_sorted.end());

    const double t_cap = threshold_search_ceiling(p);
    const double two_p = 2.0 * static_cast<double>(p);

    // Walk the constancy intervals of R. The interval starting at `left`
    // (closed at 0, open elsewhere) carries R = m - (#values <= left).
    double best = std::numeric_limits<double>::infinity();
    std::size_t k = 0;
    double left = 0.0;
    while (left <= t_cap) {
        while (k < abs_sorted.size() && abs_sorted[k] <= left) ++k;
        const double right = k < abs_sorted.size() ? abs_sorted[k] : std::numeric_limits<double>::infinity();
        const long rejections = static_cast<long>(abs_sorted.size() - k);
        const double denom = static_cast<double>(std::max<long>(rejections, 1));

        // Closed-form crossing of 2p(1 - Phi(t)) = q * denom inside the interval.
        const double target = 1.0 - q * denom / two_p;
        double crossing = 0.0;
        if (target > 0.0 && target < 1.0) {
            crossing = std::max(std_normal_quantile(target), 0.0);
        }
        const double candidate = std::max(crossing, left);
        if (candidate <= std::min(right, t_cap)) {
            best = candidate;
            break;  // intervals are scanned left to right; the first hit is the infimum
        }
        if (right > t_cap) break;
        left = right;
    }

    SelectionResult res;
    res.threshold_found = std::isfinite(best);
    res.threshold = res.threshold_found ? best : fallback_threshold(p);
    res.p_values = compute_pvalues(stats);
    res.signs.assign(static_cast<std::size_t>(m), 0);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (std::abs(stats.scores[i]) >= res.threshold) {
            res.selected.push_back(i);
            res.signs[static_cast<std::size_t>(i)] =
                stats.scores[i] > 0.0 ? 1 : (stats.scores[i] < 0.0 ? -1 : 0);
        }
    }
    return res;
}

}  // namespace fcd
