#pragma once

// Joint estimation of the coefficients and the noise level.
//
// The program min over (theta, sigma > 0) of
//   (1/2 sigma n)||y - X theta||^2 + sigma/2 + lambda_bar ||theta||_1
// is solved by alternating an l1 fit at penalty sigma * lambda_bar with the
// sigma update sigma <- ||y - X theta||_2 / sqrt(n), which is the exact
// stationarity condition in sigma. At convergence sigma_hat equals the
// residual RMS of the returned theta_hat by construction.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "fcd/lasso.hpp"

namespace fcd {

/// Default penalty level sqrt(2 log(p) / n), the universal level for a
/// design standardized to unit-variance columns.
inline double default_lambda_bar(Eigen::Index n, Eigen::Index p) {
    return std::sqrt(2.0 * std::log(static_cast<double>(p)) / static_cast<double>(n));
}

enum class ScaledLassoStatus { ok, degenerate_noise };

struct ScaledLassoOptions {
    double sigma_tol = 1e-8;   // stop when |sigma change| falls below this
    int max_outer = 100;
    double collapse_ratio = 1e-8;  // sigma below this fraction of its start is degenerate
    LassoOptions lasso;
};

struct ScaledLassoSolution {
    Eigen::VectorXd theta_hat;
    double sigma_hat = 0.0;
    double lambda_bar = 0.0;
    int outer_iterations = 0;
    bool converged = false;
    double kkt_residual = std::numeric_limits<double>::infinity();
    ScaledLassoStatus status = ScaledLassoStatus::ok;

    bool ok() const { return status == ScaledLassoStatus::ok; }
};

/// Gram-form core. `gram` = X'X/n, `xty` = X'y/n, `yty_over_n` = ||y||^2/n.
inline ScaledLassoSolution solve_scaled_lasso_gram(const Eigen::MatrixXd& gram,
                                                   const Eigen::VectorXd& xty, double yty_over_n,
                                                   double lambda_bar,
                                                   const ScaledLassoOptions& opts = {}) {
    if (!(lambda_bar > 0.0) || !std::isfinite(lambda_bar)) {
        throw std::domain_error("solve_scaled_lasso: lambda_bar must be positive and finite");
    }
    if (!(yty_over_n >= 0.0) || !std::isfinite(yty_over_n)) {
        throw std::domain_error("solve_scaled_lasso: invalid response norm");
    }

    ScaledLassoSolution sol;
    sol.lambda_bar = lambda_bar;
    sol.theta_hat = Eigen::VectorXd::Zero(xty.size());

    const double sigma0 = std::sqrt(yty_over_n);
    double sigma = sigma0;
    if (!(sigma > 0.0)) {
        sol.status = ScaledLassoStatus::degenerate_noise;
        return sol;
    }

    // Residual mean square via the Gram identity ||y - X theta||^2/n
    // = y'y/n - 2 theta'(X'y/n) + theta'(X'X/n) theta.
    const auto residual_rms = [&](const Eigen::VectorXd& theta) {
        const double ms = yty_over_n - 2.0 * theta.dot(xty) + theta.dot(gram * theta);
        return std::sqrt(std::max(ms, 0.0));
    };

    LassoOptions inner = opts.lasso;
    inner.warm_start = &sol.theta_hat;
    bool inner_converged = true;
    for (sol.outer_iterations = 1; sol.outer_iterations <= opts.max_outer; ++sol.outer_iterations) {
        LassoSolution fit = solve_lasso_gram(gram, xty, sigma * lambda_bar, inner, yty_over_n);
        sol.theta_hat = std::move(fit.theta_hat);
        inner_converged = fit.converged;

        const double sigma_next = residual_rms(sol.theta_hat);
        if (sigma_next <= opts.collapse_ratio * sigma0) {
            sol.sigma_hat = sigma_next;
            sol.status = ScaledLassoStatus::degenerate_noise;
            return sol;
        }
        const double change = std::abs(sigma_next - sigma);
        sigma = sigma_next;
        if (change <= opts.sigma_tol) {
            sol.converged = inner_converged;
            break;
        }
    }

    sol.sigma_hat = sigma;
    sol.kkt_residual =
        detail::lasso_kkt_residual(gram, xty, sol.theta_hat, sol.sigma_hat * lambda_bar);
    return sol;
}

inline ScaledLassoSolution solve_scaled_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                              double lambda_bar,
                                              const ScaledLassoOptions& opts = {}) {
    if (X.rows() != y.size()) {
        throw std::invalid_argument("solve_scaled_lasso: X has " + std::to_string(X.rows()) +
                                    " rows but y has length " + std::to_string(y.size()));
    }
    if (!X.allFinite() || !y.allFinite()) {
        throw std::domain_error("solve_scaled_lasso: non-finite input");
    }
    const double n = static_cast<double>(X.rows());
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose(), 1.0 / n);
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    const Eigen::VectorXd xty = X.transpose() * y / n;
    return solve_scaled_lasso_gram(gram, xty, y.squaredNorm() / n, lambda_bar, opts);
}

}  // namespace fcd
