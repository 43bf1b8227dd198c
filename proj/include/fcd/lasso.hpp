#pragma once

// l1-penalized least squares by cyclic coordinate descent on the Gram system.
//
// The solver minimizes (1/2n)||y - X theta||^2 + lambda ||theta||_1. All
// updates run against the precomputed Gram matrix X'X/n and correlation
// vector X'y/n, so a sweep touches only columns whose coefficient actually
// moved. Convergence is declared when a full sweep moves no coefficient by
// more than `tol` AND a freshly recomputed KKT residual clears `kkt_target`;
// the returned certificate is always recomputed from scratch, never from the
// incrementally maintained gradient.
//
// Shape violations throw std::invalid_argument, non-finite inputs and
// non-positive penalties throw std::domain_error, and hitting the sweep cap
// returns converged = false rather than throwing.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace fcd {

inline double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

struct LassoOptions {
    double tol = 1e-8;        // max absolute coefficient change per sweep
    int max_sweeps = 10000;
    double kkt_target = 1e-6; // certificate bound enforced before declaring convergence
    const Eigen::VectorXd* warm_start = nullptr;
    std::vector<double>* objective_trace = nullptr;  // filled per sweep when provided
};

struct LassoSolution {
    Eigen::VectorXd theta_hat;
    double lambda = 0.0;
    int iterations = 0;
    bool converged = false;
    double kkt_residual = std::numeric_limits<double>::infinity();
};

namespace detail {

// Stationarity violation of the full optimality conditions, from a fresh
// gradient. On the support the gradient must equal -lambda*sign(theta_j);
// elsewhere it must stay inside [-lambda, lambda].
inline double lasso_kkt_residual(const Eigen::MatrixXd& gram, const Eigen::VectorXd& xty,
                                 const Eigen::VectorXd& theta, double lambda) {
    const Eigen::VectorXd corr = xty - gram * theta;  // (1/n) X'(y - X theta)
    double worst = 0.0;
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
        const double v = theta[j] != 0.0
                             ? std::abs(corr[j] - lambda * (theta[j] > 0.0 ? 1.0 : -1.0))
                             : std::max(0.0, std::abs(corr[j]) - lambda);
        worst = std::max(worst, v);
    }
    return worst;
}

}  // namespace detail

/// Coordinate descent on the Gram form. `gram` = X'X/n, `xty` = X'y/n.
/// `yty_over_n` is only needed for the objective trace; pass NaN to skip the
/// constant term there.
inline LassoSolution solve_lasso_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& xty,
                                      double lambda, const LassoOptions& opts = {},
                                      double yty_over_n = std::numeric_limits<double>::quiet_NaN()) {
    const Eigen::Index p = xty.size();
    if (gram.rows() != p || gram.cols() != p) {
        throw std::invalid_argument("solve_lasso: Gram matrix does not match X'y/n length");
    }
    if (!gram.allFinite() || !xty.allFinite()) {
        throw std::domain_error("solve_lasso: non-finite input");
    }
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw std::domain_error("solve_lasso: penalty must be positive and finite");
    }

    LassoSolution sol;
    sol.lambda = lambda;
    sol.theta_hat = opts.warm_start != nullptr ? *opts.warm_start : Eigen::VectorXd::Zero(p);
    if (opts.warm_start != nullptr && opts.warm_start->size() != p) {
        throw std::invalid_argument("solve_lasso: warm start has wrong length");
    }

    Eigen::VectorXd grad = gram * sol.theta_hat;  // maintained = gram * theta
    double check_tol = opts.tol;

    for (sol.iterations = 1; sol.iterations <= opts.max_sweeps; ++sol.iterations) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double diag = gram(j, j);
            const double old = sol.theta_hat[j];
            double next = 0.0;
            if (diag > 0.0) {
                const double partial = xty[j] - (grad[j] - diag * old);
                next = soft_threshold(partial, lambda) / diag;
            }
            // diag == 0 means an all-zero column; the penalty pins it at 0.
            if (next != old) {
                grad.noalias() += (next - old) * gram.col(j);
                sol.theta_hat[j] = next;
                max_delta = std::max(max_delta, std::abs(next - old));
            }
        }

        if (opts.objective_trace != nullptr) {
            double obj = 0.5 * sol.theta_hat.dot(grad) - sol.theta_hat.dot(xty) +
                         lambda * sol.theta_hat.lpNorm<1>();
            if (std::isfinite(yty_over_n)) obj += 0.5 * yty_over_n;
            opts.objective_trace->push_back(obj);
        }

        if (max_delta <= check_tol) {
            grad.noalias() = gram * sol.theta_hat;  // flush incremental drift
            sol.kkt_residual = detail::lasso_kkt_residual(gram, xty, sol.theta_hat, lambda);
            if (sol.kkt_residual <= opts.kkt_target) {
                sol.converged = true;
                return sol;
            }
            check_tol *= 0.25;  // keep sweeping with the refreshed gradient
        }
    }

    sol.iterations = opts.max_sweeps;
    grad.noalias() = gram * sol.theta_hat;
    sol.kkt_residual = detail::lasso_kkt_residual(gram, xty, sol.theta_hat, lambda);
    sol.converged = sol.kkt_residual <= opts.kkt_target;
    return sol;
}

/// Matrix-form entry point; forms the Gram system and delegates.
inline LassoSolution solve_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                                 const LassoOptions& opts = {}) {
    if (X.rows() != y.size()) {
        throw std::invalid_argument("solve_lasso: X has " + std::to_string(X.rows()) +
                                    " rows but y has length " + std::to_string(y.size()));
    }
    if (X.rows() < 1 || X.cols() < 1) {
        throw std::invalid_argument("solve_lasso: empty design matrix");
    }
    if (!X.allFinite() || !y.allFinite()) {
        throw std::domain_error("solve_lasso: non-finite input");
    }
    const double n = static_cast<double>(X.rows());
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose(), 1.0 / n);
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    const Eigen::VectorXd xty = X.transpose() * y / n;
    return solve_lasso_gram(gram, xty, lambda, opts, y.squaredNorm() / n);
}

/// Objective value (1/2n)||y - X theta||^2 + lambda ||theta||_1.
inline double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& theta, double lambda) {
    const double n = static_cast<double>(X.rows());
    return 0.5 * (y - X * theta).squaredNorm() / n + lambda * theta.lpNorm<1>();
}

}  // namespace fcd
