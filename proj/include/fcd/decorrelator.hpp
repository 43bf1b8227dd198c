#pragma once

// Decorrelating matrix for the debiased estimator.
//
// Row i solves the column program
//     minimize    m' G m
//     subject to  || G m - e_i ||_inf <= mu
// where G is the empirical covariance X'X/n. Each column is solved through
// the l1-penalized surrogate  (1/2) m' G m - m_i + mu ||m||_1  by coordinate
// descent; the surrogate's stationarity conditions place G m - e_i inside the
// mu-box, and feasibility is re-verified against the original constraint
// after the solve. If any column cannot be certified feasible the whole
// matrix falls back to the identity (a per-column fallback is available as an
// option, off by default).
//
// When `beta` is supplied the row additionally has to satisfy
// ||X m||_inf <= n^beta. Rows violating the cap are projected by clipping the
// offending entries of X m and removing the excess through the minimum-norm
// correction m -= X'(XX')^{-1} excess, then both constraints are re-verified.
//
// The p column problems are independent; `threads` workers pull columns off a
// shared counter and write disjoint rows, so the result does not depend on
// the execution order.

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "fcd/lasso.hpp"

namespace fcd {

struct DecorrelatorOptions {
    double tol = 1e-9;             // max coordinate update per sweep
    int max_sweeps = 5000;         // per column
    int threads = 1;
    bool per_column_fallback = false;
    double feasibility_slack = 1e-8;
};

struct Decorrelator {
    Eigen::MatrixXd matrix;                     // row i is the solution for coordinate i
    double mu = 0.0;
    std::vector<std::uint8_t> column_feasible;  // verification outcome per column
    bool fallback_identity = false;
    std::optional<double> beta_cap;             // exponent of the row cap ||Xm||_inf <= n^beta
};

namespace detail {

// Coordinate descent for one column of the decorrelator. Sweeps alternate
// between the full index range and the current active set; convergence is
// only declared once a freshly recomputed G m certifies the box constraint.
inline bool solve_decorrelator_column(const Eigen::MatrixXd& gram, Eigen::Index i, double mu,
                                      const DecorrelatorOptions& opts, Eigen::VectorXd& m,
                                      Eigen::VectorXd& gm) {
    const Eigen::Index p = gram.rows();
    m.setZero();
    gm.setZero();
    if (gram(i, i) > 0.0) {
        m[i] = soft_threshold(1.0, mu) / gram(i, i);
        if (m[i] != 0.0) gm = m[i] * gram.col(i);
    }

    double check_tol = opts.tol;
    int sweeps = 0;
    const auto sweep = [&](bool full) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double old = m[j];
            if (!full && old == 0.0) continue;
            const double diag = gram(j, j);
            if (diag <= 0.0) continue;  // zero column: the penalty keeps m_j at 0
            const double target = (j == i) ? 1.0 : 0.0;
            const double partial = target - (gm[j] - diag * old);
            const double next = soft_threshold(partial, mu) / diag;
            if (next != old) {
                gm.noalias() += (next - old) * gram.col(j);
                m[j] = next;
                max_delta = std::max(max_delta, std::abs(next - old));
            }
        }
        ++sweeps;
        return max_delta;
    };

    while (sweeps < opts.max_sweeps) {
        double delta = sweep(true);
        if (delta <= check_tol) {
            gm.noalias() = gram * m;  // flush incremental drift before certifying
            double infeas = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) {
                infeas = std::max(infeas, std::abs(gm[j] - (j == i ? 1.0 : 0.0)));
            }
            if (infeas <= mu + opts.feasibility_slack) return true;
            check_tol *= 0.25;
            continue;
        }
        while (sweeps < opts.max_sweeps && delta > check_tol) delta = sweep(false);
    }
    return false;
}

}  // namespace detail

inline Decorrelator compute_decorrelator(const Eigen::MatrixXd& gram, double mu,
                                         const Eigen::MatrixXd* X = nullptr,
                                         std::optional<double> beta = std::nullopt,
                                         const DecorrelatorOptions& opts = {}) {
    const Eigen::Index p = gram.rows();
    if (gram.cols() != p || p < 1) {
        throw std::invalid_argument("compute_decorrelator: covariance must be square");
    }
    if (!gram.allFinite()) throw std::domain_error("compute_decorrelator: non-finite covariance");
    if ((gram - gram.transpose()).lpNorm<Eigen::Infinity>() > 1e-12) {
        throw std::domain_error("compute_decorrelator: covariance is not symmetric");
    }
    if (!(mu > 0.0) || !std::isfinite(mu)) {
        throw std::domain_error("compute_decorrelator: mu must be positive");
    }
    if (beta.has_value()) {
        if (X == nullptr) {
            throw std::invalid_argument("compute_decorrelator: the row cap requires the design matrix");
        }
        if (X->cols() != p) {
            throw std::invalid_argument("compute_decorrelator: design matrix width does not match");
        }
        if (!(*beta > 0.0 && *beta < 0.5)) {
            throw std::domain_error("compute_decorrelator: beta must lie in (0, 1/2)");
        }
    }

    Decorrelator dec;
    dec.mu = mu;
    dec.beta_cap = beta;
    dec.matrix.resize(p, p);
    dec.column_feasible.assign(static_cast<std::size_t>(p), 0);

    // Shared factor for the minimum-norm cap projection.
    double row_cap = 0.0;
    Eigen::LDLT<Eigen::MatrixXd> xxt_solver;
    if (beta.has_value()) {
        row_cap = std::pow(static_cast<double>(X->rows()), *beta);
        xxt_solver.compute(*X * X->transpose());
    }

    std::atomic<Eigen::Index> next{0};
    const auto worker = [&]() {
        Eigen::VectorXd m(p), gm(p);
        for (;;) {
            const Eigen::Index i = next.fetch_add(1);
            if (i >= p) return;
            bool ok = detail::solve_decorrelator_column(gram, i, mu, opts, m, gm);
            if (ok && beta.has_value()) {
                Eigen::VectorXd xm = *X * m;
                if (xm.lpNorm<Eigen::Infinity>() > row_cap + opts.feasibility_slack) {
                    const Eigen::VectorXd clipped = xm.cwiseMin(row_cap).cwiseMax(-row_cap);
                    m.noalias() -= X->transpose() * xxt_solver.solve(xm - clipped);
                    xm.noalias() = *X * m;
                    const double box = (gram * m - Eigen::VectorXd::Unit(p, i)).lpNorm<Eigen::Infinity>();
                    ok = box <= mu + opts.feasibility_slack &&
                         xm.lpNorm<Eigen::Infinity>() <= row_cap + opts.feasibility_slack;
                }
            }
            dec.column_feasible[static_cast<std::size_t>(i)] = ok ? 1 : 0;
            dec.matrix.row(i) = m.transpose();
        }
    };

    const int n_threads = std::max(1, std::min<int>(opts.threads, static_cast<int>(p)));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    bool all_ok = true;
    for (Eigen::Index i = 0; i < p; ++i) {
        if (!dec.column_feasible[static_cast<std::size_t>(i)]) {
            all_ok = false;
            if (opts.per_column_fallback) dec.matrix.row(i) = Eigen::RowVectorXd::Unit(p, i);
        }
    }
    if (!all_ok && !opts.per_column_fallback) {
        dec.fallback_identity = true;
        dec.matrix = Eigen::MatrixXd::Identity(p, p);
    }
    return dec;
}

}  // namespace fcd
