#pragma once

// One-step bias correction of a regularized fit and the covariance of its
// noise component.
//
// theta_d = theta_hat + (1/n) M X'(y - X theta_hat). The correction noise
// M X'w / sqrt(n) has conditional covariance sigma^2 * M (X'X/n) M', computed
// here as W'W/n with W = X M' so it is symmetric positive semidefinite by
// construction. The normalized version has unit diagonal.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "fcd/decorrelator.hpp"
#include "fcd/errors.hpp"

namespace fcd {

/// Empirical covariance X'X/n of the feature columns, exactly symmetric.
inline Eigen::MatrixXd empirical_covariance(const Eigen::MatrixXd& X) {
    if (X.rows() < 1 || X.cols() < 1) {
        throw std::invalid_argument("empirical_covariance: empty design matrix");
    }
    if (!X.allFinite()) throw std::domain_error("empirical_covariance: non-finite input");
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose(), 1.0 / static_cast<double>(X.rows()));
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    return gram;
}

struct DebiasedEstimate {
    Eigen::VectorXd coef;        // bias-corrected coefficients
    Eigen::MatrixXd noise_cov;   // M (X'X/n) M'
    Eigen::MatrixXd noise_corr;  // correlation-normalized noise_cov, unit diagonal
};

inline DebiasedEstimate debias_estimate(const Eigen::VectorXd& theta_hat, const Decorrelator& dec,
                                        const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (theta_hat.size() != p || dec.matrix.rows() != p || dec.matrix.cols() != p ||
        y.size() != n) {
        throw std::invalid_argument("debias_estimate: shape mismatch");
    }

    DebiasedEstimate out;
    const Eigen::VectorXd residual_corr = X.transpose() * (y - X * theta_hat) / static_cast<double>(n);
    out.coef = theta_hat + dec.matrix * residual_corr;

    // W = X M' assembled column by column over the nonzeros of each row of M;
    // the rows are sparse for every non-fallback decorrelator.
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            const double mij = dec.matrix(i, j);
            if (mij != 0.0) w.col(i).noalias() += mij * X.col(j);
        }
    }
    out.noise_cov = Eigen::MatrixXd::Zero(p, p);
    out.noise_cov.selfadjointView<Eigen::Lower>().rankUpdate(w.transpose(), 1.0 / static_cast<double>(n));
    out.noise_cov.triangularView<Eigen::StrictlyUpper>() = out.noise_cov.transpose();

    Eigen::VectorXd inv_scale(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        const double v = out.noise_cov(i, i);
        if (!(v > 0.0)) {
            throw numerical_error("debias_estimate: degenerate variance in coordinate " +
                                  std::to_string(i));
        }
        inv_scale[i] = 1.0 / std::sqrt(v);
    }
    out.noise_corr = inv_scale.asDiagonal() * out.noise_cov * inv_scale.asDiagonal();
    out.noise_corr.diagonal().setOnes();
    return out;
}

/// Realized sup-norm of the bias term sqrt(n) (M G - I)(theta0 - theta_hat);
/// only computable in simulation where theta0 is known.
inline double bias_sup_norm(const Decorrelator& dec, const Eigen::MatrixXd& gram,
                            const Eigen::VectorXd& theta_hat, const Eigen::VectorXd& theta0,
                            Eigen::Index n) {
    if (theta_hat.size() != theta0.size() || gram.rows() != theta_hat.size()) {
        throw std::invalid_argument("bias_sup_norm: shape mismatch");
    }
    const Eigen::VectorXd diff = theta0 - theta_hat;
    const Eigen::VectorXd v = dec.matrix * (gram * diff) - diff;
    return std::sqrt(static_cast<double>(n)) * v.lpNorm<Eigen::Infinity>();
}

}  // namespace fcd
