#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>

#include "fcd/debias.hpp"
#include "fcd/decorrelator.hpp"
#include "fcd/errors.hpp"
#include "test_util.hpp"

using Catch::Approx;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("empirical_covariance: closed forms and naive oracle", "[debias][covariance]") {
    std::mt19937_64 gen(21);

    SECTION("orthonormal-scaled columns give the identity") {
        const MatrixXd X = testutil::orthonormal_design(10, 4, gen);
        const MatrixXd gram = fcd::empirical_covariance(X);
        CHECK((gram - MatrixXd::Identity(4, 4)).lpNorm<Eigen::Infinity>() <= 1e-12);
    }

    SECTION("tiny hand computation") {
        MatrixXd X(2, 1);
        X << 1.0, 3.0;
        const MatrixXd gram = fcd::empirical_covariance(X);
        CHECK(gram(0, 0) == Approx(5.0).margin(1e-15));
    }

    SECTION("random design matches the triple loop") {
        const Eigen::Index n = 17, p = 6;
        const MatrixXd X = testutil::random_matrix(n, p, gen);
        const MatrixXd gram = fcd::empirical_covariance(X);
        for (Eigen::Index a = 0; a < p; ++a) {
            for (Eigen::Index b = 0; b < p; ++b) {
                double s = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) s += X(i, a) * X(i, b);
                CHECK(gram(a, b) == Approx(s / n).margin(1e-12));
            }
        }
        CHECK((gram - gram.transpose()).lpNorm<Eigen::Infinity>() == 0.0);
    }
}

TEST_CASE("compute_decorrelator: identity covariance closed forms", "[decorrelator]") {
    const Eigen::Index p = 4;
    const MatrixXd eye = MatrixXd::Identity(p, p);

    SECTION("mu below one shrinks the unit rows") {
        const auto dec = fcd::compute_decorrelator(eye, 0.1);
        REQUIRE_FALSE(dec.fallback_identity);
        CHECK((dec.matrix - 0.9 * eye).lpNorm<Eigen::Infinity>() <= 1e-8);
    }

    SECTION("mu at or above one admits the zero matrix") {
        const auto dec = fcd::compute_decorrelator(eye, 1.0);
        REQUIRE_FALSE(dec.fallback_identity);
        for (Eigen::Index i = 0; i < p; ++i) {
            const VectorXd r = eye * dec.matrix.row(i).transpose() - VectorXd::Unit(p, i);
            CHECK(r.lpNorm<Eigen::Infinity>() <= 1.0 + 1e-8);
        }
    }
}

TEST_CASE("compute_decorrelator: variance matches a feasible-region grid", "[decorrelator][oracle]") {
    MatrixXd gram(2, 2);
    gram << 1.0, 0.5, 0.5, 1.0;
    const double mu = 0.05;
    const auto dec = fcd::compute_decorrelator(gram, mu);
    REQUIRE_FALSE(dec.fallback_identity);

    const VectorXd m1 = dec.matrix.row(0).transpose();
    CHECK((gram * m1 - VectorXd::Unit(2, 0)).lpNorm<Eigen::Infinity>() <= mu + 1e-8);

    // Every feasible point can be written m = G^{-1}(e_1 + eps) with eps in
    // the mu-box; scan a 100x100 grid of eps values.
    const MatrixXd gram_inv = gram.inverse();
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 100; ++a) {
        for (int b = 0; b < 100; ++b) {
            VectorXd eps(2);
            eps << -mu + 2.0 * mu * a / 99.0, -mu + 2.0 * mu * b / 99.0;
            const VectorXd m = gram_inv * (VectorXd::Unit(2, 0) + eps);
            best = std::min(best, m.dot(gram * m));
        }
    }
    CHECK(m1.dot(gram * m1) <= best + 1e-6);
}

TEST_CASE("compute_decorrelator: feasibility certificate on random designs", "[decorrelator][property]") {
    std::mt19937_64 gen(314);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::Index n = 80, p = 12;
        MatrixXd X = testutil::random_matrix(n, p, gen);
        for (Eigen::Index j = 0; j < p; ++j) X.col(j) *= std::sqrt(n) / X.col(j).norm();
        const MatrixXd gram = fcd::empirical_covariance(X);
        const double mu = 2.0 * std::sqrt(std::log(static_cast<double>(p)) / n);

        const auto dec = fcd::compute_decorrelator(gram, mu);
        REQUIRE_FALSE(dec.fallback_identity);
        for (Eigen::Index i = 0; i < p; ++i) {
            REQUIRE(dec.column_feasible[i] == 1);
            const VectorXd r = gram * dec.matrix.row(i).transpose() - VectorXd::Unit(p, i);
            CHECK(r.lpNorm<Eigen::Infinity>() <= mu + 1e-8);
        }
    }
}

TEST_CASE("compute_decorrelator: infeasible columns trigger the identity fallback", "[decorrelator]") {
    const MatrixXd zero = MatrixXd::Zero(3, 3);

    SECTION("global rule") {
        const auto dec = fcd::compute_decorrelator(zero, 0.5);
        CHECK(dec.fallback_identity);
        CHECK(dec.matrix == MatrixXd::Identity(3, 3));
        for (auto flag : dec.column_feasible) CHECK(flag == 0);
    }

    SECTION("per-column option replaces only the failed rows") {
        fcd::DecorrelatorOptions opts;
        opts.per_column_fallback = true;
        const auto dec = fcd::compute_decorrelator(zero, 0.5, nullptr, std::nullopt, opts);
        CHECK_FALSE(dec.fallback_identity);
        CHECK(dec.matrix == MatrixXd::Identity(3, 3));
    }
}

TEST_CASE("compute_decorrelator: row cap is enforced when beta is given", "[decorrelator]") {
    std::mt19937_64 gen(777);
    const Eigen::Index n = 60, p = 8;
    MatrixXd X = testutil::random_matrix(n, p, gen);
    for (Eigen::Index j = 0; j < p; ++j) X.col(j) *= std::sqrt(n) / X.col(j).norm();
    const MatrixXd gram = fcd::empirical_covariance(X);

    const double beta = 0.35;
    const double cap = std::pow(static_cast<double>(n), beta);
    const auto dec = fcd::compute_decorrelator(gram, 0.35, &X, beta);
    REQUIRE_FALSE(dec.fallback_identity);
    REQUIRE(dec.beta_cap.has_value());
    for (Eigen::Index i = 0; i < p; ++i) {
        const VectorXd xm = X * dec.matrix.row(i).transpose();
        CHECK(xm.lpNorm<Eigen::Infinity>() <= cap + 1e-8);
        const VectorXd r = gram * dec.matrix.row(i).transpose() - VectorXd::Unit(p, i);
        CHECK(r.lpNorm<Eigen::Infinity>() <= 0.35 + 1e-8);
    }
}

TEST_CASE("compute_decorrelator: threaded solve is identical to sequential", "[decorrelator][threads]") {
    std::mt19937_64 gen(99);
    const Eigen::Index n = 50, p = 10;
    const MatrixXd X = testutil::random_matrix(n, p, gen);
    const MatrixXd gram = fcd::empirical_covariance(X);
    fcd::DecorrelatorOptions seq, par;
    par.threads = 4;
    const auto a = fcd::compute_decorrelator(gram, 0.3, nullptr, std::nullopt, seq);
    const auto b = fcd::compute_decorrelator(gram, 0.3, nullptr, std::nullopt, par);
    CHECK(a.matrix == b.matrix);
}

TEST_CASE("compute_decorrelator: input validation", "[decorrelator][errors]") {
    MatrixXd asym(2, 2);
    asym << 1.0, 0.2, 0.3, 1.0;
    CHECK_THROWS_AS(fcd::compute_decorrelator(asym, 0.1), std::domain_error);

    const MatrixXd eye = MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(fcd::compute_decorrelator(eye, 0.0), std::domain_error);
    CHECK_THROWS_AS(fcd::compute_decorrelator(eye, -0.5), std::domain_error);
    CHECK_THROWS_AS(fcd::compute_decorrelator(eye, 0.1, nullptr, 0.3), std::invalid_argument);

    MatrixXd X = MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(fcd::compute_decorrelator(eye, 0.1, &X, 0.7), std::domain_error);
}

TEST_CASE("debias_estimate: exact algebraic identities", "[debias]") {
    std::mt19937_64 gen(555);
    const Eigen::Index n = 30, p = 6;
    const MatrixXd X = testutil::random_matrix(n, p, gen);
    const MatrixXd gram = fcd::empirical_covariance(X);

    SECTION("zero residual leaves the estimate unchanged") {
        const VectorXd theta = testutil::random_vector(p, gen);
        const VectorXd y = X * theta;
        const auto dec = fcd::compute_decorrelator(gram, 0.2);
        const auto deb = fcd::debias_estimate(theta, dec, X, y);
        CHECK((deb.coef - theta).lpNorm<Eigen::Infinity>() <= 1e-12);
    }

    SECTION("exact decorrelation recovers the truth on noiseless data") {
        // With M = G^{-1} (n > p, invertible) and y = X theta0, the correction
        // returns theta0 for any starting estimate.
        fcd::Decorrelator dec;
        dec.mu = 1.0;
        dec.matrix = gram.inverse();
        dec.column_feasible.assign(p, 1);
        const VectorXd theta0 = testutil::random_vector(p, gen);
        const VectorXd theta_start = testutil::random_vector(p, gen);
        const auto deb = fcd::debias_estimate(theta_start, dec, X, X * theta0);
        CHECK((deb.coef - theta0).lpNorm<Eigen::Infinity>() <= 1e-10);
    }

    SECTION("error splits exactly into noise and bias terms") {
        const VectorXd theta0 = testutil::random_vector(p, gen);
        const VectorXd w = testutil::random_vector(n, gen);
        const VectorXd y = X * theta0 + w;
        const VectorXd theta_hat = theta0 + 0.1 * testutil::random_vector(p, gen);
        const auto dec = fcd::compute_decorrelator(gram, 0.2);
        const auto deb = fcd::debias_estimate(theta_hat, dec, X, y);

        const double sqrt_n = std::sqrt(static_cast<double>(n));
        const VectorXd lhs = sqrt_n * (deb.coef - theta0);
        const VectorXd noise = dec.matrix * (X.transpose() * w) / sqrt_n;
        const VectorXd bias = sqrt_n * (dec.matrix * (gram * (theta0 - theta_hat)) - (theta0 - theta_hat));
        CHECK((lhs - noise - bias).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
}

TEST_CASE("debias_estimate: normalized noise covariance", "[debias]") {
    std::mt19937_64 gen(808);
    const Eigen::Index n = 40, p = 7;
    const MatrixXd X = testutil::random_matrix(n, p, gen);
    const MatrixXd gram = fcd::empirical_covariance(X);
    const auto dec = fcd::compute_decorrelator(gram, 0.25);
    const VectorXd theta = testutil::random_vector(p, gen);
    const VectorXd y = X * theta + testutil::random_vector(n, gen);
    const auto deb = fcd::debias_estimate(theta, dec, X, y);

    CHECK((deb.noise_cov - deb.noise_cov.transpose()).lpNorm<Eigen::Infinity>() == 0.0);
    for (Eigen::Index i = 0; i < p; ++i) {
        CHECK(deb.noise_corr(i, i) == 1.0);
        for (Eigen::Index j = 0; j < p; ++j) {
            CHECK(std::abs(deb.noise_corr(i, j)) <= 1.0 + 1e-10);
        }
    }

    // Direct sandwich-product oracle.
    const MatrixXd direct = dec.matrix * gram * dec.matrix.transpose();
    CHECK((deb.noise_cov - direct).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("debias_estimate: zero decorrelator row is a degenerate variance", "[debias][errors]") {
    std::mt19937_64 gen(6);
    const Eigen::Index n = 10, p = 3;
    const MatrixXd X = testutil::random_matrix(n, p, gen);
    fcd::Decorrelator dec;
    dec.mu = 0.5;
    dec.matrix = MatrixXd::Identity(p, p);
    dec.matrix.row(1).setZero();
    dec.column_feasible.assign(p, 1);
    const VectorXd theta = VectorXd::Zero(p);
    const VectorXd y = testutil::random_vector(n, gen);
    CHECK_THROWS_AS(fcd::debias_estimate(theta, dec, X, y), fcd::numerical_error);
}

TEST_CASE("bias_sup_norm: vanishes in the exact cases", "[debias]") {
    std::mt19937_64 gen(404);
    const Eigen::Index n = 25, p = 5;
    const MatrixXd X = testutil::random_matrix(n, p, gen);
    const MatrixXd gram = fcd::empirical_covariance(X);
    const VectorXd theta0 = testutil::random_vector(p, gen);

    const auto dec = fcd::compute_decorrelator(gram, 0.2);
    CHECK(fcd::bias_sup_norm(dec, gram, theta0, theta0, n) == 0.0);

    fcd::Decorrelator exact;
    exact.mu = 1.0;
    exact.matrix = gram.inverse();
    exact.column_feasible.assign(p, 1);
    const VectorXd theta_hat = testutil::random_vector(p, gen);
    CHECK(fcd::bias_sup_norm(exact, gram, theta_hat, theta0, n) <= 1e-10);
}
