#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aird/common.hpp"
#include "aird/eig.hpp"
#include "aird/ntk.hpp"
#include "oracles.hpp"

using namespace aird;

TEST_CASE("covariance: identity activation gives D D^T for any sample count") {
    Rng rng(1);
    const Mat D = oracles::random_unit_rows(5, 4, rng);
    const Activation act = Activation::make(ActKind::Identity);
    for (std::size_t samples : {1ul, 7ul, 100ul}) {
        Rng r(3);
        const Mat s = covariance_matrix(D, act, samples, r);
        CHECK(frobenius_diff(s, matmul_nt(D, D)) <= 1e-14);
    }
}

TEST_CASE("covariance: exactly symmetric, deterministic given seed") {
    Rng rng(2);
    const Mat D = oracles::random_unit_rows(6, 3, rng);
    const Activation act = Activation::make(ActKind::Tanh);
    Rng ra(7), rb(7);
    const Mat a = covariance_matrix(D, act, 2000, ra);
    const Mat b = covariance_matrix(D, act, 2000, rb);
    CHECK(a == b);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) REQUIRE(a(i, j) == a(j, i));
}

TEST_CASE("covariance: scalar tanh case matches a high-sample oracle") {
    // Single unit row: Sigma = E[tanh'(g)^2] with g ~ N(0,1).
    Rng rng(2);
    Mat D(1, 3);
    {
        const Vec v = unit_sphere_sample(3, rng);
        std::copy(v.begin(), v.end(), D.row(0).begin());
    }
    const Activation act = Activation::make(ActKind::Tanh);
    Rng oracle_rng(999);
    const double oracle = covariance_matrix(D, act, 10000000, oracle_rng)(0, 0);
    // Population sd of tanh'(g)^2 is about 0.33; 3 SE at 1e5 samples.
    Rng est_rng(5);
    const double est = covariance_matrix(D, act, 100000, est_rng)(0, 0);
    CHECK(std::abs(est - oracle) <= 3.0 * 0.33 / std::sqrt(100000.0));
}

TEST_CASE("covariance: doubling samples halves the estimator variance") {
    Rng rng(2);
    Mat D(1, 3);
    {
        const Vec v = unit_sphere_sample(3, rng);
        std::copy(v.begin(), v.end(), D.row(0).begin());
    }
    const Activation act = Activation::make(ActKind::Tanh);
    auto variance_at = [&](std::size_t samples) {
        double m = 0.0, m2 = 0.0;
        const int reseeds = 30;
        for (int r = 0; r < reseeds; ++r) {
            Rng rr(1000 + r);
            const double x = covariance_matrix(D, act, samples, rr)(0, 0);
            m += x;
            m2 += x * x;
        }
        m /= reseeds;
        return m2 / reseeds - m * m;
    };
    const double ratio = variance_at(5000) / variance_at(10000);
    // Expected 2; frozen band wide enough for the 30-reseed noise.
    CHECK(ratio > 1.3);
    CHECK(ratio < 3.4);
}

TEST_CASE("covariance: samples = 0 rejected") {
    Rng rng(3);
    const Mat D = oracles::random_unit_rows(2, 3, rng);
    CHECK_THROWS_AS(covariance_matrix(D, Activation::make(ActKind::Tanh), 0, rng),
                    AssumptionViolation);
}

TEST_CASE("lambda_min: identity activation limits") {
    const Activation act = Activation::make(ActKind::Identity);
    // Orthonormal rows -> Sigma = I -> lambda = 1.
    Mat D = Mat::identity(3);
    Rng rng(4);
    CHECK(lambda_min(D, act, 10, rng) == doctest::Approx(1.0).epsilon(1e-12));

    // Duplicated row -> rank deficiency -> lambda = 0.
    Mat Dup(2, 3);
    Dup(0, 0) = 1.0;
    Dup(1, 0) = 1.0;
    CHECK(lambda_min(Dup, act, 10, rng) == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("lambda_min: tanh covariance is PSD up to Monte-Carlo noise") {
    Rng rng(5);
    const Mat D = oracles::random_unit_rows(8, 5, rng);
    const double l = lambda_min(D, Activation::make(ActKind::Tanh), 20000, rng);
    CHECK(l >= -1e-8);
}

TEST_CASE("top_eigenspace_ratio: axis cases") {
    Rng rng(6);
    const Mat a = oracles::random_symmetric(6, rng);
    const Spectrum s = sym_eig(a);

    Vec top(6), ortho(6, 0.0);
    for (std::size_t i = 0; i < 6; ++i) top[i] = s.eigenvectors(i, 0);
    for (std::size_t i = 0; i < 6; ++i) ortho[i] = s.eigenvectors(i, 5);

    CHECK(top_eigenspace_ratio(s, top, 1) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(top_eigenspace_ratio(s, ortho, 3) == doctest::Approx(0.0).epsilon(1e-10));
    Vec any(6);
    for (double& x : any) x = rng.next_gaussian();
    CHECK(top_eigenspace_ratio(s, any, 6) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("top_eigenspace_ratio: scale invariance and zero-label error") {
    Rng rng(7);
    const Mat a = oracles::random_symmetric(5, rng);
    const Spectrum s = sym_eig(a);
    Vec v(5);
    for (double& x : v) x = rng.next_gaussian();
    const double r1 = top_eigenspace_ratio(s, v, 2);
    Vec v37 = v;
    for (double& x : v37) x *= 37.0;
    CHECK(std::abs(top_eigenspace_ratio(s, v37, 2) - r1) <= 1e-12);
    CHECK_THROWS_AS(top_eigenspace_ratio(s, Vec(5, 0.0), 2), AssumptionViolation);

    const double sq = top_eigenspace_ratio(s, v, 2, /*squared=*/true);
    CHECK(sq == doctest::Approx(r1 * r1).epsilon(1e-12));
}

TEST_CASE("information_gain: degenerate cases") {
    Rng rng(8);
    const Mat a = oracles::random_symmetric(6, rng);
    const Spectrum s = sym_eig(a);
    Vec v(6);
    for (double& x : v) x = rng.next_gaussian();
    CHECK(information_gain(s, v, v, 3) == 0.0);

    Vec top(6), ortho(6);
    for (std::size_t i = 0; i < 6; ++i) {
        top[i] = s.eigenvectors(i, 0);
        ortho[i] = s.eigenvectors(i, 5);
    }
    CHECK(information_gain(s, top, ortho, 3) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("linearized_trajectory: one-step hand arithmetic") {
    Mat h(2, 2);
    h(0, 0) = 2.0;
    h(1, 1) = 0.5;
    const auto traj = linearized_trajectory(h, Vec{1.0, 1.0}, 0.1, 1);
    REQUIRE(traj.size() == 2);
    CHECK(traj[0][0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(traj[1][0] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(traj[1][1] == doctest::Approx(0.95).epsilon(1e-12));
}

TEST_CASE("linearized_trajectory: geometric decay and zero kernel") {
    Rng rng(9);
    Mat a = oracles::random_symmetric(5, rng);
    // Make positive definite: A^T A + I.
    Mat pd = matmul_nt(a, a);
    for (std::size_t i = 0; i < 5; ++i) pd(i, i) += 1.0;
    const Spectrum s = sym_eig(pd);
    const double eta = 0.5 / s.eigenvalues.front();

    Vec r0(5);
    for (double& x : r0) x = rng.next_gaussian();
    const auto traj = linearized_trajectory(pd, r0, eta, 400);
    CHECK(norm2(traj.back()) <= 1e-6 * norm2(r0));
    for (std::size_t t = 0; t + 1 < traj.size(); ++t)
        CHECK(norm2(traj[t + 1]) <= norm2(traj[t]) + 1e-12);

    const Mat zero(4, 4, 0.0);
    const auto flat = linearized_trajectory(zero, Vec{1, 2, 3, 4}, 0.1, 3);
    for (const auto& r : flat)
        for (std::size_t i = 0; i < 4; ++i) CHECK(r[i] == doctest::Approx(i + 1.0));
}

TEST_CASE("linearized_trajectory: per-mode closed form") {
    Rng rng(10);
    const Mat h = oracles::random_symmetric(7, rng);
    const Spectrum s = sym_eig(h);
    Vec r0(7);
    for (double& x : r0) x = rng.next_gaussian();
    const double eta = 0.05;
    const auto traj = linearized_trajectory(h, r0, eta, 30);
    for (std::size_t t = 0; t <= 30; ++t) {
        for (std::size_t j = 0; j < 7; ++j) {
            double c0 = 0.0, ct = 0.0;
            for (std::size_t i = 0; i < 7; ++i) {
                c0 += s.eigenvectors(i, j) * r0[i];
                ct += s.eigenvectors(i, j) * traj[t][i];
            }
            const double want = std::pow(1.0 - eta * s.eigenvalues[j], double(t)) * c0;
            CHECK(std::abs(ct - want) <= 1e-10 * std::max(1.0, std::abs(c0)));
        }
    }
}

TEST_CASE("label_noise_ratio_sweep: level zero is the clean baseline") {
    Rng rng(11);
    const Mat a = oracles::random_symmetric(10, rng);
    const Spectrum s = sym_eig(a);
    Vec y(10);
    for (double& x : y) x = rng.next_unit() < 0.5 ? -1.0 : 1.0;
    Rng sweep_rng(12);
    const auto ratios =
        label_noise_ratio_sweep(s, y, {0.0, 0.1, 0.2, 0.3, 0.4, 0.5}, 5, sweep_rng);
    REQUIRE(ratios.size() == 6);
    CHECK(ratios[0] == top_eigenspace_ratio(s, y, 5));
}
