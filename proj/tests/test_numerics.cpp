#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aird/common.hpp"
#include "aird/eig.hpp"
#include "aird/mat.hpp"
#include "aird/rng.hpp"
#include "oracles.hpp"

using namespace aird;

TEST_CASE("sym_eig: diagonal matrix") {
    Mat a(2, 2);
    a(0, 0) = 2.0;
    a(1, 1) = 1.0;
    const Spectrum s = sym_eig(a);
    CHECK(s.eigenvalues[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(s.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.eigenvectors(0, 0) == doctest::Approx(1.0));
    CHECK(s.eigenvectors(1, 0) == doctest::Approx(0.0));
    CHECK(s.eigenvectors(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("sym_eig: 2x2 off-diagonal, analytic solve") {
    Mat a(2, 2);
    a(0, 1) = 1.0;
    a(1, 0) = 1.0;
    const Spectrum s = sym_eig(a);
    CHECK(s.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.eigenvalues[1] == doctest::Approx(-1.0).epsilon(1e-12));
    const double r = 1.0 / std::sqrt(2.0);
    CHECK(s.eigenvectors(0, 0) == doctest::Approx(r).epsilon(1e-12));
    CHECK(s.eigenvectors(1, 0) == doctest::Approx(r).epsilon(1e-12));
    // Sign convention puts the largest-magnitude entry positive; with a tie
    // the lowest index wins, so the second column is (1,-1)/sqrt(2).
    CHECK(s.eigenvectors(0, 1) == doctest::Approx(r).epsilon(1e-12));
    CHECK(s.eigenvectors(1, 1) == doctest::Approx(-r).epsilon(1e-12));
}

TEST_CASE("sym_eig: random 50x50 reconstruction and orthonormality") {
    Rng rng(7);
    const Mat a = oracles::random_symmetric(50, rng);
    const Spectrum s = sym_eig(a);
    const std::size_t n = 50;

    Mat recon(n, n, 0.0);
    for (std::size_t l = 0; l < n; ++l)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                recon(i, j) += s.eigenvalues[l] * s.eigenvectors(i, l) * s.eigenvectors(j, l);
    CHECK(frobenius_diff(recon, a) <= 1e-9 * frobenius_norm(a));

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            double d = 0.0;
            for (std::size_t r = 0; r < n; ++r)
                d += s.eigenvectors(r, i) * s.eigenvectors(r, j);
            CHECK(std::abs(d - (i == j ? 1.0 : 0.0)) < 1e-10);
        }
    for (std::size_t i = 0; i + 1 < n; ++i)
        CHECK(s.eigenvalues[i] >= s.eigenvalues[i + 1]);
}

TEST_CASE("sym_eig: matches characteristic-polynomial roots for n <= 3") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng.next_below(3));
        const Mat a = oracles::random_symmetric(n, rng, 3.0);
        const auto roots = oracles::char_poly_roots(a);
        const Spectrum s = sym_eig(a);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(s.eigenvalues[i] - roots[i]) <=
                  1e-8 * std::max(1.0, std::abs(roots[i])));
    }
}

TEST_CASE("sym_eig: rejects bad input") {
    CHECK_THROWS_AS(sym_eig(Mat(2, 3)), DimensionError);
    Mat a(2, 2);
    a(0, 1) = 1.0;
    a(1, 0) = 2.0;
    CHECK_THROWS_AS(sym_eig(a), DimensionError);
}

TEST_CASE("sym_eig: deterministic for a given input") {
    Rng rng(3);
    const Mat a = oracles::random_symmetric(20, rng);
    const Spectrum s1 = sym_eig(a);
    const Spectrum s2 = sym_eig(a);
    CHECK(s1.eigenvalues == s2.eigenvalues);
    CHECK(s1.eigenvectors == s2.eigenvectors);
}

TEST_CASE("unit_sphere_sample: norms and edge cases") {
    Rng rng(5);
    CHECK_THROWS_AS(unit_sphere_sample(0, rng), DimensionError);

    for (int i = 0; i < 100; ++i) {
        const Vec v1 = unit_sphere_sample(1, rng);
        CHECK((v1[0] == 1.0 || v1[0] == -1.0));
    }
    const Vec v3 = unit_sphere_sample(3, rng);
    CHECK(std::abs(norm2(v3) - 1.0) <= 1e-12);
}

TEST_CASE("unit_sphere_sample: law of large numbers in d=2") {
    Rng rng(123);
    Vec mean(2, 0.0);
    const int N = 10000;
    for (int i = 0; i < N; ++i) {
        const Vec v = unit_sphere_sample(2, rng);
        mean[0] += v[0];
        mean[1] += v[1];
    }
    mean[0] /= N;
    mean[1] /= N;
    CHECK(norm2(mean) <= 0.05);
}

TEST_CASE("project_onto_span: axis examples and hand projection") {
    Mat e1(2, 1);
    e1(0, 0) = 1.0;
    Vec v{1.0, 0.0};
    CHECK(project_onto_span(e1, v) == Vec{1.0, 0.0});
    CHECK(project_onto_span(e1, Vec{0.0, 1.0}) == Vec{0.0, 0.0});

    Mat diag(2, 1);
    diag(0, 0) = 1.0 / std::sqrt(2.0);
    diag(1, 0) = 1.0 / std::sqrt(2.0);
    const Vec p = project_onto_span(diag, Vec{1.0, 0.0});
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("project_onto_span: idempotent, contractive, matches naive oracle") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 4 + rng.next_below(8);
        const Mat a = oracles::random_symmetric(n, rng);
        const Spectrum s = sym_eig(a);
        const std::size_t m = 1 + rng.next_below(n);
        const Mat basis = top_eigenvectors(s, m);

        Vec v(n);
        for (double& x : v) x = rng.next_gaussian();

        const Vec p = project_onto_span(basis, v);
        const Vec pp = project_onto_span(basis, p);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(pp[i] - p[i]) <= 1e-12);
        CHECK(norm2(p) <= norm2(v) + 1e-12);

        const Vec q = oracles::naive_projection(basis, v);
        for (std::size_t i = 0; i < n; ++i) CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-12));
    }
}

TEST_CASE("project_onto_span: rejects non-orthonormal basis and bad dims") {
    Mat b(2, 1);
    b(0, 0) = 2.0;
    CHECK_THROWS_AS(project_onto_span(b, Vec{1.0, 0.0}), DimensionError);
    Mat e1(2, 1);
    e1(0, 0) = 1.0;
    CHECK_THROWS_AS(project_onto_span(e1, Vec{1.0, 0.0, 0.0}), DimensionError);
}

TEST_CASE("rng: equal seeds give equal draws (1e6)") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000000; ++i) REQUIRE(a.next_u64() == b.next_u64());
    Rng c(42), d(43);
    bool differ = false;
    for (int i = 0; i < 16; ++i)
        if (c.next_u64() != d.next_u64()) differ = true;
    CHECK(differ);
}

TEST_CASE("rng: forked streams are stable and independent of parent position") {
    Rng a(9);
    const Rng f1 = a.fork(5);
    a.next_u64();
    const Rng f2 = a.fork(5);
    Rng g1 = f1, g2 = f2;
    CHECK(g1.next_u64() == g2.next_u64());  // fork depends on seed+key only
    Rng h = a.fork(6);
    CHECK(g1.next_u64() != h.next_u64());
}

TEST_CASE("rng: gaussian moments sane") {
    Rng rng(31);
    double sum = 0.0, sum2 = 0.0;
    const int N = 200000;
    for (int i = 0; i < N; ++i) {
        const double g = rng.next_gaussian();
        sum += g;
        sum2 += g * g;
    }
    CHECK(std::abs(sum / N) < 0.01);
    CHECK(sum2 / N == doctest::Approx(1.0).epsilon(0.02));
}
