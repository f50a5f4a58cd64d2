#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "aird/common.hpp"
#include "aird/eig.hpp"
#include "aird/network.hpp"
#include "oracles.hpp"

using namespace aird;

TEST_CASE("activation: sampled bounds and finite-difference consistency") {
    for (ActKind kind : {ActKind::Tanh, ActKind::Softplus, ActKind::Identity}) {
        const Activation act = Activation::make(kind);
        const double g = act.gamma();
        CHECK(g >= 1.0);
        CHECK(std::abs(act.phi(0.0)) <= g);
        for (int i = 0; i <= 2000; ++i) {
            const double x = -10.0 + i * 0.01;
            REQUIRE(std::abs(act.dphi(x)) <= g);
            REQUIRE(std::abs(act.d2phi(x)) <= g);
            const double h = 1e-6;
            const double fd = (act.phi(x + h) - act.phi(x - h)) / (2.0 * h);
            REQUIRE(std::abs(act.dphi(x) - fd) <= 1e-6);
        }
    }
    const Activation relu = Activation::make(ActKind::Relu);
    CHECK_FALSE(relu.smooth());
    CHECK_THROWS_AS(relu.gamma(), AssumptionViolation);
    CHECK(Activation::make(ActKind::Tanh).gamma() == 1.0);
}

TEST_CASE("init_network: output vector split and parity") {
    Rng rng(1);
    const auto net = init_network(4, 3, Activation::make(ActKind::Tanh), rng);
    CHECK(net.v == Vec{0.5, 0.5, -0.5, -0.5});
    double sum = 0.0;
    for (double x : net.v) sum += x;
    CHECK(sum == 0.0);
    CHECK(std::abs(norm2(net.v) - 1.0) <= 1e-12);
    CHECK_THROWS_AS(init_network(3, 2, Activation::make(ActKind::Tanh), rng),
                    AssumptionViolation);

    Rng rng2(2);
    const auto small = init_network(2, 1, Activation::make(ActKind::Tanh), rng2);
    CHECK(small.W.rows == 2);
    CHECK(small.W.cols == 1);
    CHECK(std::abs(norm2(small.v) - 1.0) <= 1e-12);
}

TEST_CASE("init_network: weights look standard normal") {
    Rng rng(7);
    const auto net = init_network(256, 16, Activation::make(ActKind::Tanh), rng);
    double mean = 0.0, var = 0.0;
    for (double w : net.W.data) mean += w;
    mean /= static_cast<double>(net.W.data.size());
    for (double w : net.W.data) var += (w - mean) * (w - mean);
    var /= static_cast<double>(net.W.data.size());
    CHECK(std::abs(mean) < 0.05);
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("forward: identity activation equals linear map") {
    Rng rng(3);
    const auto net = init_network(8, 5, Activation::make(ActKind::Identity), rng);
    const Mat X = oracles::random_unit_rows(6, 5, rng);
    const Vec f = forward(net, X);
    for (std::size_t i = 0; i < X.rows; ++i) {
        const Vec wx = matvec(net.W, X.row(i));
        CHECK(f[i] == doctest::Approx(dot(net.v, wx)).epsilon(1e-12));
    }
}

TEST_CASE("forward: zero weights give zero outputs") {
    Rng rng(4);
    auto net = init_network(6, 4, Activation::make(ActKind::Tanh), rng);
    std::fill(net.W.data.begin(), net.W.data.end(), 0.0);
    const Mat X = oracles::random_unit_rows(5, 4, rng);
    for (double f : forward(net, X)) CHECK(f == 0.0);
}

TEST_CASE("forward: hand evaluation k=2 d=1") {
    TwoLayerNet net{Mat(2, 1), make_output_vector(2), Activation::make(ActKind::Tanh)};
    net.W(0, 0) = 1.0;
    net.W(1, 0) = 1.0;
    Mat X(1, 1);
    X(0, 0) = 1.0;
    const Vec f = forward(net, X);
    CHECK(f[0] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("forward: exactly linear in v") {
    Rng rng(5);
    auto net = init_network(16, 6, Activation::make(ActKind::Tanh), rng);
    const Mat X = oracles::random_unit_rows(4, 6, rng);
    const Vec f1 = forward(net, X);
    for (double& v : net.v) v *= 3.0;
    const Vec f3 = forward(net, X);
    for (std::size_t i = 0; i < f1.size(); ++i)
        CHECK(f3[i] == doctest::Approx(3.0 * f1[i]).epsilon(1e-12));
}

TEST_CASE("forward: dimension mismatch") {
    Rng rng(6);
    const auto net = init_network(4, 3, Activation::make(ActKind::Tanh), rng);
    CHECK_THROWS_AS(forward(net, Mat(2, 5)), DimensionError);
}

TEST_CASE("jacobian: identity activation rows are vec(v x^T)") {
    Rng rng(8);
    const auto net = init_network(6, 4, Activation::make(ActKind::Identity), rng);
    const Mat X = oracles::random_unit_rows(3, 4, rng);
    const Mat J = jacobian(net, X);
    REQUIRE(J.rows == 3);
    REQUIRE(J.cols == 24);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t m = 0; m < 6; ++m)
            for (std::size_t j = 0; j < 4; ++j)
                CHECK(J(i, m * 4 + j) == doctest::Approx(net.v[m] * X(i, j)).epsilon(1e-14));
}

TEST_CASE("jacobian: matches finite differences of forward") {
    Rng rng(9);
    const auto net = init_network(10, 5, Activation::make(ActKind::Tanh), rng);
    const Mat X = oracles::random_unit_rows(4, 5, rng);
    const Mat J = jacobian(net, X);
    const Mat Jfd = oracles::fd_jacobian(net, X);
    const double scale = std::max(1.0, max_abs(Jfd.data));
    for (std::size_t i = 0; i < J.data.size(); ++i)
        CHECK(std::abs(J.data[i] - Jfd.data[i]) <= 1e-5 * scale);
}

TEST_CASE("jacobian: spectral norm bounded by Gamma sqrt(n)") {
    Rng rng(10);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = 4 + rng.next_below(12);
        const std::size_t d = 3 + rng.next_below(6);
        const auto net = init_network(32, d, Activation::make(ActKind::Tanh), rng);
        const Mat X = oracles::random_unit_rows(n, d, rng);
        CHECK(jacobian_spectral_norm(net, X) <=
              net.act.gamma() * std::sqrt(static_cast<double>(n)) + 1e-9);
    }
}

TEST_CASE("gram: identity activation gives X X^T") {
    Rng rng(11);
    const auto net = init_network(8, 5, Activation::make(ActKind::Identity), rng);
    const Mat X = oracles::random_unit_rows(6, 5, rng);
    const Mat G = gram(net, X);
    const Mat XXt = matmul_nt(X, X);
    CHECK(frobenius_diff(G, XXt) <= 1e-12);
}

TEST_CASE("gram: Hadamard identity matches explicit J J^T") {
    Rng rng(12);
    for (int trial = 0; trial < 8; ++trial) {
        const std::size_t k = 2 * (1 + rng.next_below(32));  // <= 64
        const std::size_t n = 2 + rng.next_below(31);        // <= 32
        const std::size_t d = 2 + rng.next_below(8);
        const auto net = init_network(k, d, Activation::make(ActKind::Tanh), rng);
        const Mat X = oracles::random_unit_rows(n, d, rng);
        const Mat G = gram(net, X);
        const Mat J = jacobian(net, X);
        const Mat JJt = matmul_nt(J, J);
        CHECK(frobenius_diff(G, JJt) <= 1e-10);
        // Symmetric, eigenvalues >= -1e-10.
        const Spectrum s = sym_eig(G);
        CHECK(s.eigenvalues.back() >= -1e-10);
    }
}

TEST_CASE("gram: single unit data point") {
    Rng rng(13);
    const auto net = init_network(16, 4, Activation::make(ActKind::Tanh), rng);
    Mat X(1, 4);
    const Vec x = unit_sphere_sample(4, rng);
    std::copy(x.begin(), x.end(), X.row(0).begin());
    const Mat G = gram(net, X);
    double want = 0.0;
    for (std::size_t m = 0; m < 16; ++m) {
        const double a = dot(net.W.row(m), x);
        want += net.act.dphi(a) * net.act.dphi(a);
    }
    want /= 16.0;
    CHECK(G(0, 0) == doctest::Approx(want).epsilon(1e-12));
    CHECK(G(0, 0) <= net.act.gamma() * net.act.gamma());
}

TEST_CASE("loss_and_gradient: zero residual") {
    Rng rng(14);
    const auto net = init_network(8, 3, Activation::make(ActKind::Tanh), rng);
    const Mat X = oracles::random_unit_rows(5, 3, rng);
    const Vec y = forward(net, X);
    const auto [loss, grad] = loss_and_gradient(net, X, y);
    CHECK(loss == 0.0);
    for (double g : grad.data) CHECK(g == 0.0);
}

TEST_CASE("loss_and_gradient: hand formula, n=1 identity activation") {
    Rng rng(15);
    const auto net = init_network(4, 3, Activation::make(ActKind::Identity), rng);
    Mat X(1, 3);
    const Vec x = unit_sphere_sample(3, rng);
    std::copy(x.begin(), x.end(), X.row(0).begin());
    const Vec y{0.7};
    const auto [loss, grad] = loss_and_gradient(net, X, y);
    const double r = dot(net.v, matvec(net.W, x)) - y[0];
    CHECK(loss == doctest::Approx(0.5 * r * r).epsilon(1e-12));
    for (std::size_t m = 0; m < 4; ++m)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(grad(m, j) == doctest::Approx(r * net.v[m] * x[j]).epsilon(1e-12));
}

TEST_CASE("loss_and_gradient: finite-difference agreement") {
    Rng rng(16);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t k = 2 * (1 + rng.next_below(8));
        const std::size_t d = 2 + rng.next_below(5);
        const std::size_t n = 2 + rng.next_below(6);
        const auto net = init_network(k, d, Activation::make(ActKind::Tanh), rng);
        const Mat X = oracles::random_unit_rows(n, d, rng);
        Vec y(n);
        for (double& v : y) v = rng.next_gaussian();
        const auto [loss, grad] = loss_and_gradient(net, X, y);
        const Mat fd = oracles::fd_loss_gradient(net, X, y);
        const double scale = std::max(1.0, max_abs(fd.data));
        for (std::size_t i = 0; i < grad.data.size(); ++i)
            CHECK(std::abs(grad.data[i] - fd.data[i]) <= 1e-5 * scale);
    }
}

TEST_CASE("jacobian Lipschitz bound (one-sided, sampled)") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t k = 2 * (4 + rng.next_below(16));
        const std::size_t n = 4 + rng.next_below(8);
        const std::size_t d = 3 + rng.next_below(5);
        const Activation act = Activation::make(ActKind::Tanh);
        Rng local = rng.fork(trial);
        const auto a = init_network(k, d, act, local);
        auto b = a;
        for (double& w : b.W.data) w += 0.3 * local.next_gaussian();
        const Mat X = oracles::random_unit_rows(n, d, local);

        const Mat g11 = cross_gram(act, a.W, X, a.W, X);
        const Mat g22 = cross_gram(act, b.W, X, b.W, X);
        const Mat g12 = cross_gram(act, a.W, X, b.W, X);
        Mat D(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                D(i, j) = g11(i, j) + g22(i, j) - g12(i, j) - g12(j, i);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double v = 0.5 * (D(i, j) + D(j, i));
                D(i, j) = D(j, i) = v;
            }
        const double lhs = std::sqrt(std::max(0.0, sym_eig(D).eigenvalues.front()));

        double diff = 0.0;
        for (std::size_t i = 0; i < a.W.data.size(); ++i) {
            const double dd = a.W.data[i] - b.W.data[i];
            diff += dd * dd;
        }
        const double rhs = act.gamma() * std::sqrt(static_cast<double>(n)) /
                           std::sqrt(static_cast<double>(k)) * std::sqrt(diff);
        CHECK(lhs <= rhs * (1.0 + 1e-9));

        // Cross-gram itself against explicit Jacobians.
        const Mat J1 = jacobian(a, X);
        const Mat J2 = jacobian(b, X);
        const Mat ref = matmul_nt(J1, J2);
        CHECK(frobenius_diff(g12, ref) <= 1e-10);
    }
}

TEST_CASE("forward: reduction order is the documented fixed chunking") {
    // Parallel evaluation must agree bitwise with the fixed chunk-of-256
    // sequential reduction, whatever the worker count.
    Rng rng(18);
    const std::size_t k = 600, d = 7, n = 9;
    const auto net = init_network(k, d, Activation::make(ActKind::Tanh), rng);
    const Mat X = oracles::random_unit_rows(n, d, rng);
    const Vec f = forward(net, X);

    for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (std::size_t lo = 0; lo < k; lo += 256) {
            double partial = 0.0;
            for (std::size_t m = lo; m < std::min(k, lo + 256); ++m)
                partial += net.v[m] * net.act.phi(dot(net.W.row(m), X.row(i)));
            total += partial;
        }
        CHECK(f[i] == total);
    }
}

TEST_CASE("checkpoint: save/load round-trip, v reconstructed") {
    Rng rng(19);
    const auto net = init_network(8, 3, Activation::make(ActKind::Softplus), rng);
    const std::string path =
        (std::filesystem::temp_directory_path() / "aird_ckpt.json").string();
    save_checkpoint(net, path);
    const auto back = load_checkpoint(path);
    CHECK(back.W == net.W);
    CHECK(back.v == net.v);
    CHECK(back.act.kind() == net.act.kind());
    std::remove(path.c_str());
}
