#include "aird/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "aird/common.hpp"
#include "aird/eig.hpp"
#include "aird/parallel.hpp"

namespace aird {

using nlohmann::json;

namespace {
// Hidden units are reduced in fixed chunks of this many units, whatever the
// worker count, to keep parallel results bit-identical to sequential ones.
constexpr std::size_t kUnitChunk = 256;
}  // namespace

// ---------------------------------------------------------------------------
// Activation
// ---------------------------------------------------------------------------

Activation::Activation(ActKind kind) : kind_(kind), gamma_(1.0) {
    if (kind_ == ActKind::Relu) {
        gamma_ = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    // Sampled certificate for gamma on [-10, 10]; raise gamma if the samples
    // ever exceed 1 (they do not for tanh/softplus/identity).
    double m = std::abs(phi(0.0));
    for (int i = 0; i <= 2000; ++i) {
        const double x = -10.0 + i * 0.01;
        m = std::max({m, std::abs(dphi(x)), std::abs(d2phi(x))});
    }
    gamma_ = std::max(1.0, m);
}

Activation Activation::make(ActKind kind) { return Activation(kind); }

Activation Activation::parse(const std::string& name) {
    if (name == "tanh") return make(ActKind::Tanh);
    if (name == "softplus") return make(ActKind::Softplus);
    if (name == "identity") return make(ActKind::Identity);
    if (name == "relu") return make(ActKind::Relu);
    throw AssumptionViolation("unknown activation '" + name + "'");
}

double Activation::phi(double x) const {
    switch (kind_) {
        case ActKind::Tanh: return std::tanh(x);
        case ActKind::Softplus:
            // log(1 + e^x), overflow-safe.
            return x > 30.0 ? x : std::log1p(std::exp(x));
        case ActKind::Identity: return x;
        case ActKind::Relu: return x > 0.0 ? x : 0.0;
    }
    return 0.0;
}

double Activation::dphi(double x) const {
    switch (kind_) {
        case ActKind::Tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case ActKind::Softplus: return 1.0 / (1.0 + std::exp(-x));
        case ActKind::Identity: return 1.0;
        case ActKind::Relu: return x > 0.0 ? 1.0 : 0.0;
    }
    return 0.0;
}

double Activation::d2phi(double x) const {
    switch (kind_) {
        case ActKind::Tanh: {
            const double t = std::tanh(x);
            return -2.0 * t * (1.0 - t * t);
        }
        case ActKind::Softplus: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 - s);
        }
        case ActKind::Identity: return 0.0;
        case ActKind::Relu: return 0.0;  // a.e.; the kink makes it non-smooth
    }
    return 0.0;
}

double Activation::gamma() const {
    if (!smooth())
        throw AssumptionViolation("gamma is undefined for the non-smooth relu activation");
    return gamma_;
}

const char* Activation::name() const {
    switch (kind_) {
        case ActKind::Tanh: return "tanh";
        case ActKind::Softplus: return "softplus";
        case ActKind::Identity: return "identity";
        case ActKind::Relu: return "relu";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

Vec make_output_vector(std::size_t k) {
    if (k < 2 || k % 2 != 0)
        throw AssumptionViolation("network width k must be even and >= 2");
    Vec v(k);
    const double a = 1.0 / std::sqrt(static_cast<double>(k));
    for (std::size_t m = 0; m < k; ++m) v[m] = m < k / 2 ? a : -a;
    return v;
}

TwoLayerNet init_network(std::size_t k, std::size_t d, Activation act, Rng& rng) {
    if (d < 1) throw AssumptionViolation("init_network: d must be >= 1");
    TwoLayerNet net{Mat(k, d), make_output_vector(k), act};
    for (double& w : net.W.data) w = rng.next_gaussian();
    return net;
}

namespace {

void check_data_dims(const TwoLayerNet& net, const Mat& X, const char* who) {
    if (X.cols != net.d())
        throw DimensionError(std::string(who) + ": X has " + std::to_string(X.cols) +
                             " columns, network expects " + std::to_string(net.d()));
    if (net.v.size() != net.k())
        throw DimensionError(std::string(who) + ": output vector length disagrees with k");
}

}  // namespace

void forward_with_cache(const TwoLayerNet& net, const Mat& X, EvalCache& cache) {
    check_data_dims(net, X, "forward");
    const std::size_t n = X.rows, k = net.k(), d = net.d();
    if (cache.dphi_t.rows != k || cache.dphi_t.cols != n) cache.dphi_t = Mat(k, n);
    cache.f.assign(n, 0.0);

    const std::size_t nchunks = (k + kUnitChunk - 1) / kUnitChunk;
    std::vector<Vec> partial(nchunks, Vec(n, 0.0));

    parallel_jobs(nchunks, [&](std::size_t c) {
        const std::size_t m_lo = c * kUnitChunk;
        const std::size_t m_hi = std::min(k, m_lo + kUnitChunk);
        Vec& acc = partial[c];
        for (std::size_t m = m_lo; m < m_hi; ++m) {
            const double vm = net.v[m];
            const double* w = net.W.data.data() + m * d;
            double* dp = cache.dphi_t.data.data() + m * n;
            for (std::size_t i = 0; i < n; ++i) {
                const double* x = X.data.data() + i * d;
                double a = 0.0;
                for (std::size_t j = 0; j < d; ++j) a += w[j] * x[j];
                acc[i] += vm * net.act.phi(a);
                dp[i] = net.act.dphi(a);
            }
        }
    });
    // Combine partials in chunk order (fixed reduction order).
    for (std::size_t c = 0; c < nchunks; ++c)
        for (std::size_t i = 0; i < n; ++i) cache.f[i] += partial[c][i];
}

Vec forward(const TwoLayerNet& net, const Mat& X) {
    EvalCache cache;
    forward_with_cache(net, X, cache);
    return cache.f;
}

Mat gradient_from_residual(const TwoLayerNet& net, const Mat& X, const Vec& residual,
                           const EvalCache& cache) {
    check_data_dims(net, X, "gradient");
    const std::size_t n = X.rows, k = net.k(), d = net.d();
    if (residual.size() != n) throw DimensionError("gradient: residual length != n");
    if (cache.dphi_t.rows != k || cache.dphi_t.cols != n)
        throw DimensionError("gradient: cache does not match (net, X)");

    Mat grad(k, d, 0.0);
    // Each gradient row depends only on hidden unit m; no cross-thread
    // reduction, so any partition over m is bitwise deterministic.
    parallel_chunks(k, kUnitChunk, [&](std::size_t m_lo, std::size_t m_hi) {
        for (std::size_t m = m_lo; m < m_hi; ++m) {
            const double vm = net.v[m];
            const double* dp = cache.dphi_t.data.data() + m * n;
            double* g = grad.data.data() + m * d;
            for (std::size_t i = 0; i < n; ++i) {
                const double c = vm * residual[i] * dp[i];
                if (c == 0.0) continue;
                const double* x = X.data.data() + i * d;
                for (std::size_t j = 0; j < d; ++j) g[j] += c * x[j];
            }
        }
    });
    return grad;
}

Mat jacobian(const TwoLayerNet& net, const Mat& X) {
    check_data_dims(net, X, "jacobian");
    const std::size_t n = X.rows, k = net.k(), d = net.d();
    Mat J(n, k * d);
    parallel_chunks(n, 8, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const double* x = X.data.data() + i * d;
            double* row = J.data.data() + i * (k * d);
            for (std::size_t m = 0; m < k; ++m) {
                const double* w = net.W.data.data() + m * d;
                double a = 0.0;
                for (std::size_t j = 0; j < d; ++j) a += w[j] * x[j];
                const double c = net.v[m] * net.act.dphi(a);
                for (std::size_t j = 0; j < d; ++j) row[m * d + j] = c * x[j];
            }
        }
    });
    return J;
}

Mat cross_gram(const Activation& act, const Mat& W1, const Mat& X1,
               const Mat& W2, const Mat& X2) {
    if (W1.rows != W2.rows || W1.cols != W2.cols)
        throw DimensionError("cross_gram: weight shapes disagree");
    if (X1.cols != W1.cols || X2.cols != W2.cols)
        throw DimensionError("cross_gram: data dimension disagrees with weights");
    const std::size_t k = W1.rows;
    const std::size_t n1 = X1.rows, n2 = X2.rows;

    // phi'(X W^T), n x k, row-major per data point.
    auto dphi_mat = [&](const Mat& W, const Mat& X) {
        Mat P(X.rows, k);
        parallel_chunks(X.rows, 8, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                const double* x = X.data.data() + i * X.cols;
                double* p = P.data.data() + i * k;
                for (std::size_t m = 0; m < k; ++m) {
                    const double* w = W.data.data() + m * W.cols;
                    double a = 0.0;
                    for (std::size_t j = 0; j < W.cols; ++j) a += w[j] * x[j];
                    p[m] = act.dphi(a);
                }
            }
        });
        return P;
    };
    const Mat P1 = dphi_mat(W1, X1);
    const Mat P2 = dphi_mat(W2, X2);

    Mat G(n1, n2);
    const double inv_k = 1.0 / static_cast<double>(k);
    parallel_chunks(n1, 8, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            for (std::size_t j = 0; j < n2; ++j)
                G(i, j) = inv_k * dot(P1.row(i), P2.row(j)) * dot(X1.row(i), X2.row(j));
    });
    return G;
}

Mat gram(const TwoLayerNet& net, const Mat& X) {
    check_data_dims(net, X, "gram");
    const std::size_t n = X.rows, k = net.k(), d = net.d();

    Mat P(n, k);  // phi'(X W^T)
    parallel_chunks(n, 8, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const double* x = X.data.data() + i * d;
            double* p = P.data.data() + i * k;
            for (std::size_t m = 0; m < k; ++m) {
                const double* w = net.W.data.data() + m * d;
                double a = 0.0;
                for (std::size_t j = 0; j < d; ++j) a += w[j] * x[j];
                p[m] = net.act.dphi(a);
            }
        }
    });

    Mat G(n, n);
    const double inv_k = 1.0 / static_cast<double>(k);
    // Upper triangle, mirrored: symmetric by construction.
    parallel_chunks(n, 4, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            for (std::size_t j = i; j < n; ++j) {
                const double g = inv_k * dot(P.row(i), P.row(j)) * dot(X.row(i), X.row(j));
                G(i, j) = g;
                G(j, i) = g;
            }
        }
    });
    return G;
}

LossGrad loss_and_gradient(const TwoLayerNet& net, const Mat& X, const Vec& y) {
    check_data_dims(net, X, "loss_and_gradient");
    if (y.size() != X.rows) throw DimensionError("loss_and_gradient: y length != n");
    EvalCache cache;
    forward_with_cache(net, X, cache);
    Vec r(X.rows);
    double loss = 0.0;
    for (std::size_t i = 0; i < X.rows; ++i) {
        r[i] = cache.f[i] - y[i];
        loss += r[i] * r[i];
    }
    loss *= 0.5;
    return {loss, gradient_from_residual(net, X, r, cache)};
}

double jacobian_spectral_norm(const TwoLayerNet& net, const Mat& X) {
    const Spectrum s = sym_eig(gram(net, X));
    return std::sqrt(std::max(0.0, s.eigenvalues.front()));
}

double jacobian_sigma_min(const TwoLayerNet& net, const Mat& X) {
    const Spectrum s = sym_eig(gram(net, X));
    return std::sqrt(std::max(0.0, s.eigenvalues.back()));
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void save_checkpoint(const TwoLayerNet& net, const std::string& path) {
    json j;
    j["k"] = net.k();
    j["d"] = net.d();
    j["activation"] = net.act.name();
    j["gamma"] = net.act.smooth() ? json(net.act.gamma()) : json(nullptr);
    json rows = json::array();
    for (std::size_t m = 0; m < net.k(); ++m) {
        json r = json::array();
        for (double w : net.W.row(m)) r.push_back(w);
        rows.push_back(std::move(r));
    }
    j["W"] = std::move(rows);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("save_checkpoint: cannot open '" + path + "'");
    out << j.dump() << '\n';
    if (!out) throw LoadError("save_checkpoint: write failed for '" + path + "'");
}

TwoLayerNet load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("load_checkpoint: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw LoadError("load_checkpoint: malformed JSON: " + std::string(e.what()));
    }
    const auto k = j.at("k").get<std::size_t>();
    const auto d = j.at("d").get<std::size_t>();
    Activation act = Activation::parse(j.at("activation").get<std::string>());
    TwoLayerNet net{Mat(k, d), make_output_vector(k), act};
    const auto& rows = j.at("W");
    if (!rows.is_array() || rows.size() != k)
        throw LoadError("load_checkpoint: W must have k rows");
    for (std::size_t m = 0; m < k; ++m) {
        if (!rows[m].is_array() || rows[m].size() != d)
            throw LoadError("load_checkpoint: W row " + std::to_string(m) +
                            " must have d entries");
        for (std::size_t c = 0; c < d; ++c) net.W(m, c) = rows[m][c].get<double>();
    }
    if (!all_finite(net.W)) throw LoadError("load_checkpoint: non-finite weights");
    return net;
}

}  // namespace aird
