#include "aird/ntk.hpp"

#include <algorithm>
#include <cmath>

#include "aird/common.hpp"
#include "aird/parallel.hpp"

namespace aird {

namespace {
constexpr std::size_t kSampleChunk = 256;
}

Mat covariance_matrix(const Mat& D, const Activation& act, std::size_t samples, Rng& rng) {
    if (samples == 0) throw AssumptionViolation("covariance_matrix: samples must be >= 1");
    if (!all_finite(D)) throw AssumptionViolation("covariance_matrix: non-finite rows");
    const std::size_t m = D.rows, d = D.cols;

    // One stream key per call; each sample is then keyed by (stream, index),
    // so the result is independent of the worker count.
    const Rng stream(rng.next_u64());

    const std::size_t nchunks = (samples + kSampleChunk - 1) / kSampleChunk;
    // Upper-triangular accumulators per chunk, combined in chunk order.
    std::vector<Vec> partial(nchunks, Vec(m * (m + 1) / 2, 0.0));

    parallel_jobs(nchunks, [&](std::size_t c) {
        Vec u(m);
        Vec g(d);
        Vec& acc = partial[c];
        const std::size_t lo = c * kSampleChunk;
        const std::size_t hi = std::min(samples, lo + kSampleChunk);
        for (std::size_t s = lo; s < hi; ++s) {
            Rng draw = stream.fork(s);
            for (std::size_t j = 0; j < d; ++j) g[j] = draw.next_gaussian();
            for (std::size_t i = 0; i < m; ++i) u[i] = act.dphi(dot(D.row(i), g));
            std::size_t idx = 0;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = i; j < m; ++j) acc[idx++] += u[i] * u[j];
        }
    });

    Vec total(m * (m + 1) / 2, 0.0);
    for (std::size_t c = 0; c < nchunks; ++c)
        for (std::size_t t = 0; t < total.size(); ++t) total[t] += partial[c][t];

    Mat sigma(m, m);
    const double inv = 1.0 / static_cast<double>(samples);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            const double e = total[idx++] * inv;
            const double v = e * dot(D.row(i), D.row(j));
            sigma(i, j) = v;
            sigma(j, i) = v;
        }
    }
    return sigma;
}

double lambda_min(const Mat& D, const Activation& act, std::size_t samples, Rng& rng) {
    const Spectrum s = sym_eig(covariance_matrix(D, act, samples, rng));
    return s.eigenvalues.back();
}

double lambda_pair_min(const Mat& C, const Mat& X, const Activation& act,
                       std::size_t samples, Rng& rng) {
    const double lc = lambda_min(C, act, samples, rng);
    const double lx = lambda_min(X, act, samples, rng);
    return std::min(lc, lx);
}

double top_eigenspace_ratio(const Spectrum& spectrum, const Vec& label, std::size_t m,
                            bool squared) {
    const std::size_t n = spectrum.size();
    if (label.size() != n) throw DimensionError("top_eigenspace_ratio: label length != n");
    if (m > n) throw DimensionError("top_eigenspace_ratio: m exceeds n");
    const double norm = norm2(label);
    if (norm == 0.0) throw AssumptionViolation("top_eigenspace_ratio: zero label vector");

    double proj_sq = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += spectrum.eigenvectors(i, j) * label[i];
        proj_sq += c * c;
    }
    const double ratio_sq = proj_sq / (norm * norm);
    return squared ? ratio_sq : std::sqrt(ratio_sq);
}

double top_eigenspace_ratio(const Mat& H, const Vec& label, std::size_t m, bool squared) {
    return top_eigenspace_ratio(sym_eig(H), label, m, squared);
}

double information_gain(const Spectrum& spectrum, const Vec& distill_label,
                        const Vec& raw_label, std::size_t m, bool squared) {
    return top_eigenspace_ratio(spectrum, distill_label, m, squared) -
           top_eigenspace_ratio(spectrum, raw_label, m, squared);
}

double information_gain(const Mat& H, const Vec& distill_label, const Vec& raw_label,
                        std::size_t m, bool squared) {
    const Spectrum s = sym_eig(H);
    return information_gain(s, distill_label, raw_label, m, squared);
}

std::vector<Vec> linearized_trajectory(const Mat& H, const Vec& r0, double eta,
                                       std::size_t steps) {
    if (!(eta > 0.0)) throw AssumptionViolation("linearized_trajectory: eta must be > 0");
    const Spectrum s = sym_eig(H);
    const std::size_t n = s.size();
    if (r0.size() != n) throw DimensionError("linearized_trajectory: r0 length != n");

    // Coefficients in the eigenbasis.
    Vec c0(n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) c0[j] += s.eigenvectors(i, j) * r0[i];

    std::vector<Vec> out(steps + 1, Vec(n, 0.0));
    Vec c = c0;
    for (std::size_t t = 0; t <= steps; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            double x = 0.0;
            for (std::size_t j = 0; j < n; ++j) x += s.eigenvectors(i, j) * c[j];
            out[t][i] = x;
        }
        for (std::size_t j = 0; j < n; ++j) c[j] *= 1.0 - eta * s.eigenvalues[j];
    }
    return out;
}

std::vector<double> label_noise_ratio_sweep(const Spectrum& spectrum, const Vec& y_clean,
                                            const std::vector<double>& levels,
                                            std::size_t m, Rng& rng, bool squared) {
    const std::size_t n = y_clean.size();
    const Rng stream(rng.next_u64());
    std::vector<double> ratios;
    ratios.reserve(levels.size());
    for (std::size_t li = 0; li < levels.size(); ++li) {
        const double p = levels[li];
        if (!(p >= 0.0) || p > 0.5 + 1e-12)
            throw AssumptionViolation("label_noise_ratio_sweep: level outside [0, 0.5]");
        Vec y = y_clean;
        const auto flips = static_cast<std::size_t>(
            std::llround(p * static_cast<double>(n)));
        Rng local = stream.fork(li);
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = 0; i < flips; ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(local.next_below(n - i));
            std::swap(idx[i], idx[j]);
            y[idx[i]] = -y[idx[i]];
        }
        ratios.push_back(top_eigenspace_ratio(spectrum, y, m, squared));
    }
    return ratios;
}

}  // namespace aird
