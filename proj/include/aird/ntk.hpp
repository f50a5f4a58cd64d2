#pragma once

#include <cstddef>
#include <vector>

#include "aird/eig.hpp"
#include "aird/mat.hpp"
#include "aird/network.hpp"
#include "aird/rng.hpp"

namespace aird {

// Monte-Carlo estimate of the covariance
//   Sigma(D) = (D D^T) o E_{g ~ N(0, I_d)}[phi'(D g) phi'(D g)^T].
// Deterministic given (rng seed, samples): draw s is keyed by (seed, s) and
// partial sums combine in fixed chunk order, whatever the worker count.
// Exactly symmetric by construction.
Mat covariance_matrix(const Mat& D, const Activation& act, std::size_t samples, Rng& rng);

// Smallest eigenvalue of the estimated Sigma(D): lambda(D).
double lambda_min(const Mat& D, const Activation& act, std::size_t samples, Rng& rng);

// Lambda = min(lambda(C), lambda(X)).
double lambda_pair_min(const Mat& C, const Mat& X, const Activation& act,
                       std::size_t samples, Rng& rng);

// ||P_m label|| / ||label|| where P_m projects onto the span of the m leading
// eigenvectors. `squared` switches to the squared-norm variant of the ratio.
double top_eigenspace_ratio(const Spectrum& spectrum, const Vec& label, std::size_t m,
                            bool squared = false);
double top_eigenspace_ratio(const Mat& H, const Vec& label, std::size_t m,
                            bool squared = false);

// ratio(distill) - ratio(raw) on the same spectrum.
double information_gain(const Spectrum& spectrum, const Vec& distill_label,
                        const Vec& raw_label, std::size_t m, bool squared = false);
double information_gain(const Mat& H, const Vec& distill_label, const Vec& raw_label,
                        std::size_t m, bool squared = false);

// Closed-form residual trajectory of gradient descent linearized at H:
// result[t] = Q (I - eta L)^t Q^T r0 for t = 0..steps, computed in the
// eigenbasis (no simulation).
std::vector<Vec> linearized_trajectory(const Mat& H, const Vec& r0, double eta,
                                       std::size_t steps);

// Label-noise ratio sweep: for each level p, flip round(p * n) entries of
// y_clean (uniformly, keyed per level) and record the top-m eigenspace ratio
// of the corrupted vector. Levels may include 0.5; this is an analysis probe,
// not a training-set corruption.
std::vector<double> label_noise_ratio_sweep(const Spectrum& spectrum, const Vec& y_clean,
                                            const std::vector<double>& levels,
                                            std::size_t m, Rng& rng, bool squared = false);

}  // namespace aird
