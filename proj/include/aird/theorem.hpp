#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aird/dataset.hpp"
#include "aird/mat.hpp"
#include "aird/network.hpp"
#include "aird/rng.hpp"
#include "aird/selfdistill.hpp"

namespace aird {

struct ScheduleViolation {
    enum class Kind { Stage1Decrement, Stage2Decrement, NonMonotone, AlphaT1BelowBound };
    long t = 0;
    Kind kind = Kind::Stage1Decrement;
    double amount = 0.0;  // how far past the bound
};

struct HypothesisFlag {
    enum class Status { Pass, Fail, Diagnostic };
    std::string name;
    Status status = Status::Diagnostic;
    double value = 0.0;
    std::string note;
};

// Constants of the convergence analysis for a concrete dataset / network
// shape, plus diagnostic ratios for the conditions whose constants the
// analysis leaves unspecified (reported with constant 1, order-of-magnitude
// only, never hard pass/fail).
struct TheoremReport {
    double gamma = 1.0;
    double lambda_C = 0.0;
    double lambda_X = 0.0;
    double Lambda = 0.0;  // min(lambda_C, lambda_X)
    double rho = 0.0;     // max requested corruption rate
    double c_low = 0.0;
    double c_up = 0.0;
    double delta = 0.05;
    std::size_t n = 0, K = 0, k = 0, d = 0;
    long cov_samples = 0;

    double alpha_lb = 0.0;         // sqrt(c_low n lambda(C) / 8K)
    double alpha_lb_Lambda = 0.0;  // sqrt(c_low n Lambda / 8K)
    double beta_ub = 0.0;          // Gamma sqrt(n)
    double lipschitz_L = 0.0;      // Gamma sqrt(n) / sqrt(k)

    long T1 = 0;
    std::optional<long> T2;  // empty = not reached on the supplied schedule
    double t2_threshold = 0.0;

    double decrement_bound_stage1 = 0.0;
    double decrement_bound_stage2 = 0.0;
    double per_step_decrement_stage1 = 0.0;
    double per_step_decrement_stage2 = 0.0;
    double alpha_T1_lower_bound = 0.0;

    double eta = 0.0;  // 1/(2 Gamma^2 n)

    // Diagnostic-only ratios (unspecified big-O constants taken as 1):
    // epsilon * sqrt(n d) * T2 * log(1/delta) / (1-2 rho)^2 and k over each
    // of the four width lower-bound terms.
    double epsilon_diagnostic = 0.0;
    std::array<double, 4> k_diagnostics{};

    std::vector<ScheduleViolation> schedule_violations;
    std::vector<HypothesisFlag> hypothesis_flags;

    // Populated from an actual run when available.
    std::optional<double> theta_empirical;  // max residual norm over the log
    std::optional<double> m_empirical;      // ||W_final||_F / sqrt(k) + 1
};

// Computes lambda(C), lambda(X) by Monte Carlo on the centers and the data,
// the T1 ceiling formula, decrement bounds, the alpha_{T1} lower bound, and
// the diagnostic ratios. When a schedule prefix is supplied, T2 is the first
// t with alpha_t < 1/(24 sqrt(n)) and the schedule is checked.
// Throws DegenerateGeometry when lambda(C) is at numerical zero.
TheoremReport compute_constants(const NoisyClusterableDataset& ds, std::size_t k,
                                std::size_t d, double gamma, double delta,
                                std::size_t cov_samples, Rng& rng,
                                std::span<const double> schedule_prefix = {});

struct ScheduleCheck {
    std::vector<ScheduleViolation> violations;
    std::optional<long> T2;
    bool decreases = false;  // schedule shows a net decrease over the prefix
};

// Flags every step whose decrement exceeds the stage bound (stage decided by
// the T2 trigger computed from the prefix itself), every non-monotone step,
// and alpha_{T1} below its lower bound when the prefix covers T1.
ScheduleCheck check_schedule(std::span<const double> alphas, const TheoremReport& report);

// Orthogonal projection onto the span of cluster indicator vectors: replaces
// each entry by its cluster mean. Cluster ids must cover [0, K) without
// empty clusters.
Vec support_subspace_projection(std::span<const int> cluster_id, const Vec& v);

// min over unit u in the support subspace of ||u^T J||_2, computed by
// restricting J to the normalized-indicator basis and taking the smallest
// singular value of the restricted K x (k d) matrix via its K x K Gram.
double sigma_min_on_subspace(const Mat& J, std::span<const int> cluster_id);

// Composite-Simpson quadrature of J(W2 + a (W1 - W2), X) over a in [0,1].
// intervals must be even and >= 2.
Mat average_jacobian(const TwoLayerNet& net1, const TwoLayerNet& net2, const Mat& X,
                     std::size_t intervals);

// Max over consecutive checkpoints of
//   || r_{t+1} - [(I - eta G_t) r_t + y_t - y_{t+1}] ||_2,
// G_t = avg_jacobian(W_{t+1}, W_t) J(W_t)^T. Exact up to quadrature error.
double verify_residual_recursion(const TrajectoryLog& traj, const Activation& act,
                                 const Mat& X, double eta, std::size_t intervals = 16);

struct PerturbationCheck {
    double max_ratio_lipschitz = 0.0;      // ||J(W)-J(W~)|| vs (G sqrt(n)/sqrt(k)) ||W-W~||_F
    double max_ratio_spectral = 0.0;       // ||J(W)|| vs Gamma sqrt(n)
    double max_ratio_center_shift = 0.0;   // ||J(W,X)-J(W~,X~)|| vs Lemma-4 bound
    bool pass = false;
};

// Samples `trials` random parameter pairs and checks the perturbation
// inequalities one-sided (observed LHS <= stated RHS). lhs_scale inflates the
// observed side; values > 1 exist to exercise the detector.
PerturbationCheck verify_perturbation_bounds(const NoisyClusterableDataset& ds,
                                             const Activation& act, std::size_t k,
                                             std::size_t trials, Rng& rng,
                                             double lhs_scale = 1.0);

// Pretty JSON for the report (CLI renders the table separately).
std::string theorem_report_to_json(const TheoremReport& report);

}  // namespace aird
