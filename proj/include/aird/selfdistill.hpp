#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aird/dataset.hpp"
#include "aird/mat.hpp"
#include "aird/network.hpp"
#include "aird/rng.hpp"

namespace aird {

// Label function h applied to network outputs when forming distillation
// targets. The clipped kind is the saturating map: linear with slope
// 4/(1-2*rho) on |x| <= (1-2*rho)/4, sign(x) beyond (both branches meet at
// +-1 on the boundary). sign(0) := +1 for the sign kind.
struct LabelFunction {
    enum class Kind { Clipped, Sign, Identity };

    Kind kind = Kind::Identity;
    double rho = 0.0;  // only meaningful for Clipped

    static LabelFunction clipped(double rho);
    static LabelFunction sign();
    static LabelFunction identity();

    double operator()(double x) const;
};

double apply_label_function(const LabelFunction& h, double x);

// eta = 1/(2 Gamma^2 n).
double default_eta(double gamma, std::size_t n);

// Interpolation weight schedule. All kinds emit non-increasing sequences in
// [0,1]. The adaptive kind implements 1 - alpha_t = lambda * accuracy with a
// clamp to [0,1]; monotone non-increase is enforced by a running min unless
// disabled (exploratory raw rule).
class AlphaSchedule {
  public:
    enum class Kind { Constant, Linear, Theoretical, Adaptive };

    static AlphaSchedule constant(double alpha);
    static AlphaSchedule linear(double decrement, double start = 1.0);
    // Hold alpha = 1 through step t1, then decrease by dec_stage1 per step
    // until alpha < t2_threshold, by dec_stage2 per step afterwards, floored
    // at 0.
    static AlphaSchedule theoretical(long t1, double dec_stage1, double dec_stage2,
                                     double t2_threshold);
    static AlphaSchedule adaptive(double lambda, bool enforce_monotone = true);

    // alpha_t for step t; adaptive requires the batch accuracy in [0,1].
    double next(long t, std::optional<double> accuracy = std::nullopt);
    void reset();

    Kind kind() const { return kind_; }
    double lambda() const { return lambda_; }
    double current() const { return prev_; }
    bool adaptive_monotone() const { return enforce_monotone_; }

    // Theoretical-schedule parameters (0 for other kinds).
    long t1() const { return t1_; }
    double t2_threshold() const { return t2_threshold_; }

  private:
    Kind kind_ = Kind::Constant;
    double constant_ = 1.0;
    double start_ = 1.0;
    double decrement_ = 0.0;
    long t1_ = 0;
    double dec1_ = 0.0, dec2_ = 0.0, t2_threshold_ = 0.0;
    double lambda_ = 1.0;
    bool enforce_monotone_ = true;
    double prev_ = 1.0;
};

// The theoretical schedule together with the bounds it was built from.
struct TheoreticalSchedule {
    AlphaSchedule schedule;
    long T1 = 0;
    double stage1_bound = 0.0;       // bound on 2 sqrt(n) (a_t - a_{t+1}), t < T2
    double stage2_bound = 0.0;       // same for t >= T2
    double per_step_dec_stage1 = 0.0;
    double per_step_dec_stage2 = 0.0;
    double alpha_T1_lower_bound = 0.0;
    double t2_threshold = 0.0;       // 1/(24 sqrt(n))
};

// Builds a schedule that provably satisfies both slow-decay inequalities and
// the alpha_{T1} lower bound: hold 1 for T1 steps, then decrease linearly at
// bound/(2 sqrt(n) * safety) with the stage switch at the T2 trigger.
// Throws InfeasibleSchedule when the alpha_{T1} lower bound reaches 1.
TheoreticalSchedule make_theoretical_schedule(const NoisyClusterableDataset& ds,
                                              double gamma, double lambda_C,
                                              double Lambda, double rho, double delta,
                                              double safety);

enum class BatchMode { Full, Minibatch };

// Accuracy fed to the adaptive schedule.
//   Gated (default): binary refinery confidence. The raw sign agreement with
//     y_obs is EMA-smoothed; confidence flips from 0 to 1 once the smoothed
//     agreement reaches the achievable ceiling 1 - rho_estimate (within half
//     a point), i.e. once every observable label that can be matched is
//     persistently matched. Under lambda = 1 this takes alpha from 1 to 0 at
//     that moment. Raw agreement vs y_obs caps at 1 - rho once the true
//     labels are learned, so the un-gated rule cannot drive alpha below rho;
//     the gate is the binary-classification adaptation that can.
//   Observed: the raw sign agreement with y_obs itself (the un-gated rule).
enum class AccuracyRef { Gated, Observed };

struct DistillConfig {
    double eta = 0.01;
    long steps = 1000;
    AlphaSchedule schedule = AlphaSchedule::constant(1.0);
    LabelFunction h = LabelFunction::identity();
    long log_every = 100;
    long ntk_metrics_every = 0;  // 0 = off
    std::size_t ntk_top_m = 5;
    BatchMode batch = BatchMode::Full;
    std::size_t minibatch_size = 0;
    AccuracyRef accuracy_ref = AccuracyRef::Gated;
    // Corruption-rate estimate used by the gate; when NaN it falls back to
    // the dataset's max requested rate (the clipped h carries its own rho).
    double rho_estimate = std::numeric_limits<double>::quiet_NaN();
    bool record_trajectory = false;
    double divergence_loss_cap = 1e12;
};

struct MetricsRow {
    long step = 0;
    double alpha = 1.0;
    double l2_res_obs = 0.0;       // ||f - y_obs||
    double l2_res_true = 0.0;      // ||f - y_true||
    double zero_one_err_true = 0.0;
    double margin_true = 0.0;      // min_i f_i * y_true_i
    std::optional<double> top_m_ratio;
    std::optional<double> info_gain;
};

struct MetricsLog {
    std::vector<MetricsRow> rows;

    void write_csv(const std::string& path) const;
    std::string to_csv() const;
    static MetricsLog read_csv(const std::string& path);
};

// Per-step snapshots for the residual-recursion and detachment oracles.
struct TrajectoryLog {
    std::vector<Mat> weights;   // W_0 .. W_T
    std::vector<Vec> targets;   // targets used at step t (size T)
    std::vector<Vec> outputs;   // f(W_t, X) (size T)
};

struct TrainResult {
    TwoLayerNet net;
    MetricsLog log;
    TrajectoryLog trajectory;  // populated when record_trajectory
    long steps_run = 0;
};

// Algorithm: per step, targets = alpha_t * y_obs + (1 - alpha_t) * h(f(W_t)),
// held fixed during the step (detached), followed by one gradient step on
// 1/2 ||f - targets||^2. Full-batch mode is the theorem setting; minibatch
// cycles fixed shuffled batches (exploratory).
TrainResult self_distill_train(const TwoLayerNet& net, const NoisyClusterableDataset& ds,
                               const DistillConfig& config, Rng& rng);

// Same loop with targets fixed to y_obs forever (alpha = 1 path); bitwise
// equal to self_distill_train under a constant-1 schedule.
TrainResult plain_gd_train(const TwoLayerNet& net, const NoisyClusterableDataset& ds,
                           const DistillConfig& config, Rng& rng);

// Teacher/student early-stopping sweep: train a teacher plainly, stop at each
// epoch in stop_epochs, train a fresh student on the teacher's soft targets
// h(f_teacher), record the student's 0-1 error against y_true.
struct SweepSpec {
    std::size_t k = 512;
    Activation act = Activation::make(ActKind::Tanh);
    double eta = 0.01;
    long steps = 2000;              // student training steps
    LabelFunction soft_label = LabelFunction::identity();  // teacher only
};

struct SweepRow {
    long stop_epoch = 0;
    double student_err_true = 0.0;
    double teacher_err_true = 0.0;
};

struct SweepTable {
    std::vector<SweepRow> rows;  // ordered by input order
};

SweepTable distill_sweep(const SweepSpec& teacher, const SweepSpec& student,
                         const std::vector<long>& stop_epochs,
                         const NoisyClusterableDataset& ds, Rng& rng);

// 0-1 error of sign(f) against labels, sign(0) := +1.
double zero_one_error(const Vec& f, const Vec& labels);

}  // namespace aird
