#include "aird/selfdistill.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "aird/common.hpp"
#include "aird/eig.hpp"
#include "aird/ntk.hpp"

namespace aird {

// ---------------------------------------------------------------------------
// Label function
// ---------------------------------------------------------------------------

LabelFunction LabelFunction::clipped(double rho) {
    if (!(rho >= 0.0) || rho >= 0.5)
        throw AssumptionViolation("clipped label function requires rho in [0, 1/2)");
    return {Kind::Clipped, rho};
}
LabelFunction LabelFunction::sign() { return {Kind::Sign, 0.0}; }
LabelFunction LabelFunction::identity() { return {Kind::Identity, 0.0}; }

double LabelFunction::operator()(double x) const {
    switch (kind) {
        case Kind::Clipped: {
            const double b = (1.0 - 2.0 * rho) / 4.0;
            if (std::abs(x) <= b) return x * (4.0 / (1.0 - 2.0 * rho));
            return sign_pm1(x);
        }
        case Kind::Sign: return sign_pm1(x);
        case Kind::Identity: return x;
    }
    return x;
}

double apply_label_function(const LabelFunction& h, double x) { return h(x); }

double default_eta(double gamma, std::size_t n) {
    if (!(gamma >= 1.0)) throw AssumptionViolation("default_eta: gamma must be >= 1");
    if (n < 1) throw AssumptionViolation("default_eta: n must be >= 1");
    return 1.0 / (2.0 * gamma * gamma * static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Alpha schedules
// ---------------------------------------------------------------------------

AlphaSchedule AlphaSchedule::constant(double alpha) {
    if (!(alpha >= 0.0) || alpha > 1.0)
        throw AssumptionViolation("constant schedule: alpha must lie in [0,1]");
    AlphaSchedule s;
    s.kind_ = Kind::Constant;
    s.constant_ = alpha;
    s.prev_ = alpha;
    return s;
}

AlphaSchedule AlphaSchedule::linear(double decrement, double start) {
    if (!(decrement >= 0.0)) throw AssumptionViolation("linear schedule: decrement < 0");
    if (!(start >= 0.0) || start > 1.0)
        throw AssumptionViolation("linear schedule: start must lie in [0,1]");
    AlphaSchedule s;
    s.kind_ = Kind::Linear;
    s.start_ = start;
    s.decrement_ = decrement;
    s.prev_ = start;
    return s;
}

AlphaSchedule AlphaSchedule::theoretical(long t1, double dec_stage1, double dec_stage2,
                                         double t2_threshold) {
    AlphaSchedule s;
    s.kind_ = Kind::Theoretical;
    s.t1_ = t1;
    s.dec1_ = dec_stage1;
    s.dec2_ = dec_stage2;
    s.t2_threshold_ = t2_threshold;
    s.prev_ = 1.0;
    return s;
}

AlphaSchedule AlphaSchedule::adaptive(double lambda, bool enforce_monotone) {
    if (!(lambda >= 0.0)) throw AssumptionViolation("adaptive schedule: lambda < 0");
    AlphaSchedule s;
    s.kind_ = Kind::Adaptive;
    s.lambda_ = lambda;
    s.enforce_monotone_ = enforce_monotone;
    s.prev_ = 1.0;
    return s;
}

double AlphaSchedule::next(long t, std::optional<double> accuracy) {
    switch (kind_) {
        case Kind::Constant:
            prev_ = constant_;
            return prev_;
        case Kind::Linear: {
            const double a = start_ - decrement_ * static_cast<double>(t);
            prev_ = std::clamp(a, 0.0, 1.0);
            return prev_;
        }
        case Kind::Theoretical: {
            if (t <= t1_) {
                prev_ = 1.0;
                return prev_;
            }
            const double dec = prev_ < t2_threshold_ ? dec2_ : dec1_;
            prev_ = std::max(0.0, prev_ - dec);
            return prev_;
        }
        case Kind::Adaptive: {
            if (!accuracy)
                throw AssumptionViolation("adaptive schedule requires a batch accuracy");
            if (!(*accuracy >= 0.0) || *accuracy > 1.0)
                throw AssumptionViolation("adaptive schedule: accuracy outside [0,1]");
            double a = std::clamp(1.0 - lambda_ * (*accuracy), 0.0, 1.0);
            if (enforce_monotone_) a = std::min(a, prev_);
            prev_ = a;
            return a;
        }
    }
    return prev_;
}

void AlphaSchedule::reset() {
    switch (kind_) {
        case Kind::Constant: prev_ = constant_; break;
        case Kind::Linear: prev_ = start_; break;
        default: prev_ = 1.0; break;
    }
}

TheoreticalSchedule make_theoretical_schedule(const NoisyClusterableDataset& ds,
                                              double gamma, double lambda_C,
                                              double Lambda, double rho, double delta,
                                              double safety) {
    if (!(rho >= 0.0) || rho >= 0.5)
        throw AssumptionViolation("make_theoretical_schedule: rho must lie in [0, 1/2)");
    if (!(lambda_C > 0.0))
        throw DegenerateGeometry("make_theoretical_schedule: lambda(C) must be > 0");
    if (!(safety >= 1.0))
        throw AssumptionViolation("make_theoretical_schedule: safety must be >= 1");
    if (!(delta > 0.0) || delta >= 1.0)
        throw AssumptionViolation("make_theoretical_schedule: delta must lie in (0,1)");

    const auto st = dataset_stats(ds);
    const double c_low = st.c_low;
    const double n = static_cast<double>(ds.n);
    const double K = static_cast<double>(ds.K);
    const double g2 = gamma * gamma;

    TheoreticalSchedule out;
    out.stage1_bound = c_low * lambda_C * (1.0 - 2.0 * rho) / (512.0 * g2 * K);
    out.stage2_bound = c_low * std::min(Lambda, lambda_C) * (1.0 - 2.0 * rho) / (512.0 * g2 * K);
    out.per_step_dec_stage1 = out.stage1_bound / (2.0 * std::sqrt(n) * safety);
    out.per_step_dec_stage2 = out.stage2_bound / (2.0 * std::sqrt(n) * safety);
    out.t2_threshold = 1.0 / (24.0 * std::sqrt(n));

    out.alpha_T1_lower_bound =
        std::max(1.0 - c_low * lambda_C * (1.0 - 2.0 * rho) / (128.0 * g2 * K),
                 (7.0 / 4.0 - 1.5 * rho) / (2.0 - 2.0 * rho));
    if (out.alpha_T1_lower_bound >= 1.0)
        throw InfeasibleSchedule(
            "theoretical schedule infeasible: alpha_{T1} lower bound = " +
            std::to_string(out.alpha_T1_lower_bound) +
            " >= 1 (c_low=" + std::to_string(c_low) + ", lambda_C=" +
            std::to_string(lambda_C) + ", rho=" + std::to_string(rho) + ")");

    const double t1_real = (80.0 * g2 * K / (c_low * lambda_C)) *
                           std::log(gamma * std::sqrt(32.0 * n * std::log(8.0 / delta)) /
                                    (1.0 - 2.0 * rho));
    out.T1 = static_cast<long>(std::ceil(t1_real));
    if (out.T1 < 1) out.T1 = 1;

    out.schedule = AlphaSchedule::theoretical(out.T1, out.per_step_dec_stage1,
                                              out.per_step_dec_stage2, out.t2_threshold);
    return out;
}

// ---------------------------------------------------------------------------
// Metrics CSV
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double x) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, p);
}

constexpr const char* kCsvHeader =
    "step,alpha,l2_res_obs,l2_res_true,zero_one_err_true,margin_true,top_m_ratio,info_gain";

}  // namespace

std::string MetricsLog::to_csv() const {
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += std::to_string(r.step);
        out += ',';
        out += fmt(r.alpha);
        out += ',';
        out += fmt(r.l2_res_obs);
        out += ',';
        out += fmt(r.l2_res_true);
        out += ',';
        out += fmt(r.zero_one_err_true);
        out += ',';
        out += fmt(r.margin_true);
        out += ',';
        if (r.top_m_ratio) out += fmt(*r.top_m_ratio);
        out += ',';
        if (r.info_gain) out += fmt(*r.info_gain);
        out += '\n';
    }
    return out;
}

void MetricsLog::write_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw LoadError("write_csv: cannot open '" + path + "'");
    f << to_csv();
    if (!f) throw LoadError("write_csv: write failed for '" + path + "'");
}

MetricsLog MetricsLog::read_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw LoadError("read_csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(f, line)) throw LoadError("read_csv: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw LoadError("read_csv: unexpected header");

    MetricsLog log;
    std::size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        while (cells.size() < 8) cells.emplace_back();
        if (cells.size() != 8)
            throw LoadError("read_csv: line " + std::to_string(line_no) +
                            " has wrong column count");
        MetricsRow r;
        r.step = std::stol(cells[0]);
        r.alpha = std::stod(cells[1]);
        r.l2_res_obs = std::stod(cells[2]);
        r.l2_res_true = std::stod(cells[3]);
        r.zero_one_err_true = std::stod(cells[4]);
        r.margin_true = std::stod(cells[5]);
        if (!cells[6].empty()) r.top_m_ratio = std::stod(cells[6]);
        if (!cells[7].empty()) r.info_gain = std::stod(cells[7]);
        log.rows.push_back(r);
    }
    return log;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

double zero_one_error(const Vec& f, const Vec& labels) {
    if (f.size() != labels.size()) throw DimensionError("zero_one_error: size mismatch");
    if (f.empty()) return 0.0;
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (sign_pm1(f[i]) != labels[i]) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(f.size());
}

namespace {

double margin(const Vec& f, const Vec& y_true) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < f.size(); ++i) m = std::min(m, f[i] * y_true[i]);
    return m;
}

double sign_match_fraction(const Vec& f, const Vec& ref) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (sign_pm1(f[i]) == sign_pm1(ref[i])) ++hit;
    return f.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(f.size());
}

struct NtkMetricsState {
    bool ready = false;
    Spectrum spectrum;  // of the Gram at initialization (static-kernel proxy)
    double raw_ratio = 0.0;
};

TrainResult train_impl(const TwoLayerNet& net0, const NoisyClusterableDataset& ds,
                       const DistillConfig& config, Rng& rng, bool plain) {
    if (!(config.eta > 0.0)) throw AssumptionViolation("train: eta must be > 0");
    if (config.steps < 0) throw AssumptionViolation("train: steps must be >= 0");
    if (net0.d() != ds.d) throw DimensionError("train: network and dataset dimension disagree");
    if (!net0.act.smooth())
        std::fprintf(stderr,
                     "warning: relu activation is non-smooth; training runs in "
                     "exploratory mode outside the analyzed setting\n");

    TrainResult res{net0, {}, {}, 0};
    TwoLayerNet& net = res.net;
    AlphaSchedule schedule =
        plain ? AlphaSchedule::constant(1.0) : config.schedule;
    schedule.reset();

    const std::size_t n = ds.n;

    // Minibatch order: one fixed shuffle, batches cycled in order.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::size_t bsize = n;
    if (config.batch == BatchMode::Minibatch) {
        if (config.minibatch_size == 0 || config.minibatch_size > n)
            throw AssumptionViolation("train: invalid minibatch size");
        bsize = config.minibatch_size;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
            std::swap(order[i], order[j]);
        }
    }
    const std::size_t nbatches = (n + bsize - 1) / bsize;

    EvalCache cache;
    EvalCache batch_cache;
    Vec reference = ds.y_obs;  // previous-step targets; seeds the adaptive accuracy
    NtkMetricsState ntk;

    auto log_row = [&](long t, double alpha, const Vec& f,
                       const Vec* targets_for_ntk) {
        MetricsRow row;
        row.step = t;
        row.alpha = alpha;
        row.l2_res_obs = norm2_diff(f, ds.y_obs);
        row.l2_res_true = norm2_diff(f, ds.y_true);
        row.zero_one_err_true = zero_one_error(f, ds.y_true);
        row.margin_true = margin(f, ds.y_true);
        if (targets_for_ntk != nullptr) {
            if (!ntk.ready) {
                ntk.spectrum = sym_eig(gram(net0, ds.X));
                ntk.raw_ratio =
                    top_eigenspace_ratio(ntk.spectrum, ds.y_obs, config.ntk_top_m);
                ntk.ready = true;
            }
            const double ratio =
                top_eigenspace_ratio(ntk.spectrum, *targets_for_ntk, config.ntk_top_m);
            row.top_m_ratio = ratio;
            row.info_gain = ratio - ntk.raw_ratio;
        }
        res.log.rows.push_back(row);
    };

    Vec targets(n, 0.0);
    Vec f_full;
    for (long t = 0; t < config.steps; ++t) {
        forward_with_cache(net, ds.X, cache);
        f_full = cache.f;
        if (!all_finite(f_full))
            throw Diverged(t, "training diverged at step " + std::to_string(t) +
                                  ": non-finite outputs");

        double alpha;
        if (schedule.kind() == AlphaSchedule::Kind::Adaptive) {
            const Vec& acc_ref =
                config.accuracy_ref == AccuracyRef::Observed ? ds.y_obs : reference;
            alpha = schedule.next(t, sign_match_fraction(f_full, acc_ref));
        } else {
            alpha = schedule.next(t);
        }

        // Targets are fixed for the step (detached from the update).
        for (std::size_t i = 0; i < n; ++i)
            targets[i] = alpha * ds.y_obs[i] + (1.0 - alpha) * config.h(f_full[i]);

        const bool log_now = config.log_every > 0 && t % config.log_every == 0;
        const bool ntk_now = config.ntk_metrics_every > 0 && t % config.ntk_metrics_every == 0;
        if (log_now || ntk_now) log_row(t, alpha, f_full, ntk_now ? &targets : nullptr);

        if (config.record_trajectory) {
            res.trajectory.weights.push_back(net.W);
            res.trajectory.targets.push_back(targets);
            res.trajectory.outputs.push_back(f_full);
        }

        double loss = 0.0;
        if (config.batch == BatchMode::Full) {
            Vec r(n);
            for (std::size_t i = 0; i < n; ++i) {
                r[i] = f_full[i] - targets[i];
                loss += r[i] * r[i];
            }
            loss *= 0.5;
            if (!std::isfinite(loss) || loss > config.divergence_loss_cap)
                throw Diverged(t, "training diverged at step " + std::to_string(t) +
                                      ": loss " + std::to_string(loss));
            const Mat grad = gradient_from_residual(net, ds.X, r, cache);
            for (std::size_t idx = 0; idx < net.W.data.size(); ++idx)
                net.W.data[idx] -= config.eta * grad.data[idx];
        } else {
            const std::size_t b = static_cast<std::size_t>(t) % nbatches;
            const std::size_t lo = b * bsize;
            const std::size_t hi = std::min(n, lo + bsize);
            Mat Xb(hi - lo, ds.d);
            Vec yb(hi - lo);
            for (std::size_t i = lo; i < hi; ++i) {
                std::copy(ds.X.row(order[i]).begin(), ds.X.row(order[i]).end(),
                          Xb.row(i - lo).begin());
                yb[i - lo] = targets[order[i]];
            }
            forward_with_cache(net, Xb, batch_cache);
            Vec r(hi - lo);
            for (std::size_t i = 0; i < r.size(); ++i) {
                r[i] = batch_cache.f[i] - yb[i];
                loss += r[i] * r[i];
            }
            loss *= 0.5;
            if (!std::isfinite(loss) || loss > config.divergence_loss_cap)
                throw Diverged(t, "training diverged at step " + std::to_string(t) +
                                      ": loss " + std::to_string(loss));
            const Mat grad = gradient_from_residual(net, Xb, r, batch_cache);
            for (std::size_t idx = 0; idx < net.W.data.size(); ++idx)
                net.W.data[idx] -= config.eta * grad.data[idx];
        }

        reference = targets;
        res.steps_run = t + 1;
    }

    // Final state row (and final weights for the recursion oracle).
    if (config.steps > 0) {
        forward_with_cache(net, ds.X, cache);
        f_full = cache.f;
        if (!all_finite(f_full))
            throw Diverged(config.steps, "training diverged at final evaluation");
        const bool ntk_on = config.ntk_metrics_every > 0;
        if (ntk_on)
            for (std::size_t i = 0; i < n; ++i)
                targets[i] = schedule.current() * ds.y_obs[i] +
                             (1.0 - schedule.current()) * config.h(f_full[i]);
        log_row(config.steps, schedule.current(), f_full, ntk_on ? &targets : nullptr);
        if (config.record_trajectory) res.trajectory.weights.push_back(net.W);
    }
    return res;
}

}  // namespace

TrainResult self_distill_train(const TwoLayerNet& net, const NoisyClusterableDataset& ds,
                               const DistillConfig& config, Rng& rng) {
    return train_impl(net, ds, config, rng, /*plain=*/false);
}

TrainResult plain_gd_train(const TwoLayerNet& net, const NoisyClusterableDataset& ds,
                           const DistillConfig& config, Rng& rng) {
    return train_impl(net, ds, config, rng, /*plain=*/true);
}

SweepTable distill_sweep(const SweepSpec& teacher, const SweepSpec& student,
                         const std::vector<long>& stop_epochs,
                         const NoisyClusterableDataset& ds, Rng& rng) {
    for (long e : stop_epochs)
        if (e < 0) throw AssumptionViolation("distill_sweep: negative stop epoch");

    const long max_epoch =
        stop_epochs.empty() ? 0 : *std::max_element(stop_epochs.begin(), stop_epochs.end());

    // One teacher trajectory; capture outputs at every requested stop epoch.
    Rng teacher_rng = rng.fork(1);
    TwoLayerNet tnet = init_network(teacher.k, ds.d, teacher.act, teacher_rng);
    std::vector<Vec> teacher_outputs(stop_epochs.size());

    EvalCache cache;
    auto capture = [&](long epoch) {
        for (std::size_t s = 0; s < stop_epochs.size(); ++s)
            if (stop_epochs[s] == epoch) {
                forward_with_cache(tnet, ds.X, cache);
                teacher_outputs[s] = cache.f;
            }
    };
    capture(0);
    for (long t = 0; t < max_epoch; ++t) {
        forward_with_cache(tnet, ds.X, cache);
        Vec r(ds.n);
        double loss = 0.0;
        for (std::size_t i = 0; i < ds.n; ++i) {
            r[i] = cache.f[i] - ds.y_obs[i];
            loss += r[i] * r[i];
        }
        if (!std::isfinite(loss)) throw Diverged(t, "distill_sweep: teacher diverged");
        const Mat grad = gradient_from_residual(tnet, ds.X, r, cache);
        for (std::size_t idx = 0; idx < tnet.W.data.size(); ++idx)
            tnet.W.data[idx] -= teacher.eta * grad.data[idx];
        capture(t + 1);
    }

    SweepTable table;
    for (std::size_t s = 0; s < stop_epochs.size(); ++s) {
        Vec soft(ds.n);
        for (std::size_t i = 0; i < ds.n; ++i)
            soft[i] = teacher.soft_label(teacher_outputs[s][i]);

        Rng srng = rng.fork(1000 + s);
        TwoLayerNet snet = init_network(student.k, ds.d, student.act, srng);
        EvalCache scache;
        for (long t = 0; t < student.steps; ++t) {
            forward_with_cache(snet, ds.X, scache);
            Vec r(ds.n);
            double loss = 0.0;
            for (std::size_t i = 0; i < ds.n; ++i) {
                r[i] = scache.f[i] - soft[i];
                loss += r[i] * r[i];
            }
            if (!std::isfinite(loss)) throw Diverged(t, "distill_sweep: student diverged");
            const Mat grad = gradient_from_residual(snet, ds.X, r, scache);
            for (std::size_t idx = 0; idx < snet.W.data.size(); ++idx)
                snet.W.data[idx] -= student.eta * grad.data[idx];
        }
        forward_with_cache(snet, ds.X, scache);

        SweepRow row;
        row.stop_epoch = stop_epochs[s];
        row.student_err_true = zero_one_error(scache.f, ds.y_true);
        row.teacher_err_true = zero_one_error(teacher_outputs[s], ds.y_true);
        table.rows.push_back(row);
    }
    return table;
}

}  // namespace aird
