#include "aird/theorem.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "aird/common.hpp"
#include "aird/eig.hpp"
#include "aird/ntk.hpp"

namespace aird {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Support subspace
// ---------------------------------------------------------------------------

namespace {

std::size_t infer_K(std::span<const int> cluster_id) {
    int mx = -1;
    for (int c : cluster_id) {
        if (c < 0) throw AssumptionViolation("cluster ids must be non-negative");
        mx = std::max(mx, c);
    }
    return static_cast<std::size_t>(mx + 1);
}

std::vector<std::size_t> cluster_counts(std::span<const int> cluster_id, std::size_t K) {
    std::vector<std::size_t> counts(K, 0);
    for (int c : cluster_id) counts[static_cast<std::size_t>(c)]++;
    for (std::size_t l = 0; l < K; ++l)
        if (counts[l] == 0)
            throw AssumptionViolation("empty cluster " + std::to_string(l) +
                                      " referenced in support subspace");
    return counts;
}

}  // namespace

Vec support_subspace_projection(std::span<const int> cluster_id, const Vec& v) {
    if (cluster_id.size() != v.size())
        throw DimensionError("support_subspace_projection: size mismatch");
    const std::size_t K = infer_K(cluster_id);
    const auto counts = cluster_counts(cluster_id, K);

    Vec sums(K, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i)
        sums[static_cast<std::size_t>(cluster_id[i])] += v[i];
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto l = static_cast<std::size_t>(cluster_id[i]);
        out[i] = sums[l] / static_cast<double>(counts[l]);
    }
    return out;
}

double sigma_min_on_subspace(const Mat& J, std::span<const int> cluster_id) {
    if (J.rows != cluster_id.size())
        throw DimensionError("sigma_min_on_subspace: J rows must match cluster ids");
    const std::size_t K = infer_K(cluster_id);
    const auto counts = cluster_counts(cluster_id, K);

    // M = U^T J with U the normalized indicator basis: row l of M is the sum
    // of J's rows in cluster l scaled by 1/sqrt(n_l).
    Mat M(K, J.cols, 0.0);
    for (std::size_t i = 0; i < J.rows; ++i) {
        const auto l = static_cast<std::size_t>(cluster_id[i]);
        auto src = J.row(i);
        auto dst = M.row(l);
        for (std::size_t c = 0; c < J.cols; ++c) dst[c] += src[c];
    }
    for (std::size_t l = 0; l < K; ++l) {
        const double inv = 1.0 / std::sqrt(static_cast<double>(counts[l]));
        for (double& x : M.row(l)) x *= inv;
    }

    const Mat g = matmul_nt(M, M);  // K x K
    const Spectrum s = sym_eig(g);
    return std::sqrt(std::max(0.0, s.eigenvalues.back()));
}

// ---------------------------------------------------------------------------
// Average Jacobian and the residual recursion
// ---------------------------------------------------------------------------

Mat average_jacobian(const TwoLayerNet& net1, const TwoLayerNet& net2, const Mat& X,
                     std::size_t intervals) {
    if (net1.k() != net2.k() || net1.d() != net2.d())
        throw DimensionError("average_jacobian: nets must share shape");
    if (net1.act.kind() != net2.act.kind())
        throw AssumptionViolation("average_jacobian: nets must share activation");
    if (intervals < 2 || intervals % 2 != 0)
        throw AssumptionViolation("average_jacobian: intervals must be even and >= 2");

    const double h = 1.0 / static_cast<double>(intervals);
    TwoLayerNet node = net2;
    Mat acc;
    for (std::size_t s = 0; s <= intervals; ++s) {
        const double a = static_cast<double>(s) * h;
        for (std::size_t i = 0; i < node.W.data.size(); ++i)
            node.W.data[i] = net2.W.data[i] + a * (net1.W.data[i] - net2.W.data[i]);
        const double w =
            (s == 0 || s == intervals) ? h / 3.0 : (s % 2 == 1 ? 4.0 * h / 3.0 : 2.0 * h / 3.0);
        Mat J = jacobian(node, X);
        if (acc.empty()) {
            acc = Mat(J.rows, J.cols, 0.0);
        }
        for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += w * J.data[i];
    }
    return acc;
}

double verify_residual_recursion(const TrajectoryLog& traj, const Activation& act,
                                 const Mat& X, double eta, std::size_t intervals) {
    const std::size_t T = traj.targets.size();
    if (traj.weights.size() < 2 || traj.weights.size() != T + 1)
        throw AssumptionViolation(
            "verify_residual_recursion: need weights for T+1 checkpoints and T target "
            "vectors");

    const std::size_t k = traj.weights.front().rows;
    TwoLayerNet net{traj.weights.front(), make_output_vector(k), act};

    double max_dev = 0.0;
    // Transition t needs the step-(t+1) targets, so the last recorded step
    // has no successor to check against.
    for (std::size_t t = 0; t + 1 < T; ++t) {
        const Vec& y_t = traj.targets[t];
        const Vec& y_next = traj.targets[t + 1];

        net.W = traj.weights[t];
        const Vec f_t = forward(net, X);
        TwoLayerNet net_next{traj.weights[t + 1], net.v, act};
        const Vec f_next = forward(net_next, X);

        Vec r_t(f_t.size()), r_next(f_t.size());
        for (std::size_t i = 0; i < f_t.size(); ++i) {
            r_t[i] = f_t[i] - y_t[i];
            r_next[i] = f_next[i] - y_next[i];
        }

        // G_t = avgJ(W_{t+1}, W_t) J(W_t)^T, applied to r_t.
        const Mat Jt = jacobian(net, X);
        const Mat Ja = average_jacobian(net_next, net, X, intervals);
        const Vec jt_r = matvec_t(Jt, r_t);   // (k d)
        const Vec g_r = matvec(Ja, jt_r);     // n

        double dev_sq = 0.0;
        for (std::size_t i = 0; i < f_t.size(); ++i) {
            const double want = r_t[i] - eta * g_r[i] + y_t[i] - y_next[i];
            const double dev = r_next[i] - want;
            dev_sq += dev * dev;
        }
        max_dev = std::max(max_dev, std::sqrt(dev_sq));
    }
    return max_dev;
}

// ---------------------------------------------------------------------------
// Perturbation bounds
// ---------------------------------------------------------------------------

namespace {

// Spectral norm of J(W1,X1) - J(W2,X2) through cross Grams (no J formed).
double diff_spectral_norm(const Activation& act, const Mat& W1, const Mat& X1,
                          const Mat& W2, const Mat& X2) {
    const Mat g11 = cross_gram(act, W1, X1, W1, X1);
    const Mat g22 = cross_gram(act, W2, X2, W2, X2);
    const Mat g12 = cross_gram(act, W1, X1, W2, X2);
    Mat D(g11.rows, g11.cols);
    for (std::size_t i = 0; i < D.rows; ++i)
        for (std::size_t j = 0; j < D.cols; ++j) {
            D(i, j) = g11(i, j) + g22(i, j) - g12(i, j) - g12(j, i);
        }
    // Symmetrize away rounding asymmetry before the eigensolve.
    for (std::size_t i = 0; i < D.rows; ++i)
        for (std::size_t j = i + 1; j < D.cols; ++j) {
            const double v = 0.5 * (D(i, j) + D(j, i));
            D(i, j) = v;
            D(j, i) = v;
        }
    const Spectrum s = sym_eig(D);
    return std::sqrt(std::max(0.0, s.eigenvalues.front()));
}

double spectral_norm_generic(const Mat& A) {
    const Mat g = matmul_nt(A, A);
    Mat sym = g;
    for (std::size_t i = 0; i < sym.rows; ++i)
        for (std::size_t j = i + 1; j < sym.cols; ++j) {
            const double v = 0.5 * (sym(i, j) + sym(j, i));
            sym(i, j) = v;
            sym(j, i) = v;
        }
    const Spectrum s = sym_eig(sym);
    return std::sqrt(std::max(0.0, s.eigenvalues.front()));
}

Mat expand_centers(const NoisyClusterableDataset& ds) {
    Mat Xc(ds.n, ds.d);
    for (std::size_t i = 0; i < ds.n; ++i) {
        const auto l = static_cast<std::size_t>(ds.cluster_id[i]);
        std::copy(ds.centers.row(l).begin(), ds.centers.row(l).end(), Xc.row(i).begin());
    }
    return Xc;
}

}  // namespace

PerturbationCheck verify_perturbation_bounds(const NoisyClusterableDataset& ds,
                                             const Activation& act, std::size_t k,
                                             std::size_t trials, Rng& rng,
                                             double lhs_scale) {
    const double gamma = act.gamma();
    const double n = static_cast<double>(ds.n);
    const double sqrt_n = std::sqrt(n);
    const double sqrt_k = std::sqrt(static_cast<double>(k));
    const Mat Xc = expand_centers(ds);
    const auto st = dataset_stats(ds);
    const double eps = st.max_within_cluster_radius;

    PerturbationCheck out;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng local = rng.fork(trial);
        TwoLayerNet a = init_network(k, ds.d, act, local);
        TwoLayerNet b = a;
        // Perturb at a random magnitude to probe both near and far pairs.
        const double scale = std::pow(10.0, -2.0 + 3.0 * local.next_unit());
        for (double& w : b.W.data) w += scale * local.next_gaussian();

        double diff_f = 0.0;
        for (std::size_t i = 0; i < a.W.data.size(); ++i) {
            const double d = a.W.data[i] - b.W.data[i];
            diff_f += d * d;
        }
        diff_f = std::sqrt(diff_f);

        // ||J(W,X) - J(W~,X)|| <= Gamma sqrt(n)/sqrt(k) ||W - W~||_F
        {
            const double lhs = lhs_scale * diff_spectral_norm(act, a.W, ds.X, b.W, ds.X);
            const double rhs = gamma * sqrt_n / sqrt_k * diff_f;
            if (rhs > 0.0)
                out.max_ratio_lipschitz = std::max(out.max_ratio_lipschitz, lhs / rhs);
        }
        // ||J(W,X)|| <= Gamma sqrt(n)
        {
            const double lhs = lhs_scale * jacobian_spectral_norm(a, ds.X);
            out.max_ratio_spectral = std::max(out.max_ratio_spectral, lhs / (gamma * sqrt_n));
        }
        // ||J(W,X) - J(W~,X~)|| <= Gamma sqrt(n)/sqrt(k) (||W-W~||_F + ||W~|| eps + sqrt(k) eps)
        {
            const double lhs = lhs_scale * diff_spectral_norm(act, a.W, ds.X, b.W, Xc);
            const double w_spec = spectral_norm_generic(b.W);
            const double rhs = gamma * sqrt_n / sqrt_k * (diff_f + w_spec * eps + sqrt_k * eps);
            if (rhs > 0.0)
                out.max_ratio_center_shift = std::max(out.max_ratio_center_shift, lhs / rhs);
        }
    }
    out.pass = out.max_ratio_lipschitz <= 1.0 && out.max_ratio_spectral <= 1.0 &&
               out.max_ratio_center_shift <= 1.0;
    return out;
}

// ---------------------------------------------------------------------------
// Constants and schedule checking
// ---------------------------------------------------------------------------

TheoremReport compute_constants(const NoisyClusterableDataset& ds, std::size_t k,
                                std::size_t d, double gamma, double delta,
                                std::size_t cov_samples, Rng& rng,
                                std::span<const double> schedule_prefix) {
    if (!(delta > 0.0) || delta >= 1.0)
        throw AssumptionViolation("compute_constants: delta must lie in (0,1)");
    if (d != ds.d) throw DimensionError("compute_constants: network d disagrees with dataset");
    if (!(gamma >= 1.0)) throw AssumptionViolation("compute_constants: gamma must be >= 1");

    TheoremReport rep;
    rep.gamma = gamma;
    rep.delta = delta;
    rep.n = ds.n;
    rep.K = ds.K;
    rep.k = k;
    rep.d = d;
    rep.cov_samples = static_cast<long>(cov_samples);
    rep.rho = ds.rho_max();

    const auto st = dataset_stats(ds);
    rep.c_low = st.c_low;
    rep.c_up = st.c_up;

    const Activation act = Activation::make(ActKind::Tanh);
    rep.lambda_C = lambda_min(ds.centers, act, cov_samples, rng);
    rep.lambda_X = lambda_min(ds.X, act, cov_samples, rng);
    rep.Lambda = std::min(rep.lambda_C, rep.lambda_X);

    if (rep.lambda_C <= 1e-9)
        throw DegenerateGeometry("compute_constants: lambda(C) = " +
                                 std::to_string(rep.lambda_C) +
                                 " is numerically zero; constants blow up");

    const double n = static_cast<double>(ds.n);
    const double K = static_cast<double>(ds.K);
    const double g2 = gamma * gamma;
    const double one_m2r = 1.0 - 2.0 * rep.rho;

    rep.alpha_lb = std::sqrt(rep.c_low * n * rep.lambda_C / (8.0 * K));
    rep.alpha_lb_Lambda = std::sqrt(rep.c_low * n * rep.Lambda / (8.0 * K));
    rep.beta_ub = gamma * std::sqrt(n);
    rep.lipschitz_L = gamma * std::sqrt(n) / std::sqrt(static_cast<double>(k));
    rep.eta = default_eta(gamma, ds.n);

    rep.T1 = static_cast<long>(
        std::ceil((80.0 * g2 * K / (rep.c_low * rep.lambda_C)) *
                  std::log(gamma * std::sqrt(32.0 * n * std::log(8.0 / delta)) / one_m2r)));
    if (rep.T1 < 1) rep.T1 = 1;

    rep.t2_threshold = 1.0 / (24.0 * std::sqrt(n));
    rep.decrement_bound_stage1 = rep.c_low * rep.lambda_C * one_m2r / (512.0 * g2 * K);
    rep.decrement_bound_stage2 = rep.c_low * rep.Lambda * one_m2r / (512.0 * g2 * K);
    rep.per_step_decrement_stage1 = rep.decrement_bound_stage1 / (2.0 * std::sqrt(n));
    rep.per_step_decrement_stage2 = rep.decrement_bound_stage2 / (2.0 * std::sqrt(n));
    rep.alpha_T1_lower_bound =
        std::max(1.0 - rep.c_low * rep.lambda_C * one_m2r / (128.0 * g2 * K),
                 (7.0 / 4.0 - 1.5 * rep.rho) / (2.0 - 2.0 * rep.rho));

    // T2 from the supplied schedule prefix.
    if (!schedule_prefix.empty()) {
        for (std::size_t t = 0; t < schedule_prefix.size(); ++t) {
            if (schedule_prefix[t] < rep.t2_threshold) {
                rep.T2 = static_cast<long>(t);
                break;
            }
        }
    }

    // Diagnostics with all unspecified constants set to 1. When T2 was not
    // reached, the prefix length (or 1) stands in as a lower bound.
    const double t2_for_diag = static_cast<double>(
        rep.T2 ? *rep.T2
               : static_cast<long>(std::max<std::size_t>(schedule_prefix.size(), 1)));
    const double log_inv_delta = std::log(1.0 / delta);
    rep.epsilon_diagnostic = ds.epsilon * std::sqrt(n * static_cast<double>(d)) *
                             t2_for_diag * log_inv_delta / (one_m2r * one_m2r);
    const double kd = static_cast<double>(k);
    rep.k_diagnostics[0] =
        kd / (std::pow(K, 3) / std::pow(rep.c_low * rep.Lambda, 3) * log_inv_delta);
    rep.k_diagnostics[1] = kd / (n * t2_for_diag * K / (rep.c_low * rep.Lambda));
    rep.k_diagnostics[2] =
        kd / (std::pow(n, 3) * std::pow(t2_for_diag, 4) * log_inv_delta / (one_m2r * one_m2r));
    rep.k_diagnostics[3] = kd / (n * std::log(n / delta) / rep.Lambda);

    if (!schedule_prefix.empty()) {
        const ScheduleCheck chk = check_schedule(schedule_prefix, rep);
        rep.schedule_violations = chk.violations;
        rep.T2 = chk.T2;

        rep.hypothesis_flags.push_back(
            {"schedule_slow_decay_and_alpha_T1",
             chk.violations.empty() ? HypothesisFlag::Status::Pass
                                    : HypothesisFlag::Status::Fail,
             static_cast<double>(chk.violations.size()),
             chk.violations.empty() ? "no violations on the supplied prefix"
                                    : "see schedule_violations"});
        rep.hypothesis_flags.push_back(
            {"schedule_decreases_to_zero",
             chk.decreases ? HypothesisFlag::Status::Pass : HypothesisFlag::Status::Fail,
             schedule_prefix.back(),
             chk.decreases ? "prefix shows a net decrease"
                           : "does not decrease to 0 on the supplied prefix"});
    }
    rep.hypothesis_flags.push_back({"rho_below_half",
                                    rep.rho < 0.5 ? HypothesisFlag::Status::Pass
                                                  : HypothesisFlag::Status::Fail,
                                    rep.rho, "requires rho < 1/2"});
    rep.hypothesis_flags.push_back({"lambda_C_positive",
                                    rep.lambda_C > 0 ? HypothesisFlag::Status::Pass
                                                     : HypothesisFlag::Status::Fail,
                                    rep.lambda_C, "requires lambda(C) > 0"});
    rep.hypothesis_flags.push_back(
        {"epsilon_condition", HypothesisFlag::Status::Diagnostic, rep.epsilon_diagnostic,
         "order-of-magnitude only; constant taken as 1 (small is good)"});
    for (std::size_t i = 0; i < 4; ++i)
        rep.hypothesis_flags.push_back(
            {"k_condition_" + std::to_string(i + 1), HypothesisFlag::Status::Diagnostic,
             rep.k_diagnostics[i],
             "order-of-magnitude only; constant taken as 1 (large is good)"});
    return rep;
}

ScheduleCheck check_schedule(std::span<const double> alphas, const TheoremReport& report) {
    if (alphas.empty()) throw AssumptionViolation("check_schedule: empty prefix");
    ScheduleCheck out;

    for (std::size_t t = 0; t < alphas.size(); ++t) {
        if (alphas[t] < report.t2_threshold) {
            out.T2 = static_cast<long>(t);
            break;
        }
    }

    const double two_sqrt_n = 2.0 * std::sqrt(static_cast<double>(report.n));
    for (std::size_t t = 0; t + 1 < alphas.size(); ++t) {
        const double step = alphas[t] - alphas[t + 1];
        if (step < 0.0) {
            out.violations.push_back({static_cast<long>(t),
                                      ScheduleViolation::Kind::NonMonotone, -step});
            continue;
        }
        const bool stage2 = out.T2 && static_cast<long>(t) >= *out.T2;
        const double bound =
            stage2 ? report.decrement_bound_stage2 : report.decrement_bound_stage1;
        const double lhs = two_sqrt_n * step;
        // Tiny relative slack so a schedule built exactly at the bound is not
        // flagged for the last-ulp of rounding.
        if (lhs > bound * (1.0 + 1e-9))
            out.violations.push_back({static_cast<long>(t),
                                      stage2 ? ScheduleViolation::Kind::Stage2Decrement
                                             : ScheduleViolation::Kind::Stage1Decrement,
                                      lhs - bound});
    }

    if (static_cast<std::size_t>(report.T1) < alphas.size() &&
        alphas[static_cast<std::size_t>(report.T1)] < report.alpha_T1_lower_bound)
        out.violations.push_back(
            {report.T1, ScheduleViolation::Kind::AlphaT1BelowBound,
             report.alpha_T1_lower_bound - alphas[static_cast<std::size_t>(report.T1)]});

    out.decreases = alphas.back() < alphas.front();
    std::sort(out.violations.begin(), out.violations.end(),
              [](const ScheduleViolation& a, const ScheduleViolation& b) { return a.t < b.t; });
    return out;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

std::string theorem_report_to_json(const TheoremReport& r) {
    json j;
    j["gamma"] = r.gamma;
    j["lambda_C"] = r.lambda_C;
    j["lambda_X"] = r.lambda_X;
    j["Lambda"] = r.Lambda;
    j["rho"] = r.rho;
    j["c_low"] = r.c_low;
    j["c_up"] = r.c_up;
    j["delta"] = r.delta;
    j["n"] = r.n;
    j["K"] = r.K;
    j["k"] = r.k;
    j["d"] = r.d;
    j["cov_samples"] = r.cov_samples;
    j["alpha_lb"] = r.alpha_lb;
    j["alpha_lb_Lambda"] = r.alpha_lb_Lambda;
    j["beta_ub"] = r.beta_ub;
    j["lipschitz_L"] = r.lipschitz_L;
    j["T1"] = r.T1;
    if (r.T2)
        j["T2"] = *r.T2;
    else
        j["T2"] = "not reached";
    j["t2_threshold"] = r.t2_threshold;
    j["decrement_bound_stage1"] = r.decrement_bound_stage1;
    j["decrement_bound_stage2"] = r.decrement_bound_stage2;
    j["per_step_decrement_stage1"] = r.per_step_decrement_stage1;
    j["per_step_decrement_stage2"] = r.per_step_decrement_stage2;
    j["alpha_T1_lower_bound"] = r.alpha_T1_lower_bound;
    j["eta"] = r.eta;
    j["epsilon_diagnostic"] = r.epsilon_diagnostic;
    j["k_diagnostics"] = r.k_diagnostics;
    json viols = json::array();
    for (const auto& v : r.schedule_violations) {
        const char* kind = nullptr;
        switch (v.kind) {
            case ScheduleViolation::Kind::Stage1Decrement: kind = "stage1_decrement"; break;
            case ScheduleViolation::Kind::Stage2Decrement: kind = "stage2_decrement"; break;
            case ScheduleViolation::Kind::NonMonotone: kind = "non_monotone"; break;
            case ScheduleViolation::Kind::AlphaT1BelowBound: kind = "alpha_T1_below_bound"; break;
        }
        viols.push_back({{"t", v.t}, {"kind", kind}, {"amount", v.amount}});
    }
    j["schedule_violations"] = std::move(viols);
    json flags = json::array();
    for (const auto& f : r.hypothesis_flags) {
        const char* st = f.status == HypothesisFlag::Status::Pass   ? "PASS"
                         : f.status == HypothesisFlag::Status::Fail ? "FAIL"
                                                                    : "DIAG";
        flags.push_back({{"name", f.name}, {"status", st}, {"value", f.value}, {"note", f.note}});
    }
    j["hypothesis_flags"] = std::move(flags);
    if (r.theta_empirical) j["theta_empirical"] = *r.theta_empirical;
    if (r.m_empirical) j["m_empirical"] = *r.m_empirical;
    return j.dump(2);
}

}  // namespace aird
