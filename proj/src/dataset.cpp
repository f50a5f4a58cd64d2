#include "aird/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "aird/common.hpp"
#include "aird/eig.hpp"

namespace aird {

using nlohmann::json;

double NoisyClusterableDataset::rho_max() const {
    double m = 0.0;
    for (double r : rho_per_cluster) m = std::max(m, r);
    return m;
}

std::vector<std::size_t> NoisyClusterableDataset::cluster_sizes() const {
    std::vector<std::size_t> sizes(K, 0);
    for (int c : cluster_id) sizes[static_cast<std::size_t>(c)]++;
    return sizes;
}

namespace {

// Uniform sample on the cap {u : ||u||=1, ||u - c|| <= eps}. Writing
// u = t*c + sqrt(1-t^2)*w with w uniform on the unit sphere of c's orthogonal
// complement, t = cos(angle) has density (1-t^2)^{(d-3)/2} on [1-eps^2/2, 1].
// Sample t by rejection from the envelope (1-t)^{(d-3)/2} (inverse-CDF), then
// accept with ((1+t)/2)^{(d-3)/2}; for d = 2 the exponent is negative and the
// envelope/acceptance roles flip.
Vec sample_on_cap(std::span<const double> center, double eps, Rng& rng) {
    const std::size_t d = center.size();
    Vec u(center.begin(), center.end());
    if (eps == 0.0) return u;

    const double t_min = 1.0 - eps * eps / 2.0;
    const double expo = (static_cast<double>(d) - 3.0) / 2.0;
    double t;
    for (;;) {
        const double frac = std::pow(rng.next_unit(), 2.0 / (static_cast<double>(d) - 1.0));
        t = 1.0 - (1.0 - t_min) * frac;
        double accept;
        if (expo >= 0.0) {
            accept = std::pow((1.0 + t) / 2.0, expo);
        } else {
            accept = std::pow((1.0 + t_min) / (1.0 + t), -expo);
        }
        if (rng.next_unit() <= accept) break;
    }

    // Direction in the orthogonal complement of the center.
    Vec w(d);
    for (;;) {
        for (std::size_t i = 0; i < d; ++i) w[i] = rng.next_gaussian();
        const double proj = dot(w, center);
        for (std::size_t i = 0; i < d; ++i) w[i] -= proj * center[i];
        const double nw = norm2(w);
        if (nw > 1e-12) {
            for (std::size_t i = 0; i < d; ++i) w[i] /= nw;
            break;
        }
    }

    const double sina = std::sqrt(std::max(0.0, 1.0 - t * t));
    for (std::size_t i = 0; i < d; ++i) u[i] = t * center[i] + sina * w[i];
    return u;
}

json vec_to_json(std::span<const double> v) {
    json a = json::array();
    for (double x : v) a.push_back(x);
    return a;
}

int require_label(const json& j, const char* key, std::size_t line_no) {
    if (!j.contains(key) || !j[key].is_number_integer())
        throw LoadError("line " + std::to_string(line_no) + ": missing integer field '" + key + "'");
    const int v = j[key].get<int>();
    if (v != 1 && v != -1)
        throw LoadError("line " + std::to_string(line_no) + ": field '" + key +
                        "' must be -1 or +1, got " + std::to_string(v));
    return v;
}

}  // namespace

NoisyClusterableDataset generate_clusterable(std::size_t K, std::size_t n,
                                             std::size_t d, double epsilon,
                                             double min_center_gap, Rng& rng) {
    if (K < 2) throw AssumptionViolation("generate_clusterable: K must be >= 2");
    if (d < 2) throw AssumptionViolation("generate_clusterable: d must be >= 2");
    if (n < K) throw AssumptionViolation("generate_clusterable: n must be >= K");
    if (!(epsilon >= 0.0) || epsilon >= min_center_gap / 4.0)
        throw AssumptionViolation(
            "generate_clusterable: epsilon must lie in [0, min_center_gap/4)");

    NoisyClusterableDataset ds;
    ds.K = K;
    ds.n = n;
    ds.d = d;
    ds.epsilon = epsilon;

    // Centers by rejection on pairwise distance.
    ds.centers = Mat(K, d);
    std::size_t placed = 0;
    for (std::size_t attempts = 0; placed < K; ++attempts) {
        if (attempts >= 1000000)
            throw GenerationInfeasible(
                "generate_clusterable: could not place " + std::to_string(K) +
                " centers with pairwise gap >= " + std::to_string(min_center_gap) +
                " in dimension " + std::to_string(d) + " after 1e6 tries");
        const Vec cand = unit_sphere_sample(d, rng);
        bool ok = true;
        for (std::size_t l = 0; l < placed && ok; ++l)
            if (norm2_diff(cand, ds.centers.row(l)) < min_center_gap) ok = false;
        if (ok) {
            std::copy(cand.begin(), cand.end(), ds.centers.row(placed).begin());
            ++placed;
        }
    }

    // Cluster sizes as equal as integer division allows.
    std::vector<std::size_t> sizes(K, n / K);
    for (std::size_t l = 0; l < n % K; ++l) sizes[l]++;

    ds.X = Mat(n, d);
    ds.y_true.resize(n);
    ds.y_obs.resize(n);
    ds.cluster_id.resize(n);
    ds.rho_per_cluster.assign(K, 0.0);

    std::size_t row = 0;
    for (std::size_t l = 0; l < K; ++l) {
        const double label = (l % 2 == 0) ? 1.0 : -1.0;
        for (std::size_t i = 0; i < sizes[l]; ++i, ++row) {
            const Vec x = sample_on_cap(ds.centers.row(l), epsilon, rng);
            std::copy(x.begin(), x.end(), ds.X.row(row).begin());
            ds.cluster_id[row] = static_cast<int>(l);
            ds.y_true[row] = label;
            ds.y_obs[row] = label;
        }
    }
    return ds;
}

NoisyClusterableDataset corrupt_labels(const NoisyClusterableDataset& ds,
                                       const std::vector<double>& rho, Rng& rng) {
    if (rho.size() != ds.K)
        throw DimensionError("corrupt_labels: need one rho per cluster");
    for (double r : rho)
        if (!(r >= 0.0) || r >= 0.5)
            throw AssumptionViolation("corrupt_labels: every rho_l must lie in [0, 1/2)");

    NoisyClusterableDataset out = ds;
    const auto sizes = ds.cluster_sizes();

    // Row indices per cluster, in dataset order.
    std::vector<std::vector<std::size_t>> members(ds.K);
    for (std::size_t i = 0; i < ds.n; ++i)
        members[static_cast<std::size_t>(ds.cluster_id[i])].push_back(i);

    for (std::size_t l = 0; l < ds.K; ++l) {
        const std::size_t n_l = sizes[l];
        const auto flips = static_cast<std::size_t>(
            std::llround(rho[l] * static_cast<double>(n_l)));
        // Partial Fisher-Yates: first `flips` entries are a uniform subset.
        auto& idx = members[l];
        for (std::size_t i = 0; i < flips; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(
                                          rng.next_below(idx.size() - i));
            std::swap(idx[i], idx[j]);
        }
        for (std::size_t i = 0; i < flips; ++i)
            out.y_obs[idx[i]] = -out.y_true[idx[i]];
        out.rho_per_cluster[l] = rho[l];
    }
    return out;
}

NoisyClusterableDataset corrupt_labels(const NoisyClusterableDataset& ds,
                                       double rho, Rng& rng) {
    return corrupt_labels(ds, std::vector<double>(ds.K, rho), rng);
}

DatasetStats dataset_stats(const NoisyClusterableDataset& ds) {
    DatasetStats st;
    const auto sizes = ds.cluster_sizes();
    st.min_cluster_size = *std::min_element(sizes.begin(), sizes.end());
    st.max_cluster_size = *std::max_element(sizes.begin(), sizes.end());

    st.achieved_rho.assign(ds.K, 0.0);
    std::vector<std::size_t> flipped(ds.K, 0);
    for (std::size_t i = 0; i < ds.n; ++i)
        if (ds.y_obs[i] != ds.y_true[i])
            flipped[static_cast<std::size_t>(ds.cluster_id[i])]++;
    for (std::size_t l = 0; l < ds.K; ++l)
        st.achieved_rho[l] = sizes[l] == 0
                                 ? 0.0
                                 : static_cast<double>(flipped[l]) / static_cast<double>(sizes[l]);

    st.max_within_cluster_radius = 0.0;
    for (std::size_t i = 0; i < ds.n; ++i) {
        const double r = norm2_diff(
            ds.X.row(i), ds.centers.row(static_cast<std::size_t>(ds.cluster_id[i])));
        st.max_within_cluster_radius = std::max(st.max_within_cluster_radius, r);
    }

    st.min_center_gap = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < ds.K; ++a)
        for (std::size_t b = a + 1; b < ds.K; ++b)
            st.min_center_gap =
                std::min(st.min_center_gap, norm2_diff(ds.centers.row(a), ds.centers.row(b)));

    const double k_over_n = static_cast<double>(ds.K) / static_cast<double>(ds.n);
    st.c_low = static_cast<double>(st.min_cluster_size) * k_over_n;
    st.c_up = static_cast<double>(st.max_cluster_size) * k_over_n;
    return st;
}

void validate_dataset(const NoisyClusterableDataset& ds) {
    if (ds.X.rows != ds.n || ds.X.cols != ds.d)
        throw DimensionError("dataset: X shape disagrees with n, d");
    if (ds.centers.rows != ds.K || ds.centers.cols != ds.d)
        throw DimensionError("dataset: centers shape disagrees with K, d");
    if (ds.y_true.size() != ds.n || ds.y_obs.size() != ds.n || ds.cluster_id.size() != ds.n)
        throw DimensionError("dataset: label/cluster arrays disagree with n");
    if (!all_finite(ds.X) || !all_finite(ds.centers))
        throw AssumptionViolation("dataset: non-finite entries");

    for (std::size_t l = 0; l < ds.K; ++l) {
        const double nc = norm2(ds.centers.row(l));
        if (std::abs(nc - 1.0) > 1e-12)
            throw AssumptionViolation("dataset: center " + std::to_string(l) +
                                      " is not unit norm");
    }
    std::vector<double> cluster_label(ds.K, 0.0);
    for (std::size_t i = 0; i < ds.n; ++i) {
        if (ds.cluster_id[i] < 0 || static_cast<std::size_t>(ds.cluster_id[i]) >= ds.K)
            throw AssumptionViolation("dataset: cluster id out of range at row " +
                                      std::to_string(i));
        const double nx = norm2(ds.X.row(i));
        if (std::abs(nx - 1.0) > 1e-12)
            throw AssumptionViolation("dataset: row " + std::to_string(i) +
                                      " is not unit norm");
        const auto l = static_cast<std::size_t>(ds.cluster_id[i]);
        const double r = norm2_diff(ds.X.row(i), ds.centers.row(l));
        if (r > ds.epsilon * (1.0 + 1e-12) + 1e-14)
            throw AssumptionViolation("dataset: row " + std::to_string(i) +
                                      " lies outside its cluster ball");
        if (ds.y_true[i] != 1.0 && ds.y_true[i] != -1.0)
            throw AssumptionViolation("dataset: y_true not in {-1,+1} at row " +
                                      std::to_string(i));
        if (ds.y_obs[i] != 1.0 && ds.y_obs[i] != -1.0)
            throw AssumptionViolation("dataset: y_obs not in {-1,+1} at row " +
                                      std::to_string(i));
        if (cluster_label[l] == 0.0)
            cluster_label[l] = ds.y_true[i];
        else if (cluster_label[l] != ds.y_true[i])
            throw AssumptionViolation("dataset: cluster " + std::to_string(l) +
                                      " has mixed ground-truth labels");
    }
    if (ds.rho_per_cluster.size() != ds.K)
        throw DimensionError("dataset: rho_per_cluster size disagrees with K");
    const auto st = dataset_stats(ds);
    if (st.min_cluster_size == 0)
        throw AssumptionViolation("dataset: empty cluster");
    const auto sizes = ds.cluster_sizes();
    for (std::size_t l = 0; l < ds.K; ++l) {
        const double rho_l = ds.rho_per_cluster[l];
        if (!(rho_l >= 0.0) || rho_l >= 0.5)
            throw AssumptionViolation("dataset: rho_per_cluster[" + std::to_string(l) +
                                      "] outside [0, 1/2)");
        // Achieved flips must equal round(rho_l * n_l) exactly.
        const double achieved = st.achieved_rho[l] * static_cast<double>(sizes[l]);
        const double wanted =
            static_cast<double>(std::llround(rho_l * static_cast<double>(sizes[l])));
        if (achieved != wanted)
            throw AssumptionViolation("dataset: flip count of cluster " + std::to_string(l) +
                                      " disagrees with rho_per_cluster within rounding");
    }
}

void save_dataset(const NoisyClusterableDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("save_dataset: cannot open '" + path + "' for writing");

    json header;
    header["K"] = ds.K;
    header["d"] = ds.d;
    header["epsilon"] = ds.epsilon;
    json centers = json::array();
    for (std::size_t l = 0; l < ds.K; ++l) centers.push_back(vec_to_json(ds.centers.row(l)));
    header["centers"] = centers;
    // Extra field beyond the required header keys; carried so that
    // load(save(ds)) reproduces the requested corruption rates bit-exactly.
    header["rho_per_cluster"] = vec_to_json(ds.rho_per_cluster);
    out << header.dump() << '\n';

    for (std::size_t i = 0; i < ds.n; ++i) {
        json rec;
        rec["x"] = vec_to_json(ds.X.row(i));
        rec["y_true"] = static_cast<int>(ds.y_true[i]);
        rec["y_obs"] = static_cast<int>(ds.y_obs[i]);
        rec["cluster"] = ds.cluster_id[i];
        out << rec.dump() << '\n';
    }
    if (!out) throw LoadError("save_dataset: write to '" + path + "' failed");
}

NoisyClusterableDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("load_dataset: cannot open '" + path + "'");

    std::string line;
    std::size_t line_no = 0;

    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) return true;
        }
        return false;
    };

    if (!next_line()) throw LoadError("load_dataset: empty file");

    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw LoadError("line 1: malformed header: " + std::string(e.what()));
    }
    if (!header.contains("K") || !header.contains("d") || !header.contains("epsilon") ||
        !header.contains("centers"))
        throw LoadError("line 1: header must contain K, d, epsilon, centers");

    NoisyClusterableDataset ds;
    ds.K = header["K"].get<std::size_t>();
    ds.d = header["d"].get<std::size_t>();
    ds.epsilon = header["epsilon"].get<double>();
    if (ds.K == 0 || ds.d == 0) throw LoadError("line 1: K and d must be positive");

    const auto& centers = header["centers"];
    if (!centers.is_array() || centers.size() != ds.K)
        throw LoadError("line 1: centers must be an array of K vectors");
    ds.centers = Mat(ds.K, ds.d);
    for (std::size_t l = 0; l < ds.K; ++l) {
        const auto& c = centers[l];
        if (!c.is_array() || c.size() != ds.d)
            throw LoadError("line 1: center " + std::to_string(l) + " has wrong dimension");
        for (std::size_t j = 0; j < ds.d; ++j) ds.centers(l, j) = c[j].get<double>();
        const double nc = norm2(ds.centers.row(l));
        if (std::abs(nc - 1.0) > 1e-9)
            throw LoadError("line 1: center " + std::to_string(l) + " has norm " +
                            std::to_string(nc) + ", expected 1");
    }

    std::vector<Vec> xs;
    while (next_line()) {
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw LoadError("line " + std::to_string(line_no) +
                            ": malformed record: " + std::string(e.what()));
        }
        if (!rec.contains("x") || !rec["x"].is_array() || rec["x"].size() != ds.d)
            throw LoadError("line " + std::to_string(line_no) +
                            ": field 'x' must be an array of length d");
        Vec x(ds.d);
        for (std::size_t j = 0; j < ds.d; ++j) x[j] = rec["x"][j].get<double>();
        const double nx = norm2(x);
        if (std::abs(nx - 1.0) > 1e-9)
            throw LoadError("line " + std::to_string(line_no) + ": row norm " +
                            std::to_string(nx) + " deviates from 1 beyond 1e-9");
        const int yt = require_label(rec, "y_true", line_no);
        const int yo = require_label(rec, "y_obs", line_no);
        if (!rec.contains("cluster") || !rec["cluster"].is_number_integer())
            throw LoadError("line " + std::to_string(line_no) +
                            ": missing integer field 'cluster'");
        const int cl = rec["cluster"].get<int>();
        if (cl < 0 || static_cast<std::size_t>(cl) >= ds.K)
            throw LoadError("line " + std::to_string(line_no) + ": cluster id " +
                            std::to_string(cl) + " outside [0, K)");
        xs.push_back(std::move(x));
        ds.y_true.push_back(yt);
        ds.y_obs.push_back(yo);
        ds.cluster_id.push_back(cl);
    }

    ds.n = xs.size();
    if (ds.n == 0) throw LoadError("load_dataset: no data records");
    ds.X = Mat(ds.n, ds.d);
    for (std::size_t i = 0; i < ds.n; ++i)
        std::copy(xs[i].begin(), xs[i].end(), ds.X.row(i).begin());

    const auto sizes = ds.cluster_sizes();
    for (std::size_t l = 0; l < ds.K; ++l)
        if (sizes[l] == 0)
            throw LoadError("load_dataset: cluster " + std::to_string(l) + " is empty");

    if (header.contains("rho_per_cluster")) {
        const auto& r = header["rho_per_cluster"];
        if (!r.is_array() || r.size() != ds.K)
            throw LoadError("line 1: rho_per_cluster must be an array of K reals");
        ds.rho_per_cluster.resize(ds.K);
        for (std::size_t l = 0; l < ds.K; ++l) ds.rho_per_cluster[l] = r[l].get<double>();
    } else {
        ds.rho_per_cluster = dataset_stats(ds).achieved_rho;
    }
    for (std::size_t l = 0; l < ds.K; ++l)
        if (!(ds.rho_per_cluster[l] >= 0.0) || ds.rho_per_cluster[l] >= 0.5)
            throw LoadError("load_dataset: cluster " + std::to_string(l) +
                            " has corruption rate outside [0, 1/2)");
    return ds;
}

}  // namespace aird
