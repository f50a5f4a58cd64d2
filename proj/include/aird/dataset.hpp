#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "aird/mat.hpp"
#include "aird/rng.hpp"

namespace aird {

// Binary dataset with K clusters of unit-norm inputs, per-cluster constant
// ground-truth labels and (possibly) corrupted observed labels.
struct NoisyClusterableDataset {
    Mat X;                      // n x d, unit-norm rows
    Vec y_true;                 // entries in {-1,+1}
    Vec y_obs;                  // entries in {-1,+1}
    std::vector<int> cluster_id;  // per row, in [0, K)
    Mat centers;                // K x d, unit-norm rows
    double epsilon = 0.0;
    // Requested per-cluster corruption rates, each in [0, 1/2). The achieved
    // flip count per cluster is round(rho_l * n_l); dataset_stats reports the
    // achieved fractions.
    std::vector<double> rho_per_cluster;
    std::size_t K = 0, n = 0, d = 0;

    double rho_max() const;
    std::vector<std::size_t> cluster_sizes() const;
};

struct DatasetStats {
    std::vector<double> achieved_rho;
    std::size_t min_cluster_size = 0;
    std::size_t max_cluster_size = 0;
    double max_within_cluster_radius = 0.0;
    double min_center_gap = 0.0;
    double c_low = 0.0;  // min_l n_l * K / n
    double c_up = 0.0;   // max_l n_l * K / n
};

// Clean dataset (y_obs == y_true). Centers are uniform unit vectors kept
// pairwise at least min_center_gap apart by rejection sampling (fails with
// GenerationInfeasible after 1e6 candidate draws). Points are sampled
// uniformly on the spherical cap {u : ||u||=1, ||u - c_l|| <= epsilon},
// cluster sizes as equal as integer division allows, labels alternating
// +1/-1 by cluster index.
NoisyClusterableDataset generate_clusterable(std::size_t K, std::size_t n,
                                             std::size_t d, double epsilon,
                                             double min_center_gap, Rng& rng);

// Flip exactly round(rho_l * n_l) observed labels per cluster, chosen
// uniformly without replacement. Requires every rho_l in [0, 1/2) and the
// achieved fraction to stay below 1/2 (AssumptionViolation otherwise).
NoisyClusterableDataset corrupt_labels(const NoisyClusterableDataset& ds,
                                       const std::vector<double>& rho, Rng& rng);
NoisyClusterableDataset corrupt_labels(const NoisyClusterableDataset& ds,
                                       double rho, Rng& rng);

// All numbers recomputed from the raw fields, nothing cached.
DatasetStats dataset_stats(const NoisyClusterableDataset& ds);

// Throws if any type invariant is violated.
void validate_dataset(const NoisyClusterableDataset& ds);

// JSON-Lines persistence. Header line {"K","d","epsilon","centers"}, then one
// record {"x","y_true","y_obs","cluster"} per point. Round-trips bit-exactly.
void save_dataset(const NoisyClusterableDataset& ds, const std::string& path);
NoisyClusterableDataset load_dataset(const std::string& path);

}  // namespace aird
