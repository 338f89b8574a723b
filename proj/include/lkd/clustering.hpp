#pragma once

#include "lkd/embedding.hpp"

#include <cstdint>
#include <vector>

namespace lkd {

struct ClusterPartition {
    std::vector<std::size_t> assignments;  // length N, values in [0, k)
    std::vector<Embedding> centroids;      // length k
    double objective = 0.0;                // sum of squared Euclidean distances to centroids
    std::size_t k = 0;
};

struct SilhouetteReport {
    std::vector<double> per_point;  // s(i) in [-1, 1]; 0 for singleton-cluster points
    double mean = 0.0;
    std::size_t k = 0;
};

/// Lloyd's iterations from k-means++ initialization (seeded), best of `restarts`
/// independent runs by objective. Clusters in a returned partition are never
/// empty: an emptied cluster is repaired by reassigning the point currently
/// farthest from its own centroid.
ClusterPartition kmeans(const std::vector<Embedding>& points, std::size_t k,
                        std::uint64_t seed, int restarts);

/// Per-point silhouette over Euclidean distances: a(i) is the mean distance to
/// the other members of i's cluster, b(i) the minimum over other clusters of the
/// mean distance to that cluster's members, s(i) = (b - a) / max(a, b).
SilhouetteReport silhouette(const std::vector<Embedding>& points,
                            const std::vector<std::size_t>& assignments);

struct ModelSelection {
    std::size_t best_k = 0;
    ClusterPartition partition;
    SilhouetteReport report;
};

/// Sweeps k over [k_min, k_max], picking the k with the highest mean silhouette;
/// ties go to the smaller k.
ModelSelection select_k(const std::vector<Embedding>& points, std::size_t k_min,
                        std::size_t k_max, std::uint64_t seed, int restarts = 10);

} // namespace lkd
