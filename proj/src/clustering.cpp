#include "lkd/clustering.hpp"

#include "lkd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace lkd {

namespace {

constexpr int kMaxIterations = 300;

double squared_distance(const Embedding& a, const Embedding& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

// Uniform double in [0, 1) built from the top 53 bits, so results do not depend
// on the standard library's distribution implementation.
double next_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t pick_weighted(std::mt19937_64& rng, const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) {
        return static_cast<std::size_t>(next_unit(rng) * static_cast<double>(weights.size()));
    }
    const double target = next_unit(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (target < acc) return i;
    }
    return weights.size() - 1;
}

// k-means++ with a configurable number of D^2-weighted candidate draws per
// step; trials > 1 is the greedy variant that keeps the candidate lowering the
// potential most. Plain draws (trials = 1) stay in the mix across restarts
// because greedy seeding is nearly deterministic on small inputs.
std::vector<Embedding> kmeanspp_init(const std::vector<Embedding>& points, std::size_t k,
                                     std::mt19937_64& rng, int trials) {
    std::vector<Embedding> centers;
    centers.reserve(k);
    const std::size_t first =
        static_cast<std::size_t>(next_unit(rng) * static_cast<double>(points.size()));
    centers.push_back(points[std::min(first, points.size() - 1)]);

    std::vector<double> best(points.size(), std::numeric_limits<double>::max());
    while (centers.size() < k) {
        for (std::size_t i = 0; i < points.size(); ++i) {
            best[i] = std::min(best[i], squared_distance(points[i], centers.back()));
        }
        std::size_t chosen = points.size();
        double chosen_potential = std::numeric_limits<double>::max();
        for (int t = 0; t < trials; ++t) {
            const std::size_t candidate = pick_weighted(rng, best);
            double potential = 0.0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                potential += std::min(best[i], squared_distance(points[i], points[candidate]));
            }
            if (potential < chosen_potential) {
                chosen_potential = potential;
                chosen = candidate;
            }
        }
        centers.push_back(points[chosen]);
    }
    return centers;
}

std::size_t nearest_center(const Embedding& point, const std::vector<Embedding>& centers) {
    std::size_t arg = 0;
    double best = std::numeric_limits<double>::max();
    for (std::size_t j = 0; j < centers.size(); ++j) {
        const double d = squared_distance(point, centers[j]);
        if (d < best) { best = d; arg = j; }
    }
    return arg;
}

void update_centroids(const std::vector<Embedding>& points,
                      const std::vector<std::size_t>& assignments,
                      std::vector<Embedding>& centroids, std::vector<std::size_t>& sizes) {
    const std::size_t dim = points.front().size();
    for (auto& c : centroids) std::fill(c.begin(), c.end(), 0.0);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const std::size_t j = assignments[i];
        ++sizes[j];
        for (std::size_t d = 0; d < dim; ++d) centroids[j][d] += points[i][d];
    }
    for (std::size_t j = 0; j < centroids.size(); ++j) {
        if (sizes[j] == 0) continue;
        for (std::size_t d = 0; d < dim; ++d) centroids[j][d] /= static_cast<double>(sizes[j]);
    }
}

// Moves the point farthest from its own centroid into each empty cluster; only
// points from clusters that would stay nonempty are candidates.
bool repair_empty_clusters(const std::vector<Embedding>& points,
                           std::vector<std::size_t>& assignments,
                           std::vector<Embedding>& centroids,
                           std::vector<std::size_t>& sizes) {
    bool repaired = false;
    for (std::size_t j = 0; j < centroids.size(); ++j) {
        if (sizes[j] > 0) continue;
        double worst = -1.0;
        std::size_t victim = points.size();
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (sizes[assignments[i]] <= 1) continue;
            const double d = squared_distance(points[i], centroids[assignments[i]]);
            if (d > worst) { worst = d; victim = i; }
        }
        if (victim == points.size()) continue;  // all clusters are singletons already
        --sizes[assignments[victim]];
        assignments[victim] = j;
        sizes[j] = 1;
        update_centroids(points, assignments, centroids, sizes);
        repaired = true;
    }
    return repaired;
}

void lloyd_iterate(const std::vector<Embedding>& points, std::vector<std::size_t>& assignments,
                   std::vector<Embedding>& centroids, std::vector<std::size_t>& sizes) {
    for (int iter = 0; iter < kMaxIterations; ++iter) {
        bool changed = iter == 0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const std::size_t j = nearest_center(points[i], centroids);
            if (j != assignments[i]) changed = true;
            assignments[i] = j;
        }
        update_centroids(points, assignments, centroids, sizes);
        if (repair_empty_clusters(points, assignments, centroids, sizes)) changed = true;
        if (!changed) break;
    }
}

// Single-point improvement sweeps: moving x from cluster A (size a) to B
// (size b) changes the objective by b/(b+1)*d2(x,muB) - a/(a-1)*d2(x,muA).
// Escapes assignments that are Lloyd-stable but not move-stable.
bool hartigan_refine(const std::vector<Embedding>& points,
                     std::vector<std::size_t>& assignments,
                     std::vector<Embedding>& centroids, std::vector<std::size_t>& sizes) {
    const std::size_t k = centroids.size();
    bool any_move = false;
    for (int sweep = 0; sweep < kMaxIterations; ++sweep) {
        bool moved = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const std::size_t own = assignments[i];
            if (sizes[own] <= 1) continue;
            const double a = static_cast<double>(sizes[own]);
            const double removal_gain =
                a / (a - 1.0) * squared_distance(points[i], centroids[own]);
            double best_delta = -1e-12;
            std::size_t best_target = own;
            for (std::size_t j = 0; j < k; ++j) {
                if (j == own) continue;
                const double b = static_cast<double>(sizes[j]);
                const double delta =
                    b / (b + 1.0) * squared_distance(points[i], centroids[j]) - removal_gain;
                if (delta < best_delta) {
                    best_delta = delta;
                    best_target = j;
                }
            }
            if (best_target != own) {
                assignments[i] = best_target;
                update_centroids(points, assignments, centroids, sizes);
                moved = true;
                any_move = true;
            }
        }
        if (!moved) break;
    }
    return any_move;
}

// Exchanging the clusters of two points escapes minima that single moves
// cannot; the deltas use the leave-one-out / add-one identities for cluster
// sum of squares. Quadratic in N, skipped for large inputs.
bool swap_refine(const std::vector<Embedding>& points, std::vector<std::size_t>& assignments,
                 std::vector<Embedding>& centroids, std::vector<std::size_t>& sizes) {
    constexpr std::size_t kSwapLimit = 512;
    if (points.size() > kSwapLimit) return false;

    auto swap_delta_one_side = [&](std::size_t out_i, std::size_t in_j, std::size_t cluster) {
        const double m = static_cast<double>(sizes[cluster]);
        const Embedding& mu = centroids[cluster];
        const double removal = -m / (m - 1.0) * squared_distance(points[out_i], mu);
        // centroid after removal: (m*mu - x) / (m-1)
        Embedding shifted(mu.size());
        for (std::size_t d = 0; d < mu.size(); ++d) {
            shifted[d] = (m * mu[d] - points[out_i][d]) / (m - 1.0);
        }
        const double addition =
            (m - 1.0) / m * squared_distance(points[in_j], shifted);
        return removal + addition;
    };

    bool any = false;
    for (int sweep = 0; sweep < 50; ++sweep) {
        bool moved = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            for (std::size_t j = i + 1; j < points.size(); ++j) {
                const std::size_t a = assignments[i];
                const std::size_t b = assignments[j];
                if (a == b) continue;
                const double delta =
                    swap_delta_one_side(i, j, a) + swap_delta_one_side(j, i, b);
                if (delta < -1e-12) {
                    std::swap(assignments[i], assignments[j]);
                    update_centroids(points, assignments, centroids, sizes);
                    moved = true;
                    any = true;
                }
            }
        }
        if (!moved) break;
    }
    return any;
}

double partition_objective(const std::vector<Embedding>& points,
                           const std::vector<std::size_t>& assignments,
                           const std::vector<Embedding>& centroids) {
    double objective = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        objective += squared_distance(points[i], centroids[assignments[i]]);
    }
    return objective;
}

// Center-swap local search: replace one center with a data point, reassign,
// and keep the swap when the resulting partition is strictly better. This is
// the move that carves an outlier into its own cluster, which neither point
// moves nor point exchanges can do. Skipped when the scan would be expensive.
bool center_swap_refine(const std::vector<Embedding>& points,
                        std::vector<std::size_t>& assignments,
                        std::vector<Embedding>& centroids, std::vector<std::size_t>& sizes) {
    const std::size_t n = points.size();
    const std::size_t k = centroids.size();
    const std::size_t dim = points.front().size();
    if (static_cast<double>(n) * n * k * k * dim > 5e7) return false;

    bool any = false;
    for (int sweep = 0; sweep < 3; ++sweep) {
        bool improved = false;
        double current = partition_objective(points, assignments, centroids);
        for (std::size_t j = 0; j < k; ++j) {
            for (std::size_t cand = 0; cand < n; ++cand) {
                std::vector<Embedding> trial_centers = centroids;
                trial_centers[j] = points[cand];
                std::vector<std::size_t> trial_assign(n);
                std::vector<std::size_t> trial_sizes(k, 0);
                for (std::size_t i = 0; i < n; ++i) {
                    trial_assign[i] = nearest_center(points[i], trial_centers);
                    ++trial_sizes[trial_assign[i]];
                }
                bool feasible = true;
                for (std::size_t c = 0; c < k; ++c) feasible = feasible && trial_sizes[c] > 0;
                if (!feasible) continue;
                std::vector<Embedding> trial_means(k, Embedding(dim, 0.0));
                update_centroids(points, trial_assign, trial_means, trial_sizes);
                const double cost = partition_objective(points, trial_assign, trial_means);
                if (cost < current - 1e-12) {
                    assignments = std::move(trial_assign);
                    centroids = std::move(trial_means);
                    update_centroids(points, assignments, centroids, sizes);
                    current = cost;
                    improved = true;
                    any = true;
                }
            }
        }
        if (!improved) break;
    }
    return any;
}

ClusterPartition lloyd_run(const std::vector<Embedding>& points, std::size_t k,
                           std::mt19937_64& rng, int trials) {
    std::vector<Embedding> centroids = kmeanspp_init(points, k, rng, trials);
    std::vector<std::size_t> assignments(points.size(), 0);
    std::vector<std::size_t> sizes(k, 0);

    for (int round = 0; round < 20; ++round) {
        lloyd_iterate(points, assignments, centroids, sizes);
        const bool improved_moves = hartigan_refine(points, assignments, centroids, sizes);
        const bool improved_swaps = swap_refine(points, assignments, centroids, sizes);
        const bool improved_centers = center_swap_refine(points, assignments, centroids, sizes);
        if (!improved_moves && !improved_swaps && !improved_centers) break;
    }

    ClusterPartition partition;
    partition.assignments = std::move(assignments);
    partition.centroids = std::move(centroids);
    partition.k = k;
    partition.objective = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        partition.objective +=
            squared_distance(points[i], partition.centroids[partition.assignments[i]]);
    }
    return partition;
}

} // namespace

ClusterPartition kmeans(const std::vector<Embedding>& points, std::size_t k,
                        std::uint64_t seed, int restarts) {
    if (points.empty() || k < 1 || k > points.size()) {
        throw BadKError("k must satisfy 1 <= k <= N");
    }
    const std::size_t dim = points.front().size();
    for (const auto& p : points) {
        if (p.size() != dim) throw DimensionMismatchError("points have mixed dimensions");
    }
    if (restarts < 1) restarts = 1;

    const int greedy_trials = 2 + static_cast<int>(std::log2(static_cast<double>(k) + 1.0));
    ClusterPartition best;
    best.objective = std::numeric_limits<double>::max();
    for (int r = 0; r < restarts; ++r) {
        // distinct deterministic stream per restart
        std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(r) + 1);
        ClusterPartition candidate = lloyd_run(points, k, rng, r % 2 == 0 ? greedy_trials : 1);
        if (candidate.objective < best.objective) best = std::move(candidate);
    }
    return best;
}

SilhouetteReport silhouette(const std::vector<Embedding>& points,
                            const std::vector<std::size_t>& assignments) {
    const std::size_t n = points.size();
    if (assignments.size() != n) throw BadRangeError("assignments length != point count");
    std::size_t k = 0;
    for (std::size_t a : assignments) k = std::max(k, a + 1);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t a : assignments) ++sizes[a];
    std::size_t nonempty = 0;
    for (std::size_t s : sizes) nonempty += s > 0 ? 1 : 0;
    if (nonempty < 2) throw SingleClusterError("silhouette needs at least 2 clusters");

    SilhouetteReport report;
    report.k = k;
    report.per_point.resize(n, 0.0);

    // Accumulate each point's summed distance to every cluster in one pass over pairs.
    std::vector<std::vector<double>> sums(n, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = std::sqrt(squared_distance(points[i], points[j]));
            sums[i][assignments[j]] += d;
            sums[j][assignments[i]] += d;
        }
    }

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t own = assignments[i];
        if (sizes[own] <= 1) {
            report.per_point[i] = 0.0;  // singleton convention
            continue;
        }
        const double a = sums[i][own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::max();
        for (std::size_t c = 0; c < k; ++c) {
            if (c == own || sizes[c] == 0) continue;
            b = std::min(b, sums[i][c] / static_cast<double>(sizes[c]));
        }
        const double denom = std::max(a, b);
        report.per_point[i] = denom > 0.0 ? (b - a) / denom : 0.0;
        total += report.per_point[i];
    }
    report.mean = n > 0 ? total / static_cast<double>(n) : 0.0;
    // total above skipped singletons, which contribute exactly 0
    return report;
}

ModelSelection select_k(const std::vector<Embedding>& points, std::size_t k_min,
                        std::size_t k_max, std::uint64_t seed, int restarts) {
    if (points.size() < 3 || k_min < 2 || k_min > k_max || k_max > points.size() - 1) {
        throw BadRangeError("need 2 <= k_min <= k_max <= N-1");
    }
    ModelSelection best;
    double best_mean = -std::numeric_limits<double>::max();
    for (std::size_t k = k_min; k <= k_max; ++k) {
        ClusterPartition partition = kmeans(points, k, seed, restarts);
        SilhouetteReport report = silhouette(points, partition.assignments);
        if (report.mean > best_mean) {  // strict: ties keep the smaller k
            best_mean = report.mean;
            best.best_k = k;
            best.partition = std::move(partition);
            best.report = std::move(report);
        }
    }
    return best;
}

} // namespace lkd
