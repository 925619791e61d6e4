#pragma once

// k-means (k-means++ seeding, Lloyd iterations) and the
// diversity-minus-representativeness selection over a set of clusters.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "ctal/data.hpp"
#include "ctal/rng.hpp"

namespace ctal {

struct KMeansOptions {
    std::size_t max_iters = 100;
    double tol = 1e-6;
};

struct Clustering {
    std::size_t k = 0;
    std::vector<Index> indices;   ///< clustered sample ids
    std::vector<int> assignment;  ///< assignment[p] is the cluster of indices[p]
    Matrix centroids;             ///< k x D
    double inertia = 0.0;
    /// Inertia after every Lloyd iteration; non-increasing.
    std::vector<double> inertia_history;
    std::size_t iterations = 0;

    /// Members of each cluster, in ascending sample-id order.
    std::vector<std::vector<Index>> members() const {
        std::vector<std::vector<Index>> out(k);
        for (std::size_t p = 0; p < indices.size(); ++p) out[static_cast<std::size_t>(assignment[p])].push_back(indices[p]);
        for (auto& m : out) std::sort(m.begin(), m.end());
        return out;
    }
};

namespace detail {

inline std::size_t nearest_centroid(std::span<const double> x, const Matrix& centroids, double* dist2 = nullptr) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        const double d = squared_distance(x, centroids.row(c));
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (dist2) *dist2 = best_d;
    return best;
}

inline Matrix kmeans_plus_plus(const Matrix& x, std::span<const Index> indices, std::size_t k, Rng& rng) {
    const std::size_t n = indices.size();
    Matrix centers(k, x.cols());
    std::vector<bool> taken(n, false);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());

    std::size_t pick = uniform_index(rng, n);
    for (std::size_t c = 0; c < k; ++c) {
        if (c > 0) {
            double total = 0.0;
            for (std::size_t p = 0; p < n; ++p) total += d2[p];
            if (total > 0.0) {
                double target = uniform_real(rng) * total;
                pick = n;
                for (std::size_t p = 0; p < n; ++p) {
                    if (d2[p] <= 0.0) continue;
                    pick = p;
                    target -= d2[p];
                    if (target < 0.0) break;
                }
            } else {
                // Every remaining point coincides with a center; take any
                // point not chosen yet.
                std::vector<std::size_t> free;
                for (std::size_t p = 0; p < n; ++p)
                    if (!taken[p]) free.push_back(p);
                pick = free[uniform_index(rng, free.size())];
            }
        }
        taken[pick] = true;
        const auto src = x.row(indices[pick]);
        std::copy(src.begin(), src.end(), centers.row(c).begin());
        for (std::size_t p = 0; p < n; ++p) d2[p] = std::min(d2[p], squared_distance(x.row(indices[p]), centers.row(c)));
    }
    return centers;
}

}  // namespace detail

/// k-means over the rows `indices` of `x`. Empty clusters are repaired by
/// moving in the point farthest from its centroid. Deterministic given seed.
inline Clustering kmeans(const Matrix& x, std::span<const Index> indices, std::size_t k, std::uint64_t seed,
                         const KMeansOptions& opts = {}) {
    if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (k > indices.size()) throw std::invalid_argument("kmeans: k exceeds the number of points");

    const std::size_t n = indices.size();
    const std::size_t d = x.cols();
    Rng rng(seed);

    Clustering out;
    out.k = k;
    out.indices.assign(indices.begin(), indices.end());
    out.assignment.assign(n, 0);
    out.centroids = detail::kmeans_plus_plus(x, indices, k, rng);

    std::vector<double> dist2(n);
    std::vector<std::size_t> sizes(k);
    for (std::size_t iter = 0; iter < std::max<std::size_t>(1, opts.max_iters); ++iter) {
        std::fill(sizes.begin(), sizes.end(), 0);
        for (std::size_t p = 0; p < n; ++p) {
            out.assignment[p] = static_cast<int>(detail::nearest_centroid(x.row(indices[p]), out.centroids, &dist2[p]));
            ++sizes[static_cast<std::size_t>(out.assignment[p])];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] > 0) continue;
            std::size_t far = n;
            for (std::size_t p = 0; p < n; ++p)
                if (sizes[static_cast<std::size_t>(out.assignment[p])] > 1 && (far == n || dist2[p] > dist2[far])) far = p;
            --sizes[static_cast<std::size_t>(out.assignment[far])];
            out.assignment[far] = static_cast<int>(c);
            sizes[c] = 1;
            dist2[far] = 0.0;
            const auto src = x.row(indices[far]);
            std::copy(src.begin(), src.end(), out.centroids.row(c).begin());
        }

        Matrix next(k, d);
        for (std::size_t p = 0; p < n; ++p) {
            auto dst = next.row(static_cast<std::size_t>(out.assignment[p]));
            const auto src = x.row(indices[p]);
            for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            for (double& v : next.row(c)) v /= static_cast<double>(sizes[c]);
            shift = std::max(shift, euclidean_distance(next.row(c), out.centroids.row(c)));
        }
        out.centroids = std::move(next);

        double inertia = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            inertia += squared_distance(x.row(indices[p]), out.centroids.row(static_cast<std::size_t>(out.assignment[p])));
        out.inertia = inertia;
        out.inertia_history.push_back(inertia);
        out.iterations = iter + 1;
        if (shift < opts.tol) break;
    }
    return out;
}

/// R(x_j): mean distance from x_j to the other members of its cluster; 0 for
/// a singleton.
inline double representativeness(const Matrix& x, Index j, std::span<const Index> members) {
    if (std::find(members.begin(), members.end(), j) == members.end())
        throw std::invalid_argument("representativeness: sample is not a member of the cluster");
    if (members.size() < 2) return 0.0;
    double sum = 0.0;
    for (Index m : members)
        if (m != j) sum += euclidean_distance(x.row(j), x.row(m));
    return sum / static_cast<double>(members.size() - 1);
}

/// Delta(x_j): distance from x_j to its nearest anchor; +inf with no anchors.
inline double diversity(const Matrix& x, Index j, std::span<const Index> anchors) {
    double best = std::numeric_limits<double>::infinity();
    for (Index a : anchors) best = std::min(best, euclidean_distance(x.row(j), x.row(a)));
    return best;
}

struct SelectionState {
    /// selected[l] is the chosen member of cluster l.
    std::vector<Index> selected;
    /// Labeled anchors the diversity term was measured against.
    std::vector<Index> anchors;
    std::size_t rounds = 0;
    bool converged = false;
};

/// Picks one member per cluster by coordinate ascent on Delta - R. Starts at
/// the member closest to each cluster mean, then sweeps the clusters in order,
/// re-picking each against the labeled anchors and the other clusters' current
/// picks, until a full sweep changes nothing or `max_rounds` sweeps ran.
/// Ties go to the lowest sample id.
inline SelectionState divrep_optimize(const Matrix& x, std::span<const std::vector<Index>> clusters,
                                      std::span<const Index> labeled_anchors, std::size_t max_rounds = 10) {
    const std::size_t n_clusters = clusters.size();
    SelectionState state;
    state.anchors.assign(labeled_anchors.begin(), labeled_anchors.end());
    state.selected.resize(n_clusters);
    if (n_clusters == 0) {
        state.converged = true;
        return state;
    }

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<Index>> members(n_clusters);
    std::vector<std::vector<double>> rep(n_clusters);     // R per member
    std::vector<std::vector<double>> anchor_d(n_clusters);  // distance to nearest labeled anchor
    for (std::size_t l = 0; l < n_clusters; ++l) {
        if (clusters[l].empty()) throw std::invalid_argument("divrep_optimize: empty cluster");
        members[l] = clusters[l];
        std::sort(members[l].begin(), members[l].end());
        const auto& m = members[l];
        const std::size_t s = m.size();

        std::vector<double> sum(s, 0.0);
        for (std::size_t a = 0; a < s; ++a)
            for (std::size_t b = a + 1; b < s; ++b) {
                const double dist = euclidean_distance(x.row(m[a]), x.row(m[b]));
                sum[a] += dist;
                sum[b] += dist;
            }
        rep[l].resize(s);
        for (std::size_t a = 0; a < s; ++a) rep[l][a] = s > 1 ? sum[a] / static_cast<double>(s - 1) : 0.0;

        anchor_d[l].resize(s);
        for (std::size_t a = 0; a < s; ++a) anchor_d[l][a] = diversity(x, m[a], labeled_anchors);

        // Member closest to the cluster mean.
        std::vector<double> centroid(x.cols(), 0.0);
        for (Index i : m)
            for (std::size_t j = 0; j < x.cols(); ++j) centroid[j] += x(i, j);
        for (double& v : centroid) v /= static_cast<double>(s);
        std::size_t best = 0;
        double best_d = inf;
        for (std::size_t a = 0; a < s; ++a) {
            const double dist = squared_distance(x.row(m[a]), centroid);
            if (dist < best_d) {
                best_d = dist;
                best = a;
            }
        }
        state.selected[l] = m[best];
    }

    for (std::size_t round = 0; round < max_rounds; ++round) {
        bool changed = false;
        for (std::size_t l = 0; l < n_clusters; ++l) {
            const auto& m = members[l];
            std::size_t best = 0;
            double best_obj = -inf;
            bool first = true;
            for (std::size_t a = 0; a < m.size(); ++a) {
                double delta = anchor_d[l][a];
                for (std::size_t o = 0; o < n_clusters; ++o)
                    if (o != l) delta = std::min(delta, euclidean_distance(x.row(m[a]), x.row(state.selected[o])));
                // With no anchor at all every Delta is +inf; rank by R alone.
                const double obj = delta == inf ? -rep[l][a] : delta - rep[l][a];
                if (first || obj > best_obj) {
                    best_obj = obj;
                    best = a;
                    first = false;
                }
            }
            if (m[best] != state.selected[l]) {
                state.selected[l] = m[best];
                changed = true;
            }
        }
        state.rounds = round + 1;
        if (!changed) {
            state.converged = true;
            break;
        }
    }
    return state;
}

}  // namespace ctal
