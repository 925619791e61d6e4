#pragma once

// Entropy-split CART classification tree, its leaf statistics, and a text
// dump for debugging.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctal/data.hpp"
#include "ctal/metrics.hpp"
#include "ctal/rng.hpp"

namespace ctal {

struct TreeParams {
    std::size_t min_samples_leaf = 10;
    std::optional<std::size_t> max_depth;
    /// Features examined per split; 0 means all of them.
    std::size_t max_features = 0;
};

/// Smallest information gain that counts as a split.
inline constexpr double kMinSplitGain = 1e-12;

class ClassificationTree {
public:
    struct Node {
        int feature = -1;  ///< -1 for leaves
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        int leaf_id = -1;  ///< 0..K-1 for leaves, in left-first depth-first order
        int depth = 0;
        std::vector<std::size_t> counts;  ///< training samples per class
        ClassId prediction = 0;

        bool is_leaf() const noexcept { return feature < 0; }
        std::size_t samples() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }
    };

    /// Greedy recursive fit on `indices` (duplicates allowed, as in bootstrap
    /// samples). `seed` only matters when params.max_features subsamples.
    static ClassificationTree fit(const Matrix& features, std::span<const ClassId> labels, int n_classes,
                                  std::span<const Index> indices, const TreeParams& params, std::uint64_t seed = 0) {
        if (indices.empty()) throw std::invalid_argument("fit_tree: empty index set");
        if (params.min_samples_leaf < 1) throw std::invalid_argument("fit_tree: min_samples_leaf must be >= 1");
        if (params.max_depth && *params.max_depth < 1) throw std::invalid_argument("fit_tree: max_depth must be >= 1");
        if (n_classes < 1) throw std::invalid_argument("fit_tree: n_classes must be positive");
        for (Index i : indices) {
            if (i >= features.rows() || i >= labels.size()) throw std::out_of_range("fit_tree: index out of range");
            if (labels[i] < 0 || labels[i] >= n_classes) throw std::invalid_argument("fit_tree: invalid class id");
        }

        ClassificationTree tree;
        tree.n_classes_ = n_classes;
        tree.dim_ = features.cols();
        Builder b{features, labels, params, Rng(seed), tree};
        std::vector<Index> root(indices.begin(), indices.end());
        b.build(root, 0);
        return tree;
    }

    std::size_t n_leaves() const noexcept { return n_leaves_; }
    int n_classes() const noexcept { return n_classes_; }
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<Node>& nodes() const noexcept { return nodes_; }

    /// Leaf node by leaf id.
    const Node& leaf(std::size_t leaf_id) const { return nodes_[leaf_nodes_.at(leaf_id)]; }

    /// Ties go left: x[feature] <= threshold.
    std::size_t assign_leaf(std::span<const double> x) const {
        if (x.size() != dim_) throw std::invalid_argument("assign_leaf: dimension mismatch");
        int n = 0;
        while (!nodes_[static_cast<std::size_t>(n)].is_leaf()) {
            const Node& node = nodes_[static_cast<std::size_t>(n)];
            n = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
        }
        return static_cast<std::size_t>(nodes_[static_cast<std::size_t>(n)].leaf_id);
    }

    ClassId predict(std::span<const double> x) const { return leaf(assign_leaf(x)).prediction; }

    std::vector<double> predict_proba(std::span<const double> x) const {
        const Node& node = leaf(assign_leaf(x));
        const double total = static_cast<double>(node.samples());
        std::vector<double> p(node.counts.size());
        for (std::size_t c = 0; c < p.size(); ++c) p[c] = static_cast<double>(node.counts[c]) / total;
        return p;
    }

    /// Indented dump: one line per node with split or leaf counts.
    std::string dump(std::span<const std::string> feature_names = {}) const {
        std::ostringstream out;
        dump_node(out, 0, feature_names);
        return out.str();
    }

private:
    struct Builder {
        const Matrix& x;
        std::span<const ClassId> y;
        const TreeParams& params;
        Rng rng;
        ClassificationTree& tree;

        struct Split {
            int feature = -1;
            double threshold = 0.0;
            double gain = 0.0;
        };

        std::vector<std::size_t> class_counts(std::span<const Index> idx) const {
            std::vector<std::size_t> counts(static_cast<std::size_t>(tree.n_classes_), 0);
            for (Index i : idx) ++counts[static_cast<std::size_t>(y[i])];
            return counts;
        }

        void scan_feature(std::size_t f, std::span<const Index> idx, double parent_entropy, Split& best) const {
            const std::size_t n = idx.size();
            const std::size_t msl = params.min_samples_leaf;
            std::vector<std::pair<double, ClassId>> v(n);
            for (std::size_t k = 0; k < n; ++k) v[k] = {x(idx[k], f), y[idx[k]]};
            std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

            std::vector<std::size_t> left(static_cast<std::size_t>(tree.n_classes_), 0);
            std::vector<std::size_t> right(left.size(), 0);
            for (const auto& [_, label] : v) ++right[static_cast<std::size_t>(label)];

            for (std::size_t k = 0; k + 1 < n; ++k) {
                const auto c = static_cast<std::size_t>(v[k].second);
                ++left[c];
                --right[c];
                const std::size_t n_left = k + 1;
                if (n_left < msl) continue;
                if (n - n_left < msl) break;
                if (!(v[k].first < v[k + 1].first)) continue;
                const double h = (static_cast<double>(n_left) * entropy_of_counts(left) +
                                  static_cast<double>(n - n_left) * entropy_of_counts(right)) /
                                 static_cast<double>(n);
                const double gain = parent_entropy - h;
                if (gain > kMinSplitGain && gain > best.gain + kMinSplitGain) {
                    double t = v[k].first + (v[k + 1].first - v[k].first) / 2.0;
                    if (!(t < v[k + 1].first)) t = v[k].first;
                    best = {static_cast<int>(f), t, gain};
                } else if (gain > kMinSplitGain && std::abs(gain - best.gain) <= kMinSplitGain &&
                           static_cast<int>(f) < best.feature) {
                    double t = v[k].first + (v[k + 1].first - v[k].first) / 2.0;
                    if (!(t < v[k + 1].first)) t = v[k].first;
                    best = {static_cast<int>(f), t, gain};
                }
            }
        }

        Split find_split(std::span<const Index> idx, double parent_entropy) {
            const std::size_t d = x.cols();
            Split best;
            if (params.max_features == 0 || params.max_features >= d) {
                for (std::size_t f = 0; f < d; ++f) scan_feature(f, idx, parent_entropy, best);
                return best;
            }
            // Random subset; keep drawing further features until a valid split
            // turns up or every feature has been examined.
            std::vector<std::size_t> order(d);
            std::iota(order.begin(), order.end(), std::size_t{0});
            shuffle(order, rng);
            for (std::size_t start = 0; start < d && best.feature < 0; start += params.max_features) {
                const std::size_t stop = std::min(d, start + params.max_features);
                std::vector<std::size_t> chunk(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() + static_cast<std::ptrdiff_t>(stop));
                std::sort(chunk.begin(), chunk.end());
                for (std::size_t f : chunk) scan_feature(f, idx, parent_entropy, best);
            }
            return best;
        }

        int build(std::vector<Index>& idx, int depth) {
            const int id = static_cast<int>(tree.nodes_.size());
            tree.nodes_.emplace_back();
            {
                Node& node = tree.nodes_.back();
                node.depth = depth;
                node.counts = class_counts(idx);
                node.prediction = static_cast<ClassId>(
                    std::max_element(node.counts.begin(), node.counts.end()) - node.counts.begin());
            }
            const auto counts = tree.nodes_[static_cast<std::size_t>(id)].counts;
            const double h = entropy_of_counts(counts);
            const bool depth_left = !params.max_depth || static_cast<std::size_t>(depth) < *params.max_depth;
            Split split;
            if (h > 0.0 && depth_left && idx.size() >= 2 * params.min_samples_leaf) split = find_split(idx, h);

            if (split.feature < 0) {
                Node& node = tree.nodes_[static_cast<std::size_t>(id)];
                node.leaf_id = static_cast<int>(tree.n_leaves_++);
                tree.leaf_nodes_.push_back(static_cast<std::size_t>(id));
                return id;
            }

            std::vector<Index> left, right;
            for (Index i : idx) (x(i, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(i);
            idx.clear();
            idx.shrink_to_fit();
            const int l = build(left, depth + 1);
            const int r = build(right, depth + 1);
            Node& node = tree.nodes_[static_cast<std::size_t>(id)];
            node.feature = split.feature;
            node.threshold = split.threshold;
            node.left = l;
            node.right = r;
            return id;
        }
    };

    void dump_node(std::ostringstream& out, int n, std::span<const std::string> names) const {
        const Node& node = nodes_[static_cast<std::size_t>(n)];
        out << std::string(static_cast<std::size_t>(node.depth) * 2, ' ');
        if (node.is_leaf()) {
            out << "leaf " << node.leaf_id << " class=" << node.prediction << " counts=[";
        } else {
            const auto f = static_cast<std::size_t>(node.feature);
            out << (f < names.size() ? names[f] : "x" + std::to_string(f)) << " <= " << node.threshold << " counts=[";
        }
        for (std::size_t c = 0; c < node.counts.size(); ++c) out << (c ? "," : "") << node.counts[c];
        out << "]\n";
        if (!node.is_leaf()) {
            dump_node(out, node.left, names);
            dump_node(out, node.right, names);
        }
    }

    std::vector<Node> nodes_;
    std::vector<std::size_t> leaf_nodes_;
    std::size_t n_leaves_ = 0;
    int n_classes_ = 0;
    std::size_t dim_ = 0;
};

inline ClassificationTree fit_tree(const Matrix& features, std::span<const ClassId> labels, int n_classes,
                                   std::span<const Index> indices, const TreeParams& params, std::uint64_t seed = 0) {
    return ClassificationTree::fit(features, labels, n_classes, indices, params, seed);
}

/// Per-leaf quantities driving the CT-AL budget split.
struct LeafStats {
    std::size_t leaf_id = 0;
    std::vector<Index> labeled;
    std::vector<Index> unlabeled;
    std::vector<std::size_t> class_counts;  ///< over labeled samples
    std::vector<double> class_probs;
    double entropy = 0.0;  ///< S_k
    double density = 0.0;  ///< pi_k: unlabeled in leaf / pool size
    bool is_pure = false;
    double weight = 1.0;  ///< E_k: 1 for pure leaves, S_k otherwise
    std::size_t allocation = 0;
};

/// E_k for a leaf with entropy s.
inline double leaf_weight(double s) noexcept { return s == 0.0 ? 1.0 : s; }

/// Leaf statistics for a tree fitted on exactly pool.labeled(). `log_base`
/// selects the entropy unit (2 = bits).
inline std::vector<LeafStats> compute_leaf_stats(const ClassificationTree& tree, const Matrix& features,
                                                 std::span<const ClassId> labels, const PoolState& pool,
                                                 double log_base = 2.0) {
    std::vector<LeafStats> stats(tree.n_leaves());
    for (std::size_t k = 0; k < stats.size(); ++k) {
        stats[k].leaf_id = k;
        stats[k].class_counts.assign(static_cast<std::size_t>(tree.n_classes()), 0);
    }
    for (Index i : pool.labeled()) {
        LeafStats& s = stats[tree.assign_leaf(features.row(i))];
        s.labeled.push_back(i);
        ++s.class_counts[static_cast<std::size_t>(labels[i])];
    }
    for (Index i : pool.unlabeled()) stats[tree.assign_leaf(features.row(i))].unlabeled.push_back(i);

    const double pool_size = static_cast<double>(pool.pool().size());
    const double unit = 1.0 / std::log2(log_base);
    for (LeafStats& s : stats) {
        if (s.class_counts != tree.leaf(s.leaf_id).counts)
            throw std::logic_error("compute_leaf_stats: tree was not fitted on the pool's labeled set");
        const double total = static_cast<double>(s.labeled.size());
        s.class_probs.resize(s.class_counts.size());
        for (std::size_t c = 0; c < s.class_counts.size(); ++c)
            s.class_probs[c] = total > 0 ? static_cast<double>(s.class_counts[c]) / total : 0.0;
        const auto distinct = std::count_if(s.class_counts.begin(), s.class_counts.end(), [](std::size_t c) { return c > 0; });
        s.is_pure = distinct <= 1;
        s.entropy = s.is_pure ? 0.0 : entropy_of_counts(s.class_counts) * unit;
        s.density = pool_size > 0 ? static_cast<double>(s.unlabeled.size()) / pool_size : 0.0;
        s.weight = leaf_weight(s.entropy);
    }
    return stats;
}

}  // namespace ctal
