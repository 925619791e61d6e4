#pragma once

// Bagged random forest used as the final evaluator of selected training sets.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "ctal/rng.hpp"
#include "ctal/tree.hpp"

namespace ctal {

enum class FeatureSubset { all, sqrt };

struct ForestParams {
    std::size_t n_trees = 50;
    std::size_t min_samples_leaf = 3;
    bool bootstrap = true;
    FeatureSubset features_per_split = FeatureSubset::sqrt;
};

class Forest {
public:
    static Forest fit(const Matrix& features, std::span<const ClassId> labels, int n_classes,
                      std::span<const Index> indices, const ForestParams& params, std::uint64_t seed,
                      std::size_t threads = 1) {
        if (params.n_trees < 1) throw std::invalid_argument("fit_forest: n_trees must be >= 1");
        if (indices.empty()) throw std::invalid_argument("fit_forest: empty training set");

        TreeParams tp;
        tp.min_samples_leaf = params.min_samples_leaf;
        if (params.features_per_split == FeatureSubset::sqrt)
            tp.max_features = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(features.cols()))));

        Forest forest;
        forest.params_ = params;
        forest.n_classes_ = n_classes;
        forest.trees_.resize(params.n_trees);

        // Each tree owns a stream derived from (seed, tree index), so the
        // result does not depend on the thread count.
        auto fit_one = [&](std::size_t t) {
            const std::uint64_t tree_seed = derive_seed(seed, t);
            Rng rng(derive_seed(tree_seed, 1));
            std::vector<Index> sample;
            if (params.bootstrap) {
                sample.resize(indices.size());
                for (auto& s : sample) s = indices[uniform_index(rng, indices.size())];
            } else {
                sample.assign(indices.begin(), indices.end());
            }
            forest.trees_[t] = ClassificationTree::fit(features, labels, n_classes, sample, tp, derive_seed(tree_seed, 2));
        };

        threads = std::max<std::size_t>(1, std::min(threads, params.n_trees));
        if (threads == 1) {
            for (std::size_t t = 0; t < params.n_trees; ++t) fit_one(t);
        } else {
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < threads; ++w)
                pool.emplace_back([&, w] {
                    for (std::size_t t = w; t < params.n_trees; t += threads) fit_one(t);
                });
        }
        return forest;
    }

    /// Per-class vote totals; they sum to the number of trees.
    std::vector<std::size_t> votes(std::span<const double> x) const {
        std::vector<std::size_t> v(static_cast<std::size_t>(n_classes_), 0);
        for (const auto& t : trees_) ++v[static_cast<std::size_t>(t.predict(x))];
        return v;
    }

    /// Majority vote; ties go to the smallest class id.
    ClassId predict(std::span<const double> x) const {
        const auto v = votes(x);
        return static_cast<ClassId>(std::max_element(v.begin(), v.end()) - v.begin());
    }

    std::vector<ClassId> predict(const Matrix& features, std::span<const Index> rows) const {
        std::vector<ClassId> out;
        out.reserve(rows.size());
        for (Index r : rows) out.push_back(predict(features.row(r)));
        return out;
    }

    const std::vector<ClassificationTree>& trees() const noexcept { return trees_; }
    const ForestParams& params() const noexcept { return params_; }

private:
    std::vector<ClassificationTree> trees_;
    ForestParams params_;
    int n_classes_ = 0;
};

inline Forest fit_forest(const Matrix& features, std::span<const ClassId> labels, int n_classes,
                         std::span<const Index> indices, const ForestParams& params, std::uint64_t seed) {
    return Forest::fit(features, labels, n_classes, indices, params, seed);
}

/// Majority vote over a list of class predictions; ties to the smallest id.
inline ClassId majority_vote(std::span<const ClassId> predictions, int n_classes) {
    std::vector<std::size_t> v(static_cast<std::size_t>(n_classes), 0);
    for (ClassId p : predictions) ++v.at(static_cast<std::size_t>(p));
    return static_cast<ClassId>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace ctal
