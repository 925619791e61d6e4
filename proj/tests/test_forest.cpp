#include <gtest/gtest.h>

#include <random>

#include "ctal/forest.hpp"

using namespace ctal;

namespace {

std::vector<Index> iota_indices(std::size_t n) {
    std::vector<Index> v(n);
    std::iota(v.begin(), v.end(), Index{0});
    return v;
}

struct Data {
    Matrix x;
    std::vector<ClassId> y;
};

Data noisy(std::uint64_t seed, std::size_t n, std::size_t d) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    Data out{Matrix(n, d), std::vector<ClassId>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < d; ++j) s += (out.x(i, j) = nd(gen));
        out.y[i] = s + 0.7 * nd(gen) > 0 ? 1 : 0;
    }
    return out;
}

}  // namespace

TEST(Forest, DegenerateForestMatchesSingleTree) {
    const auto data = noisy(1, 200, 5);
    const auto idx = iota_indices(200);
    const ForestParams p{1, 3, false, FeatureSubset::all};
    const auto forest = fit_forest(data.x, data.y, 2, idx, p, 17);
    const auto tree = fit_tree(data.x, data.y, 2, idx, TreeParams{3, {}, 0});
    const auto grid = noisy(2, 500, 5);
    for (std::size_t i = 0; i < grid.x.rows(); ++i) EXPECT_EQ(forest.predict(grid.x.row(i)), tree.predict(grid.x.row(i)));
}

TEST(Forest, TreeCountAndVoteConservation) {
    const auto data = noisy(3, 120, 4);
    const auto forest = fit_forest(data.x, data.y, 2, iota_indices(120), ForestParams{}, 5);
    EXPECT_EQ(forest.trees().size(), 50u);
    for (std::size_t i = 0; i < 30; ++i) {
        const auto v = forest.votes(data.x.row(i));
        EXPECT_EQ(std::accumulate(v.begin(), v.end(), std::size_t{0}), 50u);
    }
    for (const auto& t : forest.trees()) {
        std::size_t seen = 0;
        for (std::size_t k = 0; k < t.n_leaves(); ++k) seen += t.leaf(k).samples();
        EXPECT_EQ(seen, 120u);
    }
}

TEST(Forest, DeterministicAndThreadIndependent) {
    const auto data = noisy(4, 150, 6);
    const auto idx = iota_indices(150);
    const auto a = Forest::fit(data.x, data.y, 2, idx, ForestParams{}, 99, 1);
    const auto b = Forest::fit(data.x, data.y, 2, idx, ForestParams{}, 99, 4);
    const auto grid = noisy(5, 300, 6);
    const auto rows = iota_indices(300);
    EXPECT_EQ(a.predict(grid.x, rows), b.predict(grid.x, rows));
    for (std::size_t t = 0; t < a.trees().size(); ++t) EXPECT_EQ(a.trees()[t].dump(), b.trees()[t].dump());
    const auto c = Forest::fit(data.x, data.y, 2, idx, ForestParams{}, 100, 1);
    bool differs = false;
    for (std::size_t t = 0; t < a.trees().size() && !differs; ++t) differs = a.trees()[t].dump() != c.trees()[t].dump();
    EXPECT_TRUE(differs);
}

TEST(Forest, FullyGrownFitsTrainingData) {
    const auto data = noisy(6, 100, 3);
    const auto idx = iota_indices(100);
    const auto forest = fit_forest(data.x, data.y, 2, idx, ForestParams{25, 1, false, FeatureSubset::sqrt}, 8);
    EXPECT_EQ(forest.predict(data.x, idx), data.y);
}

TEST(Forest, SeparableBlobCenters) {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> nd(0.0, 0.3);
    const std::vector<std::vector<double>> centers = {{-5, -5}, {5, 5}, {-5, 5}};
    Matrix x(90, 2);
    std::vector<ClassId> y(90);
    for (std::size_t i = 0; i < 90; ++i) {
        y[i] = static_cast<ClassId>(i % 3);
        for (std::size_t j = 0; j < 2; ++j) x(i, j) = centers[i % 3][j] + nd(gen);
    }
    const auto idx = iota_indices(90);
    const auto forest = fit_forest(x, y, 3, idx, ForestParams{}, 1);
    const auto tree = fit_tree(x, y, 3, idx, TreeParams{3, {}, 0});
    for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_EQ(forest.predict(centers[c]), static_cast<ClassId>(c));
        EXPECT_EQ(tree.predict(centers[c]), static_cast<ClassId>(c));
    }
}

TEST(Forest, Errors) {
    const auto data = noisy(8, 10, 2);
    const std::vector<Index> none;
    EXPECT_THROW(fit_forest(data.x, data.y, 2, none, ForestParams{}, 1), std::invalid_argument);
    EXPECT_THROW(fit_forest(data.x, data.y, 2, iota_indices(10), ForestParams{0, 3, true, FeatureSubset::sqrt}, 1),
                 std::invalid_argument);
    const auto forest = fit_forest(data.x, data.y, 2, iota_indices(10), ForestParams{3, 1, true, FeatureSubset::sqrt}, 1);
    const std::vector<double> wrong = {1.0};
    EXPECT_THROW(forest.predict(wrong), std::invalid_argument);
}

TEST(MajorityVote, TieToSmallestClass) {
    const std::vector<ClassId> a = {1, 1, 0};
    const std::vector<ClassId> b = {0, 1};
    const std::vector<ClassId> c = {2, 1, 2, 1};
    EXPECT_EQ(majority_vote(a, 2), 1);
    EXPECT_EQ(majority_vote(b, 2), 0);
    EXPECT_EQ(majority_vote(c, 3), 1);
}
