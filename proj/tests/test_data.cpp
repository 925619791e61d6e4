#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ctal/data.hpp"

using namespace ctal;

namespace {

Dataset parse(const std::string& text, CsvOptions opts = {}) {
    std::istringstream in(text);
    return parse_csv(in, opts, "test");
}

}  // namespace

TEST(LoadCsv, EncodesLabelsByFirstAppearance) {
    CsvOptions opts;
    opts.label_column = std::string("y");
    const auto ds = parse("x1,x2,y\n1,2,a\n3,4,b\n5,6,a\n", opts);
    EXPECT_EQ(ds.size(), 3u);
    EXPECT_EQ(ds.dim(), 2u);
    EXPECT_EQ(ds.n_classes, 2);
    EXPECT_EQ(ds.labels, (std::vector<ClassId>{0, 1, 0}));
    EXPECT_EQ(ds.class_names, (std::vector<std::string>{"a", "b"}));
    EXPECT_DOUBLE_EQ(ds.features(2, 1), 6.0);
    EXPECT_NO_THROW(ds.validate());
}

TEST(LoadCsv, LabelDecodingRoundTrips) {
    CsvOptions opts;
    opts.label_column = std::size_t{0};
    const std::vector<std::string> raw = {"zeta", "alpha", "zeta", "mid", "alpha", "mid", "mid"};
    std::string text = "label,v\n";
    for (std::size_t i = 0; i < raw.size(); ++i) text += raw[i] + "," + std::to_string(i) + "\n";
    const auto ds = parse(text, opts);
    ASSERT_EQ(ds.size(), raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) EXPECT_EQ(ds.class_names[static_cast<std::size_t>(ds.labels[i])], raw[i]);
}

TEST(LoadCsv, LabelColumnByIndexAndNoHeader) {
    CsvOptions opts;
    opts.header = false;
    opts.label_column = std::size_t{2};
    const auto ds = parse("1.5,2,0\n-3,4e1,1\n", opts);
    EXPECT_EQ(ds.size(), 2u);
    EXPECT_DOUBLE_EQ(ds.features(1, 1), 40.0);
    EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"x0", "x1"}));
}

TEST(LoadCsv, EmptyFileHasNoDataRows) {
    try {
        parse("");
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_STREQ(e.what(), "no data rows");
    }
    EXPECT_THROW(parse("a,b,c\n"), DataError);
}

TEST(LoadCsv, Errors) {
    CsvOptions opts;
    opts.label_column = std::string("y");
    EXPECT_THROW(parse("a,y\n1,0\n2\n", opts), DataError);         // ragged
    EXPECT_THROW(parse("a,y\n1,0\nx,1\n", opts), DataError);       // bad numeric cell
    EXPECT_THROW(parse("a,y\n1,0\n2,0\n", opts), DataError);       // single class
    EXPECT_THROW(parse("a,b\n1,0\n2,1\n", opts), DataError);       // missing label column
    EXPECT_THROW(load_csv("/nonexistent/file.csv", opts), DataError);
}

TEST(LoadCsv, CategoricalColumns) {
    const std::string text = "color,size,y\nred,1,p\nblue,2,q\nred,3,p\ngreen,4,q\n";
    CsvOptions opts;
    opts.label_column = std::string("y");
    const auto ordinal = parse(text, opts);
    EXPECT_EQ(ordinal.dim(), 2u);
    EXPECT_DOUBLE_EQ(ordinal.features(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(ordinal.features(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(ordinal.features(3, 0), 2.0);

    opts.categorical = CategoricalMode::onehot;
    const auto onehot = parse(text, opts);
    EXPECT_EQ(onehot.dim(), 4u);
    EXPECT_EQ(onehot.feature_names[0], "color=red");
    EXPECT_DOUBLE_EQ(onehot.features(3, 2), 1.0);
    EXPECT_DOUBLE_EQ(onehot.features(3, 0), 0.0);
    EXPECT_DOUBLE_EQ(onehot.features(3, 3), 4.0);
}

TEST(LoadCsv, ReadsFileFromDisk) {
    const auto path = std::filesystem::temp_directory_path() / "ctal_test_small.csv";
    {
        std::ofstream f(path);
        f << "a,b,label\n0,0,x\n1,1,y\n";
    }
    CsvOptions opts;
    opts.label_column = std::string("label");
    const auto ds = load_csv(path.string(), opts);
    EXPECT_EQ(ds.name, "ctal_test_small");
    EXPECT_EQ(ds.n_classes, 2);
    std::filesystem::remove(path);
}

TEST(TrainTestSplit, SizesAndRounding) {
    const auto s = train_test_split(10, 0.2, 1);
    EXPECT_EQ(s.test.size(), 2u);
    EXPECT_EQ(s.train.size(), 8u);
    // 768 * 0.2 = 153.6, rounded half up.
    EXPECT_EQ(train_test_split(768, 0.2, 3).test.size(), 154u);
    EXPECT_EQ(test_size(5, 0.5), 3u);  // 2.5 -> 3
    EXPECT_EQ(test_size(1372, 0.2), 274u);
}

TEST(TrainTestSplit, PartitionForAllSeeds) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const std::size_t n = 2 + seed % 37;
        const auto s = train_test_split(n, 0.3, seed);
        std::set<Index> all(s.train.begin(), s.train.end());
        for (Index t : s.test) EXPECT_TRUE(all.insert(t).second) << "overlap at seed " << seed;
        EXPECT_EQ(all.size(), n);
        EXPECT_EQ(*all.rbegin(), n - 1);
        EXPECT_FALSE(s.train.empty());
    }
}

TEST(TrainTestSplit, DeterministicAndSeedSensitive) {
    const auto a = train_test_split(500, 0.2, 42);
    const auto b = train_test_split(500, 0.2, 42);
    const auto c = train_test_split(500, 0.2, 43);
    EXPECT_EQ(a.test, b.test);
    EXPECT_NE(a.test, c.test);
}

TEST(TrainTestSplit, RejectsBadFraction) {
    EXPECT_THROW(train_test_split(10, 0.0, 1), std::invalid_argument);
    EXPECT_THROW(train_test_split(10, 1.0, 1), std::invalid_argument);
    EXPECT_THROW(train_test_split(10, -0.1, 1), std::invalid_argument);
    EXPECT_THROW(train_test_split(1, 0.5, 1), std::invalid_argument);
}

TEST(Standardizer, SymmetricColumn) {
    const Matrix m = Matrix::from_rows({{2}, {4}, {6}});
    const std::vector<Index> rows = {0, 1, 2};
    const auto z = Standardizer::fit(m, rows).apply(m);
    EXPECT_DOUBLE_EQ(z(1, 0), 0.0);
    EXPECT_DOUBLE_EQ(z(0, 0), -z(2, 0));
    EXPECT_GT(z(2, 0), 0.0);
}

TEST(Standardizer, ZeroVarianceMapsToZero) {
    const Matrix m = Matrix::from_rows({{5, 1}, {5, 2}, {5, 3}});
    const std::vector<Index> rows = {0, 1, 2};
    const auto z = Standardizer::fit(m, rows).apply(m);
    for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(z(r, 0), 0.0);
}

TEST(Standardizer, HeldOutMidpointMapsToZero) {
    const Matrix train = Matrix::from_rows({{0}, {10}, {5}});
    const std::vector<Index> rows = {0, 1};
    const auto s = Standardizer::fit(train, rows);
    EXPECT_DOUBLE_EQ(s.apply(train)(2, 0), 0.0);
    EXPECT_DOUBLE_EQ(s.inverse(0, s.transform(0, 7.25)), 7.25);
}

TEST(Standardizer, UsesOnlyPoolRows) {
    const Matrix m = Matrix::from_rows({{1}, {3}, {1000}});
    const std::vector<Index> pool = {0, 1};
    const auto s = Standardizer::fit(m, pool);
    EXPECT_DOUBLE_EQ(s.mean()[0], 2.0);
    EXPECT_DOUBLE_EQ(s.scale()[0], 1.0);
}

TEST(Standardizer, PoolColumnMeansAreZero) {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd(50.0, 20.0);
    Matrix m(300, 4);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = nd(gen) * static_cast<double>(c + 1);
    std::vector<Index> pool;
    for (Index i = 0; i < 300; i += 2) pool.push_back(i);
    const auto z = Standardizer::fit(m, pool).apply(m);
    for (std::size_t c = 0; c < m.cols(); ++c) {
        double sum = 0, sq = 0;
        for (Index i : pool) {
            sum += z(i, c);
            sq += z(i, c) * z(i, c);
        }
        EXPECT_NEAR(sum / static_cast<double>(pool.size()), 0.0, 1e-9);
        EXPECT_NEAR(sq / static_cast<double>(pool.size()), 1.0, 1e-9);
    }
}

TEST(PoolState, LabelMovesIndices) {
    PoolState pool({5, 1, 3, 9});
    EXPECT_EQ(pool.unlabeled(), (std::vector<Index>{1, 3, 5, 9}));
    const std::vector<Index> first = {9, 3};
    pool.label(first);
    EXPECT_EQ(pool.labeled(), (std::vector<Index>{3, 9}));
    EXPECT_EQ(pool.unlabeled(), (std::vector<Index>{1, 5}));
    const std::vector<Index> again = {3};
    EXPECT_THROW(pool.label(again), std::invalid_argument);
    const std::vector<Index> outside = {4};
    EXPECT_THROW(pool.label(outside), std::invalid_argument);
    const std::vector<Index> dup = {1, 1};
    EXPECT_THROW(pool.label(dup), std::invalid_argument);
}

TEST(PoolState, PartitionInvariantUnderRandomLabeling) {
    std::vector<Index> ids(100);
    std::iota(ids.begin(), ids.end(), Index{0});
    PoolState pool(ids);
    Rng rng(11);
    std::size_t previous = 0;
    while (!pool.unlabeled().empty()) {
        const auto batch = sample_without_replacement(pool.unlabeled(), 1 + uniform_index(rng, 9), rng);
        const auto before = pool.labeled();
        pool.label(batch);
        EXPECT_TRUE(std::includes(pool.labeled().begin(), pool.labeled().end(), before.begin(), before.end()));
        EXPECT_GT(pool.labeled().size(), previous);
        previous = pool.labeled().size();
        std::vector<Index> both;
        std::set_intersection(pool.labeled().begin(), pool.labeled().end(), pool.unlabeled().begin(),
                              pool.unlabeled().end(), std::back_inserter(both));
        EXPECT_TRUE(both.empty());
        EXPECT_EQ(pool.labeled().size() + pool.unlabeled().size(), 100u);
    }
}
