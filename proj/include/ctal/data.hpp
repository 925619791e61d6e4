#pragma once

// Dataset ingestion, train/test splitting, standardization and pool
// bookkeeping.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "ctal/rng.hpp"

namespace ctal {

using Index = std::size_t;
using ClassId = int;

/// Raised for malformed input data (unreadable file, ragged rows, bad cells).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }

    static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) return {};
        Matrix m(rows.size(), rows.front().size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != m.cols_) throw std::invalid_argument("Matrix::from_rows: ragged rows");
            std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
        }
        return m;
    }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) noexcept {
    return std::sqrt(squared_distance(a, b));
}

struct Dataset {
    Matrix features;
    std::vector<ClassId> labels;
    int n_classes = 0;
    std::vector<std::string> feature_names;
    /// class_names[id] is the original label string.
    std::vector<std::string> class_names;
    std::string name;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return features.cols(); }

    /// Throws std::invalid_argument when an invariant does not hold.
    void validate() const {
        if (labels.empty() || features.cols() == 0) throw std::invalid_argument("dataset must have N >= 1 and D >= 1");
        if (features.rows() != labels.size()) throw std::invalid_argument("feature/label row count mismatch");
        if (n_classes < 2) throw std::invalid_argument("dataset needs at least two classes");
        std::vector<bool> seen(static_cast<std::size_t>(n_classes), false);
        for (ClassId y : labels) {
            if (y < 0 || y >= n_classes) throw std::invalid_argument("label out of range");
            seen[static_cast<std::size_t>(y)] = true;
        }
        if (std::find(seen.begin(), seen.end(), false) != seen.end())
            throw std::invalid_argument("every class id must occur at least once");
        for (std::size_t r = 0; r < features.rows(); ++r)
            for (double v : features.row(r))
                if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
    }
};

enum class CategoricalMode { ordinal, onehot };

struct CsvOptions {
    /// Column name (requires a header) or 0-based column index.
    std::variant<std::string, std::size_t> label_column = std::size_t{0};
    CategoricalMode categorical = CategoricalMode::ordinal;
    bool header = true;
    char separator = ',';
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_line(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline bool parse_double(std::string_view s, double& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

/// Parses CSV text. Labels are re-encoded to 0..c-1 in order of first
/// appearance. A feature column is categorical when its first data cell is
/// not numeric; a numeric column with a later unparsable cell is an error.
inline Dataset parse_csv(std::istream& in, const CsvOptions& opts, std::string name = {}) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_line(line, opts.separator);
        if (opts.header && header.empty() && rows.empty()) {
            header = std::move(cells);
            continue;
        }
        const std::size_t expected = !rows.empty() ? rows.front().size() : header.empty() ? cells.size() : header.size();
        if (cells.size() != expected)
            throw DataError("ragged row at line " + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                            " fields, got " + std::to_string(cells.size()));
        rows.push_back(std::move(cells));
    }
    if (in.bad()) throw DataError("I/O error while reading " + name);
    if (rows.empty()) throw DataError("no data rows");

    const std::size_t arity = rows.front().size();
    std::size_t label_col = 0;
    if (const auto* col_name = std::get_if<std::string>(&opts.label_column)) {
        const auto it = std::find(header.begin(), header.end(), *col_name);
        if (it == header.end()) {
            // Accept a numeric string as an index when no such header exists.
            double v;
            if (!detail::parse_double(*col_name, v) || v < 0 || v != std::floor(v))
                throw DataError("label column '" + *col_name + "' not found in header");
            label_col = static_cast<std::size_t>(v);
        } else {
            label_col = static_cast<std::size_t>(it - header.begin());
        }
    } else {
        label_col = std::get<std::size_t>(opts.label_column);
    }
    if (label_col >= arity) throw DataError("label column index " + std::to_string(label_col) + " out of range");
    if (arity < 2) throw DataError("need at least one feature column besides the label");

    Dataset ds;
    ds.name = std::move(name);

    std::unordered_map<std::string, ClassId> class_ids;
    ds.labels.reserve(rows.size());
    for (const auto& r : rows) {
        auto [it, inserted] = class_ids.try_emplace(r[label_col], static_cast<ClassId>(ds.class_names.size()));
        if (inserted) ds.class_names.push_back(r[label_col]);
        ds.labels.push_back(it->second);
    }
    ds.n_classes = static_cast<int>(ds.class_names.size());
    if (ds.n_classes < 2) throw DataError("single-class dataset: need at least two distinct labels");

    // Encode feature columns.
    std::vector<std::vector<double>> columns;
    for (std::size_t c = 0; c < arity; ++c) {
        if (c == label_col) continue;
        const std::string base = header.empty() ? "x" + std::to_string(c) : header[c];
        double probe;
        if (detail::parse_double(rows.front()[c], probe)) {
            std::vector<double> col(rows.size());
            for (std::size_t r = 0; r < rows.size(); ++r)
                if (!detail::parse_double(rows[r][c], col[r]))
                    throw DataError("non-parsable numeric cell '" + rows[r][c] + "' in column '" + base + "', data row " +
                                    std::to_string(r + 1));
            columns.push_back(std::move(col));
            ds.feature_names.push_back(base);
            continue;
        }
        std::unordered_map<std::string, int> codes;
        std::vector<std::string> levels;
        std::vector<int> coded(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            auto [it, inserted] = codes.try_emplace(rows[r][c], static_cast<int>(levels.size()));
            if (inserted) levels.push_back(rows[r][c]);
            coded[r] = it->second;
        }
        if (opts.categorical == CategoricalMode::ordinal) {
            std::vector<double> col(coded.begin(), coded.end());
            columns.push_back(std::move(col));
            ds.feature_names.push_back(base);
        } else {
            for (std::size_t level = 0; level < levels.size(); ++level) {
                std::vector<double> col(rows.size());
                for (std::size_t r = 0; r < rows.size(); ++r) col[r] = coded[r] == static_cast<int>(level) ? 1.0 : 0.0;
                columns.push_back(std::move(col));
                ds.feature_names.push_back(base + "=" + levels[level]);
            }
        }
    }

    ds.features = Matrix(rows.size(), columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c)
        for (std::size_t r = 0; r < rows.size(); ++r) ds.features(r, c) = columns[c][r];
    return ds;
}

inline Dataset load_csv(const std::string& path, const CsvOptions& opts) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::string name = path;
    if (const auto slash = name.find_last_of('/'); slash != std::string::npos) name = name.substr(slash + 1);
    if (const auto dot = name.find_last_of('.'); dot != std::string::npos && dot > 0) name = name.substr(0, dot);
    return parse_csv(in, opts, name);
}

struct Split {
    std::vector<Index> train;
    std::vector<Index> test;
};

/// Number of test rows: round-half-up of n * fraction.
inline std::size_t test_size(std::size_t n, double fraction) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 0.5));
}

/// Uniform split without replacement. Both sides are returned sorted.
inline Split train_test_split(std::size_t n, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw std::invalid_argument("test_fraction must lie in (0, 1)");
    if (n < 2) throw std::invalid_argument("train_test_split needs at least two rows");
    const std::size_t n_test = test_size(n, test_fraction);
    if (n_test >= n) throw std::invalid_argument("test fraction leaves an empty training side");

    std::vector<Index> all(n);
    std::iota(all.begin(), all.end(), Index{0});
    Rng rng(seed);
    auto test = sample_without_replacement(all, n_test, rng);
    std::sort(test.begin(), test.end());

    Split s;
    s.train.reserve(n - n_test);
    std::size_t t = 0;
    for (Index i = 0; i < n; ++i) {
        if (t < test.size() && test[t] == i)
            ++t;
        else
            s.train.push_back(i);
    }
    s.test = std::move(test);
    return s;
}

/// Per-feature z-score. Zero-variance features map to 0.
class Standardizer {
public:
    Standardizer() = default;

    static Standardizer fit(const Matrix& features, std::span<const Index> rows) {
        if (rows.empty()) throw std::invalid_argument("Standardizer::fit needs at least one row");
        Standardizer s;
        const std::size_t d = features.cols();
        s.mean_.assign(d, 0.0);
        s.scale_.assign(d, 0.0);
        for (Index r : rows)
            for (std::size_t c = 0; c < d; ++c) s.mean_[c] += features(r, c);
        for (double& m : s.mean_) m /= static_cast<double>(rows.size());
        for (Index r : rows)
            for (std::size_t c = 0; c < d; ++c) {
                const double dev = features(r, c) - s.mean_[c];
                s.scale_[c] += dev * dev;
            }
        // Population standard deviation over the pool.
        for (double& v : s.scale_) v = std::sqrt(v / static_cast<double>(rows.size()));
        return s;
    }

    Matrix apply(const Matrix& features) const {
        if (features.cols() != mean_.size()) throw std::invalid_argument("Standardizer::apply: dimension mismatch");
        Matrix out(features.rows(), features.cols());
        for (std::size_t r = 0; r < features.rows(); ++r)
            for (std::size_t c = 0; c < features.cols(); ++c) out(r, c) = transform(c, features(r, c));
        return out;
    }

    double transform(std::size_t feature, double value) const {
        return scale_[feature] > 0.0 ? (value - mean_[feature]) / scale_[feature] : 0.0;
    }

    double inverse(std::size_t feature, double z) const { return mean_[feature] + z * scale_[feature]; }

    const std::vector<double>& mean() const noexcept { return mean_; }
    const std::vector<double>& scale() const noexcept { return scale_; }

private:
    std::vector<double> mean_;
    std::vector<double> scale_;
};

/// Labeled/unlabeled partition of the training pool. Indices are dataset row
/// ids; all three lists are kept sorted.
class PoolState {
public:
    PoolState() = default;

    explicit PoolState(std::vector<Index> pool) : pool_(std::move(pool)), unlabeled_(pool_) {
        std::sort(pool_.begin(), pool_.end());
        if (std::adjacent_find(pool_.begin(), pool_.end()) != pool_.end())
            throw std::invalid_argument("PoolState: duplicate pool index");
        unlabeled_ = pool_;
    }

    const std::vector<Index>& pool() const noexcept { return pool_; }
    const std::vector<Index>& labeled() const noexcept { return labeled_; }
    const std::vector<Index>& unlabeled() const noexcept { return unlabeled_; }

    bool is_labeled(Index i) const { return std::binary_search(labeled_.begin(), labeled_.end(), i); }
    bool is_unlabeled(Index i) const { return std::binary_search(unlabeled_.begin(), unlabeled_.end(), i); }

    /// Moves the given unlabeled indices to the labeled set.
    void label(std::span<const Index> picked) {
        std::vector<Index> sorted(picked.begin(), picked.end());
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("PoolState::label: duplicate index in batch");
        for (Index i : sorted)
            if (!is_unlabeled(i)) throw std::invalid_argument("PoolState::label: index " + std::to_string(i) + " is not unlabeled");

        std::vector<Index> rest;
        rest.reserve(unlabeled_.size() - sorted.size());
        std::set_difference(unlabeled_.begin(), unlabeled_.end(), sorted.begin(), sorted.end(), std::back_inserter(rest));
        unlabeled_ = std::move(rest);

        std::vector<Index> merged;
        merged.reserve(labeled_.size() + sorted.size());
        std::merge(labeled_.begin(), labeled_.end(), sorted.begin(), sorted.end(), std::back_inserter(merged));
        labeled_ = std::move(merged);
    }

private:
    std::vector<Index> pool_;
    std::vector<Index> labeled_;
    std::vector<Index> unlabeled_;
};

}  // namespace ctal
