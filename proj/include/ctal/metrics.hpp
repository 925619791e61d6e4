#pragma once

// Evaluation and statistics: entropy, balanced accuracy, Wilcoxon rank-sum.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace ctal {

/// Shannon entropy in bits. Zero-probability terms contribute nothing.
inline double shannon_entropy(std::span<const double> p) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("shannon_entropy: negative or non-finite probability");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("shannon_entropy: probabilities must sum to 1");
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log2(v);
    // -1 * log2(1) is -0.0; report a clean zero.
    return h > 0.0 ? h : 0.0;
}

/// Entropy (bits) of the empirical distribution given by integer counts.
/// An all-zero count vector has entropy 0.
template <class Count>
double entropy_of_counts(std::span<const Count> counts) {
    double total = 0.0;
    for (Count c : counts) total += static_cast<double>(c);
    if (total <= 0.0) return 0.0;
    double h = 0.0;
    for (Count c : counts) {
        if (c <= 0) continue;
        const double p = static_cast<double>(c) / total;
        h -= p * std::log2(p);
    }
    return h > 0.0 ? h : 0.0;
}

template <class Count>
double entropy_of_counts(const std::vector<Count>& counts) {
    return entropy_of_counts(std::span<const Count>(counts));
}

/// c x c counts, rows = true class, columns = predicted class.
class ConfusionMatrix {
public:
    ConfusionMatrix(std::span<const int> y_true, std::span<const int> y_pred, int n_classes)
        : n_(static_cast<std::size_t>(n_classes)), counts_(n_ * n_, 0) {
        if (y_true.size() != y_pred.size()) throw std::invalid_argument("confusion matrix: length mismatch");
        for (std::size_t i = 0; i < y_true.size(); ++i) {
            if (y_true[i] < 0 || y_true[i] >= n_classes || y_pred[i] < 0 || y_pred[i] >= n_classes)
                throw std::invalid_argument("confusion matrix: class id out of range");
            ++counts_[static_cast<std::size_t>(y_true[i]) * n_ + static_cast<std::size_t>(y_pred[i])];
        }
    }

    std::size_t n_classes() const noexcept { return n_; }
    std::size_t operator()(std::size_t truth, std::size_t pred) const { return counts_[truth * n_ + pred]; }

    std::size_t row_total(std::size_t truth) const {
        std::size_t s = 0;
        for (std::size_t p = 0; p < n_; ++p) s += (*this)(truth, p);
        return s;
    }

    std::size_t total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }

private:
    std::size_t n_;
    std::vector<std::size_t> counts_;
};

/// Macro-averaged recall over the classes present in y_true. For two classes
/// this is (TPR + TNR) / 2.
inline double balanced_accuracy(std::span<const int> y_true, std::span<const int> y_pred, int n_classes) {
    if (y_true.empty()) throw std::invalid_argument("balanced_accuracy: empty input");
    const ConfusionMatrix cm(y_true, y_pred, n_classes);
    double sum = 0.0;
    int present = 0;
    for (std::size_t c = 0; c < cm.n_classes(); ++c) {
        const std::size_t support = cm.row_total(c);
        if (support == 0) continue;
        sum += static_cast<double>(cm(c, c)) / static_cast<double>(support);
        ++present;
    }
    if (present == 0) throw std::invalid_argument("balanced_accuracy: y_true contains no class");
    return sum / present;
}

inline double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Sample standard deviation (ddof = 1); 0 for fewer than two values.
inline double stddev(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

struct RankSumResult {
    /// Sum of the (mid-)ranks of sample a in the pooled ranking.
    double rank_sum = 0.0;
    /// Mann-Whitney U of sample a: rank_sum - n_a (n_a + 1) / 2.
    double statistic = 0.0;
    double p_value = 1.0;
    bool exact = false;
    bool significant = false;
};

namespace detail {

/// Mid-ranks (1-based) of the pooled values, plus the tie groups' sizes.
inline std::vector<double> mid_ranks(std::span<const double> pooled, std::vector<std::size_t>* tie_sizes = nullptr) {
    std::vector<std::size_t> order(pooled.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
    std::vector<double> ranks(pooled.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        if (tie_sizes) tie_sizes->push_back(j - i + 1);
        i = j + 1;
    }
    return ranks;
}

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace detail

/// Exact two-sided rank-sum p-value by enumerating all C(n, n_a) ways of
/// assigning the pooled mid-ranks to sample a. Works on doubled ranks so ties
/// stay integral. p = min(1, 2 * min(P[W <= w], P[W >= w])).
inline double rank_sum_exact_p(std::span<const double> a, std::span<const double> b) {
    // The two-sided p-value is symmetric in (a, b); enumerate the smaller side.
    if (b.size() < a.size()) std::swap(a, b);
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = detail::mid_ranks(pooled);
    const std::size_t n = pooled.size();
    const std::size_t m = a.size();

    std::vector<long> doubled(n);
    long total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        doubled[i] = std::lround(2.0 * ranks[i]);
        total += doubled[i];
    }
    long observed = 0;
    for (std::size_t i = 0; i < m; ++i) observed += doubled[i];

    // ways[j][s]: number of j-subsets with doubled rank sum s, as probabilities
    // scaled incrementally to avoid overflow.
    const std::size_t max_sum = static_cast<std::size_t>(total);
    std::vector<std::vector<double>> ways(m + 1, std::vector<double>(max_sum + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<std::size_t>(doubled[i]);
        for (std::size_t j = std::min(m, i + 1); j >= 1; --j)
            for (std::size_t s = max_sum; s >= r; --s) {
                ways[j][s] += ways[j - 1][s - r];
                if (s == r) break;
            }
    }
    double all = 0.0, le = 0.0, ge = 0.0;
    for (std::size_t s = 0; s <= max_sum; ++s) {
        const double w = ways[m][s];
        all += w;
        if (static_cast<long>(s) <= observed) le += w;
        if (static_cast<long>(s) >= observed) ge += w;
    }
    return std::min(1.0, 2.0 * std::min(le, ge) / all);
}

/// Normal approximation with tie-corrected variance and continuity correction.
inline double rank_sum_normal_p(std::span<const double> a, std::span<const double> b) {
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::vector<std::size_t> ties;
    const auto ranks = detail::mid_ranks(pooled, &ties);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double n = na + nb;
    double w = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) w += ranks[i];
    const double u = w - na * (na + 1.0) / 2.0;
    const double mu = na * nb / 2.0;
    double tie_term = 0.0;
    for (std::size_t t : ties) {
        const double td = static_cast<double>(t);
        tie_term += td * td * td - td;
    }
    const double var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (var <= 0.0) return 1.0;
    const double dev = std::max(0.0, std::abs(u - mu) - 0.5);
    return std::clamp(2.0 * detail::normal_sf(dev / std::sqrt(var)), 0.0, 1.0);
}

/// Size per side at or above which the normal approximation is used.
inline constexpr std::size_t kRankSumExactBelow = 8;

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) test at alpha = 0.05.
inline RankSumResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b, double alpha = 0.05) {
    if (a.empty() || b.empty()) throw std::invalid_argument("wilcoxon_rank_sum: empty sample");
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = detail::mid_ranks(pooled);

    RankSumResult r;
    for (std::size_t i = 0; i < a.size(); ++i) r.rank_sum += ranks[i];
    const double na = static_cast<double>(a.size());
    r.statistic = r.rank_sum - na * (na + 1.0) / 2.0;
    r.exact = a.size() < kRankSumExactBelow || b.size() < kRankSumExactBelow;
    r.p_value = r.exact ? rank_sum_exact_p(a, b) : rank_sum_normal_p(a, b);
    r.significant = r.p_value < alpha;
    return r;
}

}  // namespace ctal
