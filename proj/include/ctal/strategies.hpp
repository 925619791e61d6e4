#pragma once

// Query strategies. Each one takes a pool snapshot and a batch size and
// returns distinct unlabeled pool indices.
//
// CT-AL fits a classification tree on the labeled set, splits the batch
// between pure and impure leaves (impure leaves get `impure_multiplier` times
// more per leaf), spreads each group's share over its leaves in proportion to
// sqrt(density * E_k), and then draws inside each leaf either uniformly or by
// the diversity/representativeness criterion.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ctal/cluster.hpp"
#include "ctal/data.hpp"
#include "ctal/metrics.hpp"
#include "ctal/rng.hpp"
#include "ctal/tree.hpp"

namespace ctal {

enum class StrategyKind { rs, ctal_rs, ctal_divrep, irdm, qbc };

inline constexpr std::array<StrategyKind, 5> kAllStrategies = {StrategyKind::rs, StrategyKind::irdm, StrategyKind::qbc,
                                                               StrategyKind::ctal_rs, StrategyKind::ctal_divrep};

/// Stable CLI identifier.
inline constexpr std::string_view strategy_name(StrategyKind k) noexcept {
    switch (k) {
        case StrategyKind::rs: return "rs";
        case StrategyKind::ctal_rs: return "ctal-rs";
        case StrategyKind::ctal_divrep: return "ctal-divrep";
        case StrategyKind::irdm: return "irdm";
        case StrategyKind::qbc: return "qbc";
    }
    return "?";
}

inline std::string strategy_names_list() {
    std::string out;
    for (auto k : kAllStrategies) {
        if (!out.empty()) out += ", ";
        out += strategy_name(k);
    }
    return out;
}

inline StrategyKind parse_strategy(std::string_view name) {
    for (auto k : kAllStrategies)
        if (strategy_name(k) == name) return k;
    throw std::invalid_argument("unknown strategy '" + std::string(name) + "'; valid identifiers: " + strategy_names_list());
}

/// Whether Eq.-6-style proportional allocation runs inside each purity group
/// (default) or once over all leaves.
enum class AllocationScope { per_group, global };

struct StrategyConfig {
    StrategyKind kind = StrategyKind::rs;
    TreeParams tree_params{};  ///< selection / committee trees; min_samples_leaf 10
    std::size_t qbc_committee_size = 10;
    std::size_t divrep_max_rounds = 10;
    double impure_multiplier = 3.0;
    AllocationScope allocation_scope = AllocationScope::per_group;

    void validate() const {
        if (kind == StrategyKind::qbc && qbc_committee_size < 2) throw std::invalid_argument("QBC committee size must be >= 2");
        if (tree_params.min_samples_leaf < 1) throw std::invalid_argument("tree min_samples_leaf must be >= 1");
        if (!(impure_multiplier > 0.0)) throw std::invalid_argument("impure multiplier must be positive");
    }
};

/// Raised when a model-based strategy cannot fit its model; callers fall back
/// to random sampling for that batch.
class UnfittableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BudgetAllocation {
    std::vector<std::size_t> per_leaf;  ///< indexed by leaf id
    std::size_t n_pure_group = 0;
    std::size_t n_impure_group = 0;

    std::size_t total() const { return std::accumulate(per_leaf.begin(), per_leaf.end(), std::size_t{0}); }
};

/// min(k, |unlabeled|) unlabeled indices drawn uniformly without replacement.
inline std::vector<Index> random_select(const PoolState& pool, std::size_t k, std::uint64_t seed) {
    Rng rng(seed);
    return sample_without_replacement(pool.unlabeled(), k, rng);
}

namespace detail {

inline constexpr double kAllocTol = 1e-9;

/// sqrt(pi_k * E_k); zero for leaves without unlabeled samples.
inline double allocation_weight(const LeafStats& s) {
    return s.density > 0.0 && !s.unlabeled.empty() ? std::sqrt(s.density * s.weight) : 0.0;
}

/// floor() that treats values within kAllocTol of the next integer as that
/// integer, so rescaling all weights cannot move a quota across a boundary.
inline std::size_t snapped_floor(double q) {
    const double up = std::ceil(q);
    return static_cast<std::size_t>(up - q <= kAllocTol ? up : std::floor(q));
}

/// Largest-remainder apportionment of `budget` over `leaves` proportional to
/// `w`. Returns the units that could not be placed (all of them if every
/// weight is zero).
inline std::size_t apportion(std::size_t budget, std::span<const std::size_t> leaves, std::span<const double> w,
                             std::vector<std::size_t>& out) {
    double sum = 0.0;
    for (std::size_t k : leaves) sum += w[k];
    if (budget == 0) return 0;
    if (leaves.empty() || !(sum > 0.0)) return budget;

    struct Rem {
        std::size_t leaf;
        double rem;
    };
    std::vector<Rem> rems;
    std::size_t given = 0;
    for (std::size_t k : leaves) {
        const double q = static_cast<double>(budget) * w[k] / sum;
        const std::size_t base = snapped_floor(q);
        out[k] += base;
        given += base;
        if (w[k] > 0.0) rems.push_back({k, std::max(0.0, q - static_cast<double>(base))});
    }
    // Remainders are compared on a kAllocTol grid; near-equal ones fall
    // through to weight, then leaf id.
    for (Rem& r : rems) r.rem = std::round(r.rem / kAllocTol);
    std::sort(rems.begin(), rems.end(), [&](const Rem& a, const Rem& b) {
        if (a.rem != b.rem) return a.rem > b.rem;
        if (w[a.leaf] != w[b.leaf]) return w[a.leaf] > w[b.leaf];
        return a.leaf < b.leaf;
    });
    for (std::size_t i = 0; given < budget && i < rems.size(); ++i, ++given) ++out[rems[i].leaf];
    return budget - std::min(budget, given);
}

/// Hands out up to `surplus` units one at a time, cycling over `leaves` in
/// descending weight order and skipping full leaves. Returns what is left.
inline std::size_t redistribute(std::size_t surplus, std::span<const std::size_t> leaves, std::span<const double> w,
                                std::span<const std::size_t> cap, std::vector<std::size_t>& out) {
    std::vector<std::size_t> order(leaves.begin(), leaves.end());
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (w[a] != w[b]) return w[a] > w[b];
        return a < b;
    });
    while (surplus > 0) {
        bool placed = false;
        for (std::size_t k : order) {
            if (surplus == 0) break;
            if (out[k] < cap[k]) {
                ++out[k];
                --surplus;
                placed = true;
            }
        }
        if (!placed) break;
    }
    return surplus;
}

}  // namespace detail

/// Splits `n_act` labels over the leaves. The pure group gets
/// n_act / (1 + m * max(1, #impure) / max(1, #pure)) (rounded half up), the
/// impure group the rest; a group with no leaves cedes its share. Inside a
/// group, leaf k gets a share proportional to sqrt(pi_k E_k). Shares are
/// clamped to each leaf's unlabeled count and the overflow re-offered, first
/// within the same group, then to the other group, in descending weight order.
inline BudgetAllocation allocate_budget(std::span<const LeafStats> leaves, std::size_t n_act,
                                        double impure_multiplier = 3.0,
                                        AllocationScope scope = AllocationScope::per_group) {
    const std::size_t n_leaves = leaves.size();
    BudgetAllocation alloc;
    alloc.per_leaf.assign(n_leaves, 0);

    std::vector<double> w(n_leaves);
    std::vector<std::size_t> cap(n_leaves);
    std::vector<std::size_t> pure, impure, all(n_leaves);
    for (std::size_t k = 0; k < n_leaves; ++k) {
        w[k] = detail::allocation_weight(leaves[k]);
        cap[k] = leaves[k].unlabeled.size();
        (leaves[k].is_pure ? pure : impure).push_back(k);
        all[k] = k;
    }

    if (impure.empty()) {
        alloc.n_pure_group = n_act;
    } else if (pure.empty()) {
        alloc.n_pure_group = 0;
    } else {
        const double ratio = static_cast<double>(std::max<std::size_t>(1, impure.size())) /
                             static_cast<double>(std::max<std::size_t>(1, pure.size()));
        const double n_pure = static_cast<double>(n_act) / (1.0 + impure_multiplier * ratio);
        alloc.n_pure_group = std::min(n_act, static_cast<std::size_t>(std::floor(n_pure + 0.5 + detail::kAllocTol)));
    }
    alloc.n_impure_group = n_act - alloc.n_pure_group;
    if (n_leaves == 0) return alloc;

    std::size_t pure_left = 0, impure_left = 0;
    if (scope == AllocationScope::global) {
        impure_left = detail::apportion(n_act, all, w, alloc.per_leaf);
    } else {
        pure_left = detail::apportion(alloc.n_pure_group, pure, w, alloc.per_leaf);
        impure_left = detail::apportion(alloc.n_impure_group, impure, w, alloc.per_leaf);
    }

    // Clamp to capacity, remembering which group the overflow came from.
    for (std::size_t k = 0; k < n_leaves; ++k) {
        if (alloc.per_leaf[k] <= cap[k]) continue;
        const std::size_t over = alloc.per_leaf[k] - cap[k];
        alloc.per_leaf[k] = cap[k];
        (scope == AllocationScope::per_group && leaves[k].is_pure ? pure_left : impure_left) += over;
    }
    if (scope == AllocationScope::global) {
        detail::redistribute(impure_left, all, w, cap, alloc.per_leaf);
        return alloc;
    }
    const std::size_t pure_rest = detail::redistribute(pure_left, pure, w, cap, alloc.per_leaf);
    const std::size_t impure_rest = detail::redistribute(impure_left, impure, w, cap, alloc.per_leaf);
    // Units a group could not absorb go to the other group.
    detail::redistribute(impure_rest, pure, w, cap, alloc.per_leaf);
    detail::redistribute(pure_rest, impure, w, cap, alloc.per_leaf);
    return alloc;
}

/// Feature views for strategies: trees split on raw values, distances use
/// the standardized copy.
struct FeatureViews {
    const Matrix& raw;
    const Matrix& scaled;
};

enum class InLeafSampling { random, divrep };

struct CtalSelection {
    std::vector<Index> selected;
    std::vector<LeafStats> leaves;
    BudgetAllocation allocation;
    /// div-rep only: the clusters, aligned with `selected`.
    std::vector<std::vector<Index>> clusters;
    std::size_t divrep_rounds = 0;
    bool divrep_converged = false;
};

/// Fits the selection tree on pool.labeled() and reports its leaf statistics
/// with the allocation for `n_act`.
inline CtalSelection ctal_plan(const FeatureViews& x, std::span<const ClassId> labels, int n_classes,
                               const PoolState& pool, std::size_t n_act, const StrategyConfig& cfg) {
    if (pool.labeled().size() < cfg.tree_params.min_samples_leaf || pool.labeled().empty())
        throw UnfittableError("labeled set smaller than the selection tree's min_samples_leaf");
    const auto tree = fit_tree(x.raw, labels, n_classes, pool.labeled(), cfg.tree_params);
    CtalSelection plan;
    plan.leaves = compute_leaf_stats(tree, x.raw, labels, pool);
    plan.allocation = allocate_budget(plan.leaves, n_act, cfg.impure_multiplier, cfg.allocation_scope);
    for (auto& leaf : plan.leaves) leaf.allocation = plan.allocation.per_leaf[leaf.leaf_id];
    return plan;
}

/// CT-AL batch query. Labels are read only at pool.labeled().
inline CtalSelection ctal_select(const FeatureViews& x, std::span<const ClassId> labels, int n_classes,
                                 const PoolState& pool, std::size_t n_act, InLeafSampling mode,
                                 const StrategyConfig& cfg, std::uint64_t seed) {
    CtalSelection plan = ctal_plan(x, labels, n_classes, pool, n_act, cfg);
    if (mode == InLeafSampling::random) {
        for (const auto& leaf : plan.leaves) {
            if (leaf.allocation == 0) continue;
            Rng rng(derive_seed(seed, leaf.leaf_id));
            auto picked = sample_without_replacement(leaf.unlabeled, leaf.allocation, rng);
            plan.selected.insert(plan.selected.end(), picked.begin(), picked.end());
        }
        return plan;
    }

    // Clusters in leaf order, then cluster order inside the leaf.
    std::vector<std::vector<Index>> clusters;
    for (const auto& leaf : plan.leaves) {
        if (leaf.allocation == 0) continue;
        const auto c = kmeans(x.scaled, leaf.unlabeled, leaf.allocation, derive_seed(seed, leaf.leaf_id));
        for (auto& m : c.members()) clusters.push_back(std::move(m));
    }
    const auto sel = divrep_optimize(x.scaled, clusters, pool.labeled(), cfg.divrep_max_rounds);
    plan.selected = sel.selected;
    plan.divrep_rounds = sel.rounds;
    plan.divrep_converged = sel.converged;
    plan.clusters = std::move(clusters);
    return plan;
}

/// Model-free selection of `budget` points from `candidates`: k-means with
/// k = budget, then Delta - R coordinate ascent with no labeled anchors.
inline std::vector<Index> irdm_select(const Matrix& scaled, std::span<const Index> candidates, std::size_t budget,
                                      std::uint64_t seed, std::size_t max_rounds = 10) {
    if (budget < 1) throw std::invalid_argument("irdm_select: budget must be >= 1");
    if (budget > candidates.size()) throw std::invalid_argument("irdm_select: budget exceeds the candidate pool");
    const auto clustering = kmeans(scaled, candidates, budget, seed);
    const auto members = clustering.members();
    return divrep_optimize(scaled, members, {}, max_rounds).selected;
}

/// Vote entropy -sum (V_y / M) log2 (V_y / M). Counts are sorted first so the
/// value depends only on the multiset of votes.
inline double vote_entropy(std::vector<std::size_t> votes) {
    std::sort(votes.begin(), votes.end());
    return entropy_of_counts(votes);
}

/// Query-by-committee: bootstrap trees on the labeled set, rank unlabeled
/// samples by vote entropy, break score ties uniformly at random.
inline std::vector<Index> qbc_select(const Matrix& raw, std::span<const ClassId> labels, int n_classes,
                                     const PoolState& pool, std::size_t batch, std::size_t committee_size,
                                     const TreeParams& tree_params, std::uint64_t seed) {
    if (committee_size < 2) throw std::invalid_argument("qbc_select: committee size must be >= 2");
    const auto& labeled = pool.labeled();
    if (labeled.empty()) throw UnfittableError("QBC needs a non-empty labeled set");

    std::vector<ClassificationTree> committee;
    committee.reserve(committee_size);
    for (std::size_t m = 0; m < committee_size; ++m) {
        Rng rng(derive_seed(seed, m));
        std::vector<Index> sample(labeled.size());
        for (auto& s : sample) s = labeled[uniform_index(rng, labeled.size())];
        committee.push_back(fit_tree(raw, labels, n_classes, sample, tree_params));
    }

    const auto& unlabeled = pool.unlabeled();
    struct Scored {
        Index index;
        double score;
        std::uint64_t key;
    };
    std::vector<Scored> scored;
    scored.reserve(unlabeled.size());
    Rng tie_rng(derive_seed(seed, hash_tag("qbc-ties")));
    std::vector<std::size_t> votes(static_cast<std::size_t>(n_classes));
    for (Index i : unlabeled) {
        std::fill(votes.begin(), votes.end(), 0);
        for (const auto& t : committee) ++votes[static_cast<std::size_t>(t.predict(raw.row(i)))];
        scored.push_back({i, vote_entropy(votes), tie_rng()});
    }
    const std::size_t take = std::min(batch, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                      [](const Scored& a, const Scored& b) {
                          if (a.score != b.score) return a.score > b.score;
                          if (a.key != b.key) return a.key < b.key;
                          return a.index < b.index;
                      });
    std::vector<Index> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(scored[i].index);
    return out;
}

/// Everything a sequential strategy needs for one batch.
struct QueryContext {
    FeatureViews x;
    std::span<const ClassId> labels;
    int n_classes;
    const PoolState& pool;
};

/// One batch from a sequential strategy. Model-based strategies that cannot
/// fit fall back to random sampling. iRDM is not sequential; use irdm_select.
inline std::vector<Index> select_batch(const StrategyConfig& cfg, const QueryContext& ctx, std::size_t batch,
                                       std::uint64_t seed) {
    try {
        switch (cfg.kind) {
            case StrategyKind::rs: return random_select(ctx.pool, batch, seed);
            case StrategyKind::ctal_rs:
                return ctal_select(ctx.x, ctx.labels, ctx.n_classes, ctx.pool, batch, InLeafSampling::random, cfg, seed)
                    .selected;
            case StrategyKind::ctal_divrep:
                return ctal_select(ctx.x, ctx.labels, ctx.n_classes, ctx.pool, batch, InLeafSampling::divrep, cfg, seed)
                    .selected;
            case StrategyKind::qbc:
                return qbc_select(ctx.x.raw, ctx.labels, ctx.n_classes, ctx.pool, batch, cfg.qbc_committee_size,
                                  cfg.tree_params, seed);
            case StrategyKind::irdm: break;
        }
    } catch (const UnfittableError&) {
        return random_select(ctx.pool, batch, derive_seed(seed, hash_tag("fallback")));
    }
    throw std::logic_error("select_batch: iRDM is not a sequential strategy");
}

}  // namespace ctal
