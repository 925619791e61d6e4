#pragma once

// Experiment runner: repeated train/test splits, initial random labels,
// batched active selection with retraining, forest evaluation at every
// budget level, and summary statistics with rank-sum significance flags.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ctal/data.hpp"
#include "ctal/forest.hpp"
#include "ctal/metrics.hpp"
#include "ctal/rng.hpp"
#include "ctal/strategies.hpp"

namespace ctal {

/// Invalid configuration or command-line usage.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct DatasetSource {
    std::string path;
    std::string label_column = "0";
    CategoricalMode categorical = CategoricalMode::ordinal;
    bool header = true;

    Dataset load() const {
        CsvOptions opts;
        opts.label_column = label_column;
        opts.categorical = categorical;
        opts.header = header;
        return load_csv(path, opts);
    }
};

struct ExperimentConfig {
    DatasetSource dataset;
    std::vector<StrategyKind> strategies = {StrategyKind::rs, StrategyKind::ctal_divrep};
    /// Parameters shared by every strategy; `kind` is overwritten per run.
    StrategyConfig strategy_params{};
    std::size_t n_init = 20;
    std::size_t batch_size = 20;
    std::size_t max_budget = 200;
    std::size_t n_repeats = 100;
    double test_fraction = 0.2;
    ForestParams forest{};
    std::uint64_t master_seed = 0;
    std::string output;
    /// Write measured wall time into records; off keeps records reproducible.
    bool record_wall_time = false;
    /// 0: CTAL_WORKERS environment variable, else hardware concurrency.
    std::size_t workers = 0;

    StrategyConfig strategy(StrategyKind kind) const {
        StrategyConfig c = strategy_params;
        c.kind = kind;
        return c;
    }

    std::vector<std::size_t> budgets() const {
        std::vector<std::size_t> out;
        for (std::size_t b = n_init; b <= max_budget; b += batch_size) out.push_back(b);
        return out;
    }

    void validate() const {
        if (strategies.empty()) throw UsageError("at least one strategy is required");
        if (n_init < 1) throw UsageError("n_init must be >= 1");
        if (batch_size < 1) throw UsageError("batch_size must be >= 1");
        if (n_init > max_budget) throw UsageError("n_init must not exceed max_budget");
        if ((max_budget - n_init) % batch_size != 0) throw UsageError("max_budget - n_init must be divisible by batch_size");
        if (n_repeats < 1) throw UsageError("n_repeats must be >= 1");
        if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw UsageError("test_fraction must lie in (0, 1)");
        if (forest.n_trees < 1) throw UsageError("n_trees must be >= 1");
        if (forest.min_samples_leaf < 1) throw UsageError("forest_min_samples_leaf must be >= 1");
        for (auto k : strategies) {
            try {
                strategy(k).validate();
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
        }
    }
};

struct RunRecord {
    std::string strategy;
    std::size_t repeat = 0;
    std::size_t budget = 0;
    double balanced_accuracy = 0.0;
    double wall_time = 0.0;

    bool operator==(const RunRecord&) const = default;
};

struct SummaryRow {
    std::string strategy;
    std::size_t budget = 0;
    std::size_t n = 0;
    double mean = 0.0;
    double std = 0.0;
    double p_vs_best = 1.0;
    bool is_best = false;
    bool is_equivalent = false;
};

struct ResultsTable {
    std::vector<RunRecord> records;
    std::vector<SummaryRow> summary;

    const SummaryRow* find(std::string_view strategy, std::size_t budget) const {
        for (const auto& r : summary)
            if (r.strategy == strategy && r.budget == budget) return &r;
        return nullptr;
    }

    std::vector<double> scores(std::string_view strategy, std::size_t budget) const {
        std::vector<double> out;
        for (const auto& r : records)
            if (r.strategy == strategy && r.budget == budget) out.push_back(r.balanced_accuracy);
        return out;
    }
};

// ---------------------------------------------------------------------------
// Seeds

namespace seeds {
inline std::uint64_t split(std::uint64_t master, std::size_t repeat) {
    return derive_seed(master, repeat, hash_tag("split"));
}
inline std::uint64_t initial(std::uint64_t master, std::size_t repeat) {
    return derive_seed(master, repeat, hash_tag("init"));
}
inline std::uint64_t stage(std::uint64_t master, std::size_t repeat, StrategyKind kind, std::string_view what,
                           std::size_t budget) {
    return derive_seed(master, repeat, hash_tag(strategy_name(kind)), hash_tag(what), budget);
}
/// The evaluation forest's seed ignores the strategy, so equal training sets
/// get equal scores within a repeat.
inline std::uint64_t forest(std::uint64_t master, std::size_t repeat, std::size_t budget) {
    return derive_seed(master, repeat, hash_tag("forest"), budget);
}
}  // namespace seeds

/// The per-repeat state every strategy shares: split, standardized features
/// and the initial labeled set.
struct RepeatSetup {
    std::size_t repeat = 0;
    Split split;
    Matrix scaled;
    std::vector<Index> initial;
};

inline RepeatSetup make_repeat(const Dataset& data, const ExperimentConfig& cfg, std::size_t repeat) {
    RepeatSetup s;
    s.repeat = repeat;
    s.split = train_test_split(data.size(), cfg.test_fraction, seeds::split(cfg.master_seed, repeat));
    if (cfg.max_budget > s.split.train.size())
        throw DataError("max_budget " + std::to_string(cfg.max_budget) + " exceeds the training pool size " +
                        std::to_string(s.split.train.size()));
    s.scaled = Standardizer::fit(data.features, s.split.train).apply(data.features);
    const PoolState pool(s.split.train);
    s.initial = random_select(pool, cfg.n_init, seeds::initial(cfg.master_seed, repeat));
    std::sort(s.initial.begin(), s.initial.end());
    return s;
}

/// Fits the evaluation forest on `labeled` and scores it on the test rows.
inline double evaluate_training_set(const Dataset& data, const RepeatSetup& setup, std::span<const Index> labeled,
                                    const ForestParams& params, std::uint64_t seed) {
    const auto forest = Forest::fit(data.features, data.labels, data.n_classes, labeled, params, seed);
    const auto pred = forest.predict(data.features, setup.split.test);
    std::vector<ClassId> truth;
    truth.reserve(setup.split.test.size());
    for (Index i : setup.split.test) truth.push_back(data.labels[i]);
    return balanced_accuracy(truth, pred, data.n_classes);
}

/// Observer for the labeled set at each evaluated budget (tests use it to
/// check leakage and monotonicity).
using LabeledSetObserver = std::function<void(StrategyKind, std::size_t budget, std::span<const Index> labeled)>;

/// One strategy through the whole budget schedule of one repeat.
inline std::vector<RunRecord> run_strategy(const Dataset& data, const RepeatSetup& setup, StrategyKind kind,
                                           const ExperimentConfig& cfg, const LabeledSetObserver& observe = {}) {
    using clock = std::chrono::steady_clock;
    const StrategyConfig scfg = cfg.strategy(kind);
    const std::string name(strategy_name(kind));
    std::vector<RunRecord> out;
    const FeatureViews views{data.features, setup.scaled};

    auto record = [&](std::size_t budget, std::span<const Index> labeled, clock::time_point start) {
        if (labeled.size() != budget) throw std::logic_error("labeled set size does not match the budget");
        if (observe) observe(kind, budget, labeled);
        const double acc = evaluate_training_set(data, setup, labeled, cfg.forest,
                                                 seeds::forest(cfg.master_seed, setup.repeat, budget));
        const double secs = std::chrono::duration<double>(clock::now() - start).count();
        out.push_back({name, setup.repeat, budget, acc, cfg.record_wall_time ? secs : 0.0});
    };

    if (kind == StrategyKind::irdm) {
        // Not sequential: each budget is selected from scratch over the pool.
        for (std::size_t b : cfg.budgets()) {
            const auto start = clock::now();
            auto picked = irdm_select(setup.scaled, setup.split.train, b,
                                      seeds::stage(cfg.master_seed, setup.repeat, kind, "select", b),
                                      scfg.divrep_max_rounds);
            std::sort(picked.begin(), picked.end());
            record(b, picked, start);
        }
        return out;
    }

    PoolState pool(setup.split.train);
    pool.label(setup.initial);
    const QueryContext ctx{views, data.labels, data.n_classes, pool};
    auto start = clock::now();
    for (std::size_t b : cfg.budgets()) {
        record(b, pool.labeled(), start);
        if (b == cfg.max_budget) break;
        start = clock::now();
        const auto batch =
            select_batch(scfg, ctx, cfg.batch_size, seeds::stage(cfg.master_seed, setup.repeat, kind, "select", b));
        if (batch.size() != cfg.batch_size) throw std::logic_error("strategy returned a short batch");
        pool.label(batch);
    }
    return out;
}

/// One repeat of one strategy, from the dataset and repeat index.
inline std::vector<RunRecord> run_single(const Dataset& data, StrategyKind kind, const ExperimentConfig& cfg,
                                         std::size_t repeat) {
    return run_strategy(data, make_repeat(data, cfg, repeat), kind, cfg);
}

inline std::size_t resolve_workers(std::size_t requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("CTAL_WORKERS")) {
        std::size_t v = 0;
        const std::string_view s(env);
        if (std::from_chars(s.data(), s.data() + s.size(), v).ec == std::errc() && v > 0) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

inline std::vector<SummaryRow> summarize(std::span<const RunRecord> records);

/// Runs every repeat (in parallel) for every strategy. Records come back in
/// (strategy order, repeat, budget) order regardless of scheduling.
inline ResultsTable run_experiment(const Dataset& data, const ExperimentConfig& cfg,
                                   const LabeledSetObserver& observe = {}) {
    cfg.validate();
    std::vector<std::vector<std::vector<RunRecord>>> slots(cfg.n_repeats,
                                                           std::vector<std::vector<RunRecord>>(cfg.strategies.size()));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t r = next++; r < cfg.n_repeats; r = next++) {
            try {
                const auto setup = make_repeat(data, cfg, r);
                for (std::size_t s = 0; s < cfg.strategies.size(); ++s)
                    slots[r][s] = run_strategy(data, setup, cfg.strategies[s], cfg, observe);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = cfg.n_repeats;
            }
        }
    };
    const std::size_t workers = std::min(resolve_workers(cfg.workers), cfg.n_repeats);
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> threads;
        for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);

    ResultsTable table;
    for (std::size_t s = 0; s < cfg.strategies.size(); ++s)
        for (std::size_t r = 0; r < cfg.n_repeats; ++r)
            table.records.insert(table.records.end(), slots[r][s].begin(), slots[r][s].end());
    table.summary = summarize(table.records);
    return table;
}

inline ResultsTable run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    return run_experiment(cfg.dataset.load(), cfg);
}

/// Mean and sample std per (strategy, budget); the best mean per budget is
/// flagged, and every strategy whose scores are not significantly different
/// from the best (two-sided rank-sum p >= 0.05) is flagged equivalent. The
/// best row compares against itself (p = 1).
inline std::vector<SummaryRow> summarize(std::span<const RunRecord> records) {
    std::vector<std::string> order;
    std::map<std::pair<std::string, std::size_t>, std::vector<double>> groups;
    std::vector<std::size_t> budgets;
    for (const auto& r : records) {
        if (std::find(order.begin(), order.end(), r.strategy) == order.end()) order.push_back(r.strategy);
        if (std::find(budgets.begin(), budgets.end(), r.budget) == budgets.end()) budgets.push_back(r.budget);
        groups[{r.strategy, r.budget}].push_back(r.balanced_accuracy);
    }
    std::sort(budgets.begin(), budgets.end());

    std::map<std::pair<std::string, std::size_t>, SummaryRow> rows;
    for (std::size_t b : budgets) {
        const std::vector<double>* best = nullptr;
        std::string best_name;
        double best_mean = -1.0;
        for (const auto& s : order) {
            const auto it = groups.find({s, b});
            if (it == groups.end()) continue;
            SummaryRow row;
            row.strategy = s;
            row.budget = b;
            row.n = it->second.size();
            row.mean = mean(it->second);
            row.std = stddev(it->second);
            if (row.mean > best_mean) {
                best_mean = row.mean;
                best = &it->second;
                best_name = s;
            }
            rows[{s, b}] = row;
        }
        for (const auto& s : order) {
            const auto it = groups.find({s, b});
            if (it == groups.end()) continue;
            SummaryRow& row = rows[{s, b}];
            row.is_best = s == best_name;
            row.p_vs_best = row.is_best ? 1.0 : wilcoxon_rank_sum(it->second, *best).p_value;
            row.is_equivalent = row.p_vs_best >= 0.05;
        }
    }
    std::vector<SummaryRow> out;
    for (const auto& s : order)
        for (std::size_t b : budgets)
            if (const auto it = rows.find({s, b}); it != rows.end()) out.push_back(it->second);
    return out;
}

// ---------------------------------------------------------------------------
// CSV files

/// Shortest text that parses back to exactly `v`.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline constexpr std::string_view kRecordsHeader = "strategy,repeat,budget,balanced_accuracy,wall_time_s";
inline constexpr std::string_view kSummaryHeader = "strategy,budget,mean,std,p_vs_best,is_best,is_equivalent";

inline void write_records_csv(std::ostream& out, std::span<const RunRecord> records) {
    out << kRecordsHeader << '\n';
    for (const auto& r : records)
        out << r.strategy << ',' << r.repeat << ',' << r.budget << ',' << format_double(r.balanced_accuracy) << ','
            << format_double(r.wall_time) << '\n';
}

inline void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
    out << kSummaryHeader << '\n';
    for (const auto& r : rows)
        out << r.strategy << ',' << r.budget << ',' << format_double(r.mean) << ',' << format_double(r.std) << ','
            << format_double(r.p_vs_best) << ',' << (r.is_best ? 1 : 0) << ',' << (r.is_equivalent ? 1 : 0) << '\n';
}

inline std::vector<RunRecord> read_records_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != kRecordsHeader)
        throw DataError("records CSV must start with the header '" + std::string(kRecordsHeader) + "'");
    std::vector<RunRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_line(line, ',');
        auto bad = [&] { return DataError("malformed records row at line " + std::to_string(line_no)); };
        if (cells.size() != 5) throw bad();
        RunRecord r;
        r.strategy = cells[0];
        double v;
        if (!detail::parse_double(cells[1], v) || v < 0) throw bad();
        r.repeat = static_cast<std::size_t>(v);
        if (!detail::parse_double(cells[2], v) || v < 0) throw bad();
        r.budget = static_cast<std::size_t>(v);
        if (!detail::parse_double(cells[3], r.balanced_accuracy)) throw bad();
        if (!detail::parse_double(cells[4], r.wall_time)) throw bad();
        out.push_back(std::move(r));
    }
    return out;
}

/// Human-readable table: mean (std) at 3 decimals; '*' marks the best
/// strategy, '=' a statistically equivalent one.
inline void print_summary_table(std::ostream& out, std::span<const SummaryRow> rows) {
    std::vector<std::string> order;
    std::vector<std::size_t> budgets;
    for (const auto& r : rows) {
        if (std::find(order.begin(), order.end(), r.strategy) == order.end()) order.push_back(r.strategy);
        if (std::find(budgets.begin(), budgets.end(), r.budget) == budgets.end()) budgets.push_back(r.budget);
    }
    std::sort(budgets.begin(), budgets.end());
    out << std::left << std::setw(8) << "budget";
    for (const auto& s : order) out << std::setw(18) << s;
    out << '\n';
    for (std::size_t b : budgets) {
        out << std::setw(8) << b;
        for (const auto& s : order) {
            std::ostringstream cell;
            for (const auto& r : rows)
                if (r.strategy == s && r.budget == b)
                    cell << std::fixed << std::setprecision(3) << r.mean << " (" << r.std << ")"
                         << (r.is_best ? "*" : r.is_equivalent ? "=" : "");
            out << std::setw(18) << cell.str();
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Config file: one `key = value` per line, '#' starts a comment.

namespace detail {

template <class T>
T parse_number(std::string_view key, std::string_view value) {
    T v{};
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw UsageError("invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
    return v;
}

inline bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
    if (value == "0" || value == "false" || value == "no" || value == "off") return false;
    throw UsageError("invalid boolean '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

}  // namespace detail

inline std::vector<StrategyKind> parse_strategy_list(std::string_view list) {
    std::vector<StrategyKind> out;
    for (const auto& name : detail::split_line(list, ',')) {
        if (name.empty()) continue;
        try {
            out.push_back(parse_strategy(name));
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    if (out.empty()) throw UsageError("empty strategy list; valid identifiers: " + strategy_names_list());
    return out;
}

/// Keys accepted in config files (and mirrored by CLI flags).
inline void apply_config_key(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
    using detail::parse_bool;
    using detail::parse_number;
    if (key == "data") cfg.dataset.path = value;
    else if (key == "label_col") cfg.dataset.label_column = value;
    else if (key == "header") cfg.dataset.header = parse_bool(key, value);
    else if (key == "categorical") {
        if (value == "ordinal") cfg.dataset.categorical = CategoricalMode::ordinal;
        else if (value == "onehot") cfg.dataset.categorical = CategoricalMode::onehot;
        else throw UsageError("categorical must be 'ordinal' or 'onehot'");
    } else if (key == "strategies") cfg.strategies = parse_strategy_list(value);
    else if (key == "n_init") cfg.n_init = parse_number<std::size_t>(key, value);
    else if (key == "batch_size") cfg.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "max_budget") cfg.max_budget = parse_number<std::size_t>(key, value);
    else if (key == "n_repeats") cfg.n_repeats = parse_number<std::size_t>(key, value);
    else if (key == "test_fraction") cfg.test_fraction = parse_number<double>(key, value);
    else if (key == "seed") cfg.master_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "out") cfg.output = value;
    else if (key == "timing") cfg.record_wall_time = parse_bool(key, value);
    else if (key == "workers") cfg.workers = parse_number<std::size_t>(key, value);
    else if (key == "n_trees") cfg.forest.n_trees = parse_number<std::size_t>(key, value);
    else if (key == "forest_min_samples_leaf") cfg.forest.min_samples_leaf = parse_number<std::size_t>(key, value);
    else if (key == "bootstrap") cfg.forest.bootstrap = parse_bool(key, value);
    else if (key == "features_per_split") {
        if (value == "sqrt") cfg.forest.features_per_split = FeatureSubset::sqrt;
        else if (value == "all") cfg.forest.features_per_split = FeatureSubset::all;
        else throw UsageError("features_per_split must be 'sqrt' or 'all'");
    } else if (key == "tree_min_samples_leaf")
        cfg.strategy_params.tree_params.min_samples_leaf = parse_number<std::size_t>(key, value);
    else if (key == "qbc_committee_size") cfg.strategy_params.qbc_committee_size = parse_number<std::size_t>(key, value);
    else if (key == "divrep_max_rounds") cfg.strategy_params.divrep_max_rounds = parse_number<std::size_t>(key, value);
    else if (key == "impure_multiplier") cfg.strategy_params.impure_multiplier = parse_number<double>(key, value);
    else if (key == "allocation_scope") {
        if (value == "group") cfg.strategy_params.allocation_scope = AllocationScope::per_group;
        else if (value == "global") cfg.strategy_params.allocation_scope = AllocationScope::global;
        else throw UsageError("allocation_scope must be 'group' or 'global'");
    } else
        throw UsageError("unknown config key '" + std::string(key) + "'");
}

inline void read_config(std::istream& in, ExperimentConfig& cfg) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = detail::trim(view);
        if (view.empty()) continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos)
            throw UsageError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        apply_config_key(cfg, detail::trim(view.substr(0, eq)), detail::trim(view.substr(eq + 1)));
    }
}

}  // namespace ctal
