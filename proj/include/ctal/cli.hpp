#pragma once

// Command-line front end: `run`, `summarize`, `inspect-tree`.
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctal/harness.hpp"

namespace ctal {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace detail {

/// Flags that map one-to-one onto config keys.
struct FlagBinding {
    const char* flag;
    const char* key;
    const char* help;
};

inline constexpr FlagBinding kRunFlags[] = {
    {"--data", "data", "CSV dataset path"},
    {"--label-col", "label_col", "label column name or 0-based index"},
    {"--categorical", "categorical", "categorical encoding: ordinal|onehot"},
    {"--strategies", "strategies", "comma-separated: rs,ctal-rs,ctal-divrep,irdm,qbc"},
    {"--seed", "seed", "master seed"},
    {"--out", "out", "output directory for records.csv and summary.csv"},
    {"--n-init", "n_init", "initial random labels"},
    {"--batch", "batch_size", "labels added per active step"},
    {"--max-budget", "max_budget", "final training-set size"},
    {"--repeats", "n_repeats", "number of train/test splits"},
    {"--test-fraction", "test_fraction", "held-out fraction"},
    {"--trees", "n_trees", "evaluation forest size"},
    {"--forest-min-leaf", "forest_min_samples_leaf", "evaluation forest min_samples_leaf"},
    {"--features-per-split", "features_per_split", "sqrt|all"},
    {"--tree-min-leaf", "tree_min_samples_leaf", "selection/committee tree min_samples_leaf"},
    {"--committee", "qbc_committee_size", "QBC committee size"},
    {"--divrep-rounds", "divrep_max_rounds", "max coordinate-ascent sweeps"},
    {"--impure-multiplier", "impure_multiplier", "pure/impure split constant"},
    {"--allocation", "allocation_scope", "group|global"},
    {"--workers", "workers", "parallel repeats (default: CTAL_WORKERS or all cores)"},
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write '" + path.string() + "'");
    f << text;
    if (!f) throw DataError("error while writing '" + path.string() + "'");
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Classification-tree active learning toolkit"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run an experiment and write records + summary CSVs");
    std::string config_path;
    run->add_option("--config", config_path, "config file (key = value lines); flags override it");
    std::vector<std::string> run_values(std::size(detail::kRunFlags));
    for (std::size_t i = 0; i < std::size(detail::kRunFlags); ++i)
        run->add_option(detail::kRunFlags[i].flag, run_values[i], detail::kRunFlags[i].help);
    bool no_header = false, timing = false, no_bootstrap = false;
    run->add_flag("--no-header", no_header, "CSV has no header row");
    run->add_flag("--timing", timing, "record wall time per budget step");
    run->add_flag("--no-bootstrap", no_bootstrap, "fit forest trees on the full training set");

    // summarize
    auto* summ = app.add_subcommand("summarize", "recompute the summary from a records CSV");
    std::string records_path, summary_out;
    summ->add_option("--records", records_path, "records CSV")->required();
    summ->add_option("--out", summary_out, "summary CSV path (default: stdout)");

    // inspect-tree
    auto* insp = app.add_subcommand("inspect-tree", "fit the selection tree on a random labeled set and dump leaf stats");
    std::string insp_data, insp_label = "0", insp_categorical = "ordinal";
    std::size_t insp_labeled = 20, insp_batch = 20, insp_min_leaf = 10;
    std::uint64_t insp_seed = 0;
    bool insp_no_header = false;
    insp->add_option("--data", insp_data, "CSV dataset path")->required();
    insp->add_option("--label-col", insp_label, "label column name or 0-based index");
    insp->add_option("--categorical", insp_categorical, "ordinal|onehot");
    insp->add_option("--labeled", insp_labeled, "number of randomly labeled pool samples");
    insp->add_option("--batch", insp_batch, "batch size to allocate over the leaves");
    insp->add_option("--tree-min-leaf", insp_min_leaf, "selection tree min_samples_leaf");
    insp->add_option("--seed", insp_seed, "seed for the split and the labeled draw");
    insp->add_flag("--no-header", insp_no_header, "CSV has no header row");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (run->parsed()) {
            ExperimentConfig cfg;
            if (!config_path.empty()) {
                std::ifstream f(config_path);
                if (!f) throw UsageError("cannot open config file '" + config_path + "'");
                read_config(f, cfg);
            }
            for (std::size_t i = 0; i < std::size(detail::kRunFlags); ++i)
                if (run->count(detail::kRunFlags[i].flag) > 0)
                    apply_config_key(cfg, detail::kRunFlags[i].key, run_values[i]);
            if (no_header) cfg.dataset.header = false;
            if (timing) cfg.record_wall_time = true;
            if (no_bootstrap) cfg.forest.bootstrap = false;
            if (cfg.dataset.path.empty()) throw UsageError("--data (or config key 'data') is required");
            if (cfg.output.empty()) throw UsageError("--out (or config key 'out') is required");
            cfg.validate();

            const Dataset data = cfg.dataset.load();
            const auto table = run_experiment(data, cfg);

            std::filesystem::create_directories(cfg.output);
            std::ostringstream rec, sum;
            write_records_csv(rec, table.records);
            write_summary_csv(sum, table.summary);
            detail::write_file(std::filesystem::path(cfg.output) / "records.csv", rec.str());
            detail::write_file(std::filesystem::path(cfg.output) / "summary.csv", sum.str());
            out << data.name << ": N=" << data.size() << " D=" << data.dim() << " classes=" << data.n_classes
                << ", " << cfg.n_repeats << " repeats\n";
            print_summary_table(out, table.summary);
            return kExitOk;
        }

        if (summ->parsed()) {
            std::ifstream f(records_path);
            if (!f) throw DataError("cannot open records file '" + records_path + "'");
            const auto records = read_records_csv(f);
            std::ostringstream sum;
            write_summary_csv(sum, summarize(records));
            if (summary_out.empty())
                out << sum.str();
            else
                detail::write_file(summary_out, sum.str());
            return kExitOk;
        }

        if (insp->parsed()) {
            ExperimentConfig cfg;
            apply_config_key(cfg, "data", insp_data);
            apply_config_key(cfg, "label_col", insp_label);
            apply_config_key(cfg, "categorical", insp_categorical);
            cfg.dataset.header = !insp_no_header;
            cfg.master_seed = insp_seed;
            cfg.n_init = insp_labeled;
            cfg.max_budget = insp_labeled;
            cfg.strategy_params.tree_params.min_samples_leaf = insp_min_leaf;
            const Dataset data = cfg.dataset.load();
            const auto setup = make_repeat(data, cfg, 0);
            PoolState pool(setup.split.train);
            pool.label(setup.initial);
            const auto plan = ctal_plan({data.features, setup.scaled}, data.labels, data.n_classes, pool, insp_batch,
                                        cfg.strategy(StrategyKind::ctal_rs));
            const auto tree = fit_tree(data.features, data.labels, data.n_classes, pool.labeled(),
                                       cfg.strategy_params.tree_params);
            out << tree.dump(data.feature_names);
            out << "leaf  labeled  unlabeled  entropy  density   pure  alloc\n";
            for (const auto& s : plan.leaves)
                out << std::left << std::setw(6) << s.leaf_id << std::setw(9) << s.labeled.size() << std::setw(11)
                    << s.unlabeled.size() << std::fixed << std::setprecision(4) << std::setw(9) << s.entropy
                    << std::setw(10) << s.density << std::setw(6) << (s.is_pure ? "yes" : "no") << s.allocation
                    << '\n';
            out << "pure group " << plan.allocation.n_pure_group << ", impure group " << plan.allocation.n_impure_group
                << ", total " << plan.allocation.total() << '\n';
            return kExitOk;
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const UnfittableError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace ctal
