#pragma once
// Experiment orchestration: JSON config in, deterministic CSV tables out.
// Cells run concurrently up to a thread budget; every cell derives its seeds
// from (master seed, cell id), so results are schedule-independent.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "claga/claga_fit.hpp"
#include "claga/csv.hpp"
#include "claga/dataset.hpp"
#include "claga/decomposition.hpp"
#include "claga/errors.hpp"
#include "claga/gbm.hpp"
#include "claga/meta_learners.hpp"
#include "claga/metrics.hpp"

namespace claga {

enum class ExperimentKind {
    BenchmarkPehe,
    SweepDiscrepancy,
    SweepComplexity,
    AuucEval,
    VerifyDecomposition
};

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
    if (s == "benchmark_pehe") return ExperimentKind::BenchmarkPehe;
    if (s == "sweep_discrepancy") return ExperimentKind::SweepDiscrepancy;
    if (s == "sweep_complexity") return ExperimentKind::SweepComplexity;
    if (s == "auuc_eval") return ExperimentKind::AuucEval;
    if (s == "verify_decomposition") return ExperimentKind::VerifyDecomposition;
    throw ConfigError("unknown experiment kind: " + s);
}

inline std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::BenchmarkPehe: return "benchmark_pehe";
        case ExperimentKind::SweepDiscrepancy: return "sweep_discrepancy";
        case ExperimentKind::SweepComplexity: return "sweep_complexity";
        case ExperimentKind::AuucEval: return "auuc_eval";
        case ExperimentKind::VerifyDecomposition: return "verify_decomposition";
    }
    return "?";
}

struct CsvSource {
    std::string path;
    CsvSchema schema;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::BenchmarkPehe;
    std::optional<DGPConfig> dgp;
    std::optional<CsvSource> csv;
    std::vector<AlgorithmKind> algorithms{AlgorithmKind::TwoModel};
    bool run_vanilla = true;
    bool run_claga = true;
    BaseLearnerConfig base_cfg;
    BaseLearnerConfig secondary_cfg;
    std::size_t claga_k = 2;
    std::size_t primary_replicates = 1;
    bool stratified = false;
    bool known_propensity = true;  // synthetic runs default to the DGP's pi
    std::vector<std::uint64_t> seeds{1};
    double train_fraction = 0.7;
    std::size_t runs = 30;
    double alpha = 0.05;
    std::vector<std::size_t> sizes{500, 2000, 8000};
    std::vector<std::size_t> num_leaves_grid{8, 64, 512};
    std::string target_source = "dr";  // verify_decomposition: dr/x/r/claga
    PiMode pi_mode = PiMode::Empirical;

    void validate() const {
        if (seeds.empty()) throw ConfigError("ExperimentConfig: at least one seed required");
        if (algorithms.empty()) throw ConfigError("ExperimentConfig: algorithm list is empty");
        if (!run_vanilla && !run_claga)
            throw ConfigError("ExperimentConfig: enable at least one of vanilla/claga");
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw ConfigError("ExperimentConfig: train_fraction must lie in (0,1)");
        if (!dgp && !csv) throw ConfigError("ExperimentConfig: need a dgp or csv source");
        base_cfg.validate();
        secondary_cfg.validate();
    }
};

namespace detail {

inline BaseLearnerConfig parse_base_cfg(const nlohmann::json& j, BaseLearnerConfig cfg) {
    if (j.contains("n_estimators")) cfg.n_estimators = j.at("n_estimators").get<std::size_t>();
    if (j.contains("num_leaves")) cfg.num_leaves = j.at("num_leaves").get<std::size_t>();
    if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("subsample")) cfg.subsample = j.at("subsample").get<double>();
    if (j.contains("subsample_freq")) cfg.subsample_freq = j.at("subsample_freq").get<std::size_t>();
    if (j.contains("min_samples_leaf")) cfg.min_samples_leaf = j.at("min_samples_leaf").get<double>();
    return cfg;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    ExperimentConfig cfg;
    cfg.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("dgp")) {
        const auto& d = j.at("dgp");
        DGPConfig g;
        if (d.contains("n")) g.n = d.at("n").get<std::size_t>();
        if (d.contains("d")) g.d = d.at("d").get<std::size_t>();
        if (d.contains("dgp_kind")) g.dgp_kind = dgp_kind_from_string(d.at("dgp_kind").get<std::string>());
        if (d.contains("treat_prob")) g.treat_prob = d.at("treat_prob").get<double>();
        if (d.contains("noise_sd")) g.noise_sd = d.at("noise_sd").get<double>();
        cfg.dgp = g;
    }
    if (j.contains("csv")) {
        const auto& c = j.at("csv");
        CsvSource src;
        src.path = c.at("path").get<std::string>();
        src.schema.feature_columns = c.at("features").get<std::vector<std::string>>();
        if (c.contains("w_column")) src.schema.w_column = c.at("w_column").get<std::string>();
        if (c.contains("y_column")) src.schema.y_column = c.at("y_column").get<std::string>();
        cfg.csv = src;
    }
    if (j.contains("algorithms")) {
        cfg.algorithms.clear();
        for (const auto& a : j.at("algorithms"))
            cfg.algorithms.push_back(algorithm_from_string(a.get<std::string>()));
    }
    if (j.contains("variants")) {
        const auto v = j.at("variants").get<std::string>();
        if (v == "vanilla") {
            cfg.run_claga = false;
        } else if (v == "claga") {
            cfg.run_vanilla = false;
        } else if (v != "both") {
            throw ConfigError("variants must be vanilla/claga/both");
        }
    }
    if (j.contains("base")) cfg.base_cfg = detail::parse_base_cfg(j.at("base"), cfg.base_cfg);
    cfg.secondary_cfg = cfg.base_cfg;
    if (j.contains("secondary"))
        cfg.secondary_cfg = detail::parse_base_cfg(j.at("secondary"), cfg.secondary_cfg);
    if (j.contains("claga")) {
        const auto& c = j.at("claga");
        if (c.contains("k")) cfg.claga_k = c.at("k").get<std::size_t>();
        if (c.contains("primary_replicates"))
            cfg.primary_replicates = c.at("primary_replicates").get<std::size_t>();
        if (c.contains("stratified")) cfg.stratified = c.at("stratified").get<bool>();
    }
    if (j.contains("propensity")) {
        const auto p = j.at("propensity").get<std::string>();
        if (p == "known")
            cfg.known_propensity = true;
        else if (p == "estimate")
            cfg.known_propensity = false;
        else
            throw ConfigError("propensity must be 'known' or 'estimate'");
    }
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("train_fraction")) cfg.train_fraction = j.at("train_fraction").get<double>();
    if (j.contains("runs")) cfg.runs = j.at("runs").get<std::size_t>();
    if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
    if (j.contains("sizes")) cfg.sizes = j.at("sizes").get<std::vector<std::size_t>>();
    if (j.contains("num_leaves_grid"))
        cfg.num_leaves_grid = j.at("num_leaves_grid").get<std::vector<std::size_t>>();
    if (j.contains("target_source")) cfg.target_source = j.at("target_source").get<std::string>();
    if (j.contains("pi_mode")) {
        const auto m = j.at("pi_mode").get<std::string>();
        if (m == "known")
            cfg.pi_mode = PiMode::Known;
        else if (m == "empirical")
            cfg.pi_mode = PiMode::Empirical;
        else
            throw ConfigError("pi_mode must be 'known' or 'empirical'");
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("invalid JSON in " + path + ": " + e.what());
    }
    return parse_experiment_config(j);
}

struct ResultRow {
    std::string cell;
    std::string metric;
    std::string seed;  // seed value, or "mean"/"sd"/"median" for aggregates
    double value;
};

struct ResultTable {
    std::vector<ResultRow> rows;

    void append(const ResultTable& other) {
        rows.insert(rows.end(), other.rows.begin(), other.rows.end());
    }

    std::optional<double> lookup(const std::string& cell, const std::string& metric,
                                 const std::string& seed) const {
        for (const auto& r : rows)
            if (r.cell == cell && r.metric == metric && r.seed == seed) return r.value;
        return std::nullopt;
    }

    std::vector<double> values_of(const std::string& cell, const std::string& metric) const {
        std::vector<double> out;
        for (const auto& r : rows)
            if (r.cell == cell && r.metric == metric && r.seed != "mean" && r.seed != "sd" &&
                r.seed != "median")
                out.push_back(r.value);
        return out;
    }
};

namespace detail {

inline void append_aggregates(ResultTable& table) {
    // group raw rows by (cell, metric), preserving first-seen order
    std::vector<std::pair<std::string, std::string>> keys;
    std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
    for (const auto& r : table.rows) {
        if (r.seed == "mean" || r.seed == "sd" || r.seed == "median") continue;
        auto key = std::make_pair(r.cell, r.metric);
        if (!groups.count(key)) keys.push_back(key);
        groups[key].push_back(r.value);
    }
    for (const auto& key : keys) {
        auto vals = groups[key];
        const double n = static_cast<double>(vals.size());
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= n;
        double sd = 0.0;
        if (vals.size() > 1) {
            for (double v : vals) sd += (v - mean) * (v - mean);
            sd = std::sqrt(sd / (n - 1.0));
        }
        std::sort(vals.begin(), vals.end());
        const double median = vals.size() % 2 ? vals[vals.size() / 2]
                                              : 0.5 * (vals[vals.size() / 2 - 1] + vals[vals.size() / 2]);
        table.rows.push_back({key.first, key.second, "mean", mean});
        table.rows.push_back({key.first, key.second, "sd", sd});
        table.rows.push_back({key.first, key.second, "median", median});
    }
}

struct TrainTestSplit {
    std::vector<std::size_t> train, test;
};

inline TrainTestSplit split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, "split"));
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_index(i + 1)]);
    const auto n_train = static_cast<std::size_t>(train_fraction * static_cast<double>(n));
    TrainTestSplit s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

inline Propensity propensity_for(const ExperimentConfig& cfg, const SyntheticDataset* ds) {
    if (cfg.known_propensity && ds) return Propensity::known_value(ds->treat_prob);
    return Propensity::estimate();
}

inline ClagaConfig make_claga_cfg(const ExperimentConfig& cfg, AlgorithmKind kind,
                                  const BaseLearnerConfig& base, const Propensity& prop,
                                  std::uint64_t seed) {
    ClagaConfig cc;
    cc.k = cfg.claga_k;
    cc.primary_kind = kind;
    cc.primary_cfg = base;
    cc.secondary_cfg = cfg.secondary_cfg;
    cc.propensity = prop;
    cc.primary_replicates = cfg.primary_replicates;
    cc.stratified = cfg.stratified;
    cc.seed = seed;
    return cc;
}

// Schedule-independent parallel map: cell i writes slot i.
inline std::vector<ResultTable> run_cells(
    const std::vector<std::function<ResultTable()>>& cells, std::size_t threads) {
    std::vector<ResultTable> out(cells.size());
    if (threads <= 1 || cells.size() <= 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) out[i] = cells[i]();
        return out;
    }
    std::vector<std::thread> pool;
    std::mutex mu;
    std::size_t next = 0;
    std::exception_ptr error;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= cells.size() || error) return;
                i = next++;
            }
            try {
                out[i] = cells[i]();
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    for (std::size_t t = 0; t < std::min(threads, cells.size()); ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// benchmark_pehe: vanilla vs CLAGA PEHE on held-out synthetic data
// ---------------------------------------------------------------------------
inline ResultTable run_benchmark_pehe(const ExperimentConfig& cfg, std::size_t threads = 1) {
    cfg.validate();
    if (!cfg.dgp) throw ConfigError("benchmark_pehe: PEHE requires known tau (synthetic source)");

    std::vector<std::function<ResultTable()>> cells;
    for (auto kind : cfg.algorithms) {
        for (std::uint64_t seed : cfg.seeds) {
            cells.push_back([&cfg, kind, seed]() {
                DGPConfig dgp = *cfg.dgp;
                dgp.seed = derive_seed(seed, "bench.dgp");
                auto ds = generate_synthetic(dgp);
                auto split = detail::split_indices(ds.size(), cfg.train_fraction, seed);
                auto train = ds.base.select(split.train);
                auto test_x = ds.base.x.select(split.test);
                std::vector<double> test_tau;
                for (std::size_t i : split.test) test_tau.push_back(ds.tau[i]);

                auto prop = detail::propensity_for(cfg, &ds);
                const std::string cell = to_string(kind);
                ResultTable t;

                double pehe_vanilla = std::nan("");
                if (cfg.run_vanilla) {
                    auto base = cfg.base_cfg;
                    base.seed = derive_seed(seed, "bench.vanilla");
                    auto model = fit_cate(kind, train, base, prop);
                    pehe_vanilla = pehe(model.predict_cate(test_x), test_tau);
                    t.rows.push_back({cell, "pehe_vanilla", std::to_string(seed), pehe_vanilla});
                }
                double pehe_claga = std::nan("");
                if (cfg.run_claga) {
                    auto cc = detail::make_claga_cfg(cfg, kind, cfg.base_cfg, prop,
                                                    derive_seed(seed, "bench.claga"));
                    auto model = claga_fit(train, cc);
                    pehe_claga = pehe(model.predict_cate(test_x), test_tau);
                    t.rows.push_back({cell, "pehe_claga", std::to_string(seed), pehe_claga});
                }
                if (cfg.run_vanilla && cfg.run_claga) {
                    const bool unstable = pehe_vanilla < 1e-8;
                    const double ratio = pehe_claga / std::max(pehe_vanilla, 1e-300);
                    t.rows.push_back({cell, unstable ? "pehe_ratio_unstable" : "pehe_ratio",
                                      std::to_string(seed), ratio});
                }
                return t;
            });
        }
    }
    auto parts = detail::run_cells(cells, threads);
    ResultTable table;
    for (const auto& p : parts) table.append(p);
    detail::append_aggregates(table);
    return table;
}

// ---------------------------------------------------------------------------
// sweep_discrepancy / sweep_complexity: discrepancy ratio over a grid
// ---------------------------------------------------------------------------
inline ResultTable run_sweep_discrepancy(const ExperimentConfig& cfg, std::size_t threads = 1) {
    cfg.validate();
    if (!cfg.dgp) throw ConfigError("sweep_discrepancy: synthetic source required");
    const bool complexity = cfg.kind == ExperimentKind::SweepComplexity;
    const auto& grid = complexity ? cfg.num_leaves_grid : cfg.sizes;
    if (grid.empty()) throw ConfigError("sweep: empty grid");

    std::vector<std::function<ResultTable()>> cells;
    for (auto kind : cfg.algorithms) {
        for (std::size_t gv : grid) {
            for (std::uint64_t seed : cfg.seeds) {
                cells.push_back([&cfg, kind, gv, seed, complexity]() {
                    DGPConfig dgp = *cfg.dgp;
                    if (!complexity) dgp.n = gv;
                    dgp.seed = derive_seed(seed, "sweep.dgp", gv);
                    auto ds = generate_synthetic(dgp);
                    auto base = cfg.base_cfg;
                    if (complexity) base.num_leaves = gv;
                    auto prop = detail::propensity_for(cfg, &ds);

                    const std::string cell = to_string(kind) + "|" +
                                             (complexity ? "leaves=" : "n=") + std::to_string(gv);
                    ResultTable t;
                    if (cfg.run_vanilla) {
                        auto fit_fn = [&](const ObservedDataset& data, std::uint64_t run_seed) {
                            auto b = base;
                            b.seed = derive_seed(run_seed, "sweep.vanilla");
                            return fit_cate(kind, data, b, prop);
                        };
                        auto rep = discrepancy_ratio(ds, fit_fn, cfg.runs, cfg.alpha,
                                                     derive_seed(seed, "sweep.disc.v", gv));
                        t.rows.push_back({cell, "discrepancy_vanilla", std::to_string(seed), rep.ratio});
                    }
                    if (cfg.run_claga) {
                        auto fit_fn = [&](const ObservedDataset& data, std::uint64_t run_seed) {
                            auto cc = detail::make_claga_cfg(cfg, kind, base, prop,
                                                            derive_seed(run_seed, "sweep.claga"));
                            return claga_fit(data, cc);
                        };
                        auto rep = discrepancy_ratio(ds, fit_fn, cfg.runs, cfg.alpha,
                                                     derive_seed(seed, "sweep.disc.c", gv));
                        t.rows.push_back({cell, "discrepancy_claga", std::to_string(seed), rep.ratio});
                    }
                    return t;
                });
            }
        }
    }
    auto parts = detail::run_cells(cells, threads);
    ResultTable table;
    for (const auto& p : parts) table.append(p);
    detail::append_aggregates(table);
    return table;
}

// ---------------------------------------------------------------------------
// auuc_eval: test-split AUUC per algorithm and variant
// ---------------------------------------------------------------------------
inline ResultTable run_auuc_eval(const ExperimentConfig& cfg, std::size_t threads = 1) {
    cfg.validate();

    std::vector<std::function<ResultTable()>> cells;
    for (auto kind : cfg.algorithms) {
        for (std::uint64_t seed : cfg.seeds) {
            cells.push_back([&cfg, kind, seed]() {
                ObservedDataset full;
                std::optional<SyntheticDataset> synth;
                if (cfg.dgp) {
                    DGPConfig dgp = *cfg.dgp;
                    dgp.seed = derive_seed(seed, "auuc.dgp");
                    synth = generate_synthetic(dgp);
                    full = synth->base;
                } else {
                    full = load_csv(cfg.csv->path, cfg.csv->schema);
                }
                auto split = detail::split_indices(full.size(), cfg.train_fraction, seed);
                auto train = full.select(split.train);
                auto test = full.select(split.test);
                if (!test.both_groups_present())
                    throw ConfigError("auuc_eval: test split contains a single group");

                auto prop = detail::propensity_for(cfg, synth ? &*synth : nullptr);
                const std::string cell = to_string(kind);
                ResultTable t;
                double auuc_vanilla = std::nan(""), auuc_claga = std::nan("");
                if (cfg.run_vanilla) {
                    auto base = cfg.base_cfg;
                    base.seed = derive_seed(seed, "auuc.vanilla");
                    auto model = fit_cate(kind, train, base, prop);
                    auuc_vanilla =
                        uplift_auuc(model.predict_cate(test.x), test.w, test.y).auuc;
                    t.rows.push_back({cell, "auuc_vanilla", std::to_string(seed), auuc_vanilla});
                }
                if (cfg.run_claga) {
                    auto cc = detail::make_claga_cfg(cfg, kind, cfg.base_cfg, prop,
                                                    derive_seed(seed, "auuc.claga"));
                    auto model = claga_fit(train, cc);
                    auuc_claga = uplift_auuc(model.predict_cate(test.x), test.w, test.y).auuc;
                    t.rows.push_back({cell, "auuc_claga", std::to_string(seed), auuc_claga});
                }
                if (cfg.run_vanilla && cfg.run_claga) {
                    const double win = auuc_claga > auuc_vanilla ? 1.0
                                       : auuc_claga < auuc_vanilla ? 0.0
                                                                   : 0.5;
                    t.rows.push_back({cell, "claga_wins", std::to_string(seed), win});
                }
                return t;
            });
        }
    }
    auto parts = detail::run_cells(cells, threads);
    ResultTable table;
    for (const auto& p : parts) table.append(p);
    detail::append_aggregates(table);
    return table;
}

// ---------------------------------------------------------------------------
// verify_decomposition: build RunRecordSets by retrain-with-reassignment and
// check the five-term identity per instance
// ---------------------------------------------------------------------------
inline ResultTable run_verify_decomposition(const ExperimentConfig& cfg, std::size_t threads = 1) {
    cfg.validate();
    (void)threads;  // record building is sequential per target source
    if (!cfg.dgp) throw ConfigError("verify_decomposition: synthetic source with known pi required");
    const std::string& src = cfg.target_source;
    if (src != "x" && src != "r" && src != "dr" && src != "claga")
        throw ConfigError("verify_decomposition: target_source must be one of x, r, dr, claga "
                          "(single/two have no effect-scale target)");

    DGPConfig dgp = *cfg.dgp;
    dgp.seed = derive_seed(cfg.seeds.front(), "vdec.dgp");
    auto ds = generate_synthetic(dgp);
    const std::size_t n = ds.size();
    auto prop = detail::propensity_for(cfg, &ds);

    RunRecordSet records;
    records.records.resize(n);
    records.tau_true = ds.tau;
    records.pi = ds.treat_prob;

    if (src == "claga") {
        // Primaries and secondary are fit once; each run only redraws W.
        // The relabels read x alone, so tilde stays fixed and SDMG vanishes.
        auto cc = detail::make_claga_cfg(cfg, cfg.algorithms.front(), cfg.base_cfg, prop,
                                        derive_seed(cfg.seeds.front(), "vdec.claga"));
        auto fitted = claga_fit_detailed(ds.base, cc);
        auto hat = fitted.secondary.predict_cate(ds.base.x);
        for (std::size_t r = 0; r < cfg.runs; ++r) {
            auto redrawn = randomize_assignment(ds, derive_seed(cfg.seeds.front(), "vdec.run", r));
            auto relabeled = relabel(redrawn.base, fitted.folds, fitted.primaries);
            for (std::size_t i = 0; i < n; ++i)
                records.records[i].push_back(
                    {redrawn.base.w[i], relabeled.labels[i], hat[i]});
        }
    } else {
        const AlgorithmKind kind = algorithm_from_string(src);
        for (std::size_t r = 0; r < cfg.runs; ++r) {
            const std::uint64_t run_seed = derive_seed(cfg.seeds.front(), "vdec.run", r);
            auto redrawn = randomize_assignment(ds, run_seed);
            auto base = cfg.base_cfg;
            base.seed = derive_seed(run_seed, "vdec.fit");
            auto model = fit_cate(kind, redrawn.base, base, prop);
            auto target = model.learning_target(redrawn.base);
            if (!target)
                throw ConfigError("verify_decomposition: algorithm has no learning target");
            auto hat = model.predict_cate(redrawn.base.x);
            for (std::size_t i = 0; i < n; ++i)
                records.records[i].push_back(
                    {redrawn.base.w[i], target->values[i], hat[i]});
        }
    }

    ResultTable table;
    double max_residual = 0.0, max_sdmg = 0.0;
    double mean_wvg = 0.0, mean_sdmg = 0.0, mean_total = 0.0;
    std::size_t decomposed = 0;
    const std::string cell = src;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t n0 = 0, n1 = 0;
        for (const auto& r : records.records[i]) (r.w ? n1 : n0)++;
        if (n0 < 2 || n1 < 2) continue;
        auto rep = decompose(records, i, cfg.pi_mode);
        max_residual = std::max(max_residual, rep.identity_residual);
        max_sdmg = std::max(max_sdmg, rep.sdmg);
        mean_wvg += rep.wvg;
        mean_sdmg += rep.sdmg;
        mean_total += rep.total;
        ++decomposed;
        table.rows.push_back({cell, "residual", "i=" + std::to_string(i), rep.identity_residual});
        table.rows.push_back({cell, "sdmg", "i=" + std::to_string(i), rep.sdmg});
        table.rows.push_back({cell, "wvg", "i=" + std::to_string(i), rep.wvg});
        table.rows.push_back({cell, "model_error", "i=" + std::to_string(i), rep.model_error});
        table.rows.push_back({cell, "model_target_cov", "i=" + std::to_string(i), rep.model_target_cov});
        table.rows.push_back({cell, "target_bias_sq", "i=" + std::to_string(i), rep.target_bias_sq});
        table.rows.push_back({cell, "total", "i=" + std::to_string(i), rep.total});
    }
    if (decomposed == 0) throw DiagnosticError("verify_decomposition: no instance had 2+ records per group");
    const double dn = static_cast<double>(decomposed);
    table.rows.push_back({cell, "max_residual", "aggregate", max_residual});
    table.rows.push_back({cell, "max_sdmg", "aggregate", max_sdmg});
    table.rows.push_back({cell, "mean_wvg", "aggregate", mean_wvg / dn});
    table.rows.push_back({cell, "mean_sdmg", "aggregate", mean_sdmg / dn});
    table.rows.push_back({cell, "mean_total", "aggregate", mean_total / dn});
    table.rows.push_back({cell, "n_decomposed", "aggregate", dn});
    return table;
}

inline ResultTable run_experiment(const ExperimentConfig& cfg, std::size_t threads = 1) {
    switch (cfg.kind) {
        case ExperimentKind::BenchmarkPehe: return run_benchmark_pehe(cfg, threads);
        case ExperimentKind::SweepDiscrepancy:
        case ExperimentKind::SweepComplexity: return run_sweep_discrepancy(cfg, threads);
        case ExperimentKind::AuucEval: return run_auuc_eval(cfg, threads);
        case ExperimentKind::VerifyDecomposition: return run_verify_decomposition(cfg, threads);
    }
    throw ConfigError("unreachable experiment kind");
}

// CSV layout: one optional '#'-prefixed timestamp line, then a header row,
// then data rows. Comparisons for reproducibility skip '#' lines.
inline void write_result_csv(std::ostream& out, const ResultTable& table,
                             const std::string& timestamp = "") {
    if (!timestamp.empty()) out << "# generated: " << timestamp << "\n";
    out << "cell,metric,seed,value\n";
    out.precision(17);
    for (const auto& r : table.rows)
        out << r.cell << "," << r.metric << "," << r.seed << "," << r.value << "\n";
}

}  // namespace claga
