#pragma once
// Gradient-boosted regression trees, grown leaf-wise with exact greedy splits.
// Squared-error loss for regression, logistic loss for propensity estimation.
// No histogram binning: split search scans sorted feature values, so small
// hand-checkable oracles can verify splits exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "claga/dataset.hpp"
#include "claga/errors.hpp"
#include "claga/rng.hpp"

namespace claga {

struct BaseLearnerConfig {
    std::size_t n_estimators = 100;
    std::size_t num_leaves = 31;
    double learning_rate = 0.1;
    double subsample = 1.0;
    std::size_t subsample_freq = 1;
    double min_samples_leaf = 20.0;  // weighted row count
    std::uint64_t seed = 0;

    void validate() const {
        if (num_leaves < 2) throw ConfigError("BaseLearnerConfig: num_leaves must be >= 2");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0))
            throw ConfigError("BaseLearnerConfig: learning_rate must lie in (0,1]");
        if (!(subsample > 0.0 && subsample <= 1.0))
            throw ConfigError("BaseLearnerConfig: subsample must lie in (0,1]");
        if (min_samples_leaf < 1.0)
            throw ConfigError("BaseLearnerConfig: min_samples_leaf must be >= 1");
    }
};

struct TreeNode {
    int feature = -1;            // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;          // leaf value, unshrunk

    bool is_leaf() const { return feature < 0; }
};

class DecisionTree {
public:
    std::vector<TreeNode> nodes;

    double predict_row(std::span<const double> row) const {
        int idx = 0;
        while (!nodes[idx].is_leaf())
            idx = row[nodes[idx].feature] <= nodes[idx].threshold ? nodes[idx].left
                                                                  : nodes[idx].right;
        return nodes[idx].value;
    }

    std::size_t leaf_count() const {
        std::size_t c = 0;
        for (const auto& n : nodes) c += n.is_leaf();
        return c;
    }
};

namespace detail {

struct SplitCandidate {
    double gain = -std::numeric_limits<double>::infinity();
    int feature = -1;
    double threshold = 0.0;
};

struct LeafWork {
    int node = -1;
    std::vector<std::size_t> rows;
    double sum_g = 0.0, sum_h = 0.0, sum_w = 0.0;
    SplitCandidate best;
    std::size_t order = 0;  // creation order, breaks gain ties deterministically
};

// Exact best split of one leaf: for each feature, sort the leaf's rows by
// value and scan prefix Newton statistics. Gain ties resolve to the lowest
// (feature, threshold) because the scan visits candidates in that order and
// only a strict improvement replaces the incumbent.
inline SplitCandidate find_best_split(const CovariateMatrix& x, std::span<const double> g,
                                      std::span<const double> h, std::span<const double> wt,
                                      const LeafWork& leaf, double min_leaf_weight) {
    SplitCandidate best;
    const std::size_t m = leaf.rows.size();
    if (m < 2) return best;
    const double parent_score = leaf.sum_g * leaf.sum_g / std::max(leaf.sum_h, 1e-12);

    std::vector<std::size_t> order(leaf.rows);
    for (std::size_t f = 0; f < x.cols(); ++f) {
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
        double gl = 0.0, hl = 0.0, wl = 0.0;
        for (std::size_t r = 0; r + 1 < m; ++r) {
            const std::size_t i = order[r];
            gl += g[i];
            hl += h[i];
            wl += wt[i];
            const double v = x(i, f);
            const double vnext = x(order[r + 1], f);
            if (v == vnext) continue;
            const double wr = leaf.sum_w - wl;
            if (wl < min_leaf_weight || wr < min_leaf_weight) continue;
            const double gr = leaf.sum_g - gl;
            const double hr = leaf.sum_h - hl;
            const double gain = gl * gl / std::max(hl, 1e-12) +
                                gr * gr / std::max(hr, 1e-12) - parent_score;
            if (gain > best.gain) {
                best.gain = gain;
                best.feature = static_cast<int>(f);
                best.threshold = v + 0.5 * (vnext - v);
            }
        }
    }
    return best;
}

// One tree, leaf-wise: repeatedly split the leaf with the largest gain until
// num_leaves is reached or no split improves.
inline DecisionTree build_tree(const CovariateMatrix& x, std::span<const double> g,
                               std::span<const double> h, std::span<const double> wt,
                               std::span<const std::size_t> rows,
                               const BaseLearnerConfig& cfg) {
    DecisionTree tree;
    tree.nodes.emplace_back();

    std::vector<LeafWork> open;
    LeafWork root;
    root.node = 0;
    root.rows.assign(rows.begin(), rows.end());
    for (std::size_t i : root.rows) {
        root.sum_g += g[i];
        root.sum_h += h[i];
        root.sum_w += wt[i];
    }
    tree.nodes[0].value = -root.sum_g / std::max(root.sum_h, 1e-12);
    root.best = find_best_split(x, g, h, wt, root, cfg.min_samples_leaf);
    root.order = 0;
    open.push_back(std::move(root));

    std::size_t n_leaves = 1;
    std::size_t next_order = 1;
    while (n_leaves < cfg.num_leaves) {
        std::size_t pick = open.size();
        for (std::size_t i = 0; i < open.size(); ++i) {
            if (open[i].best.gain <= 1e-12) continue;
            if (pick == open.size() || open[i].best.gain > open[pick].best.gain ||
                (open[i].best.gain == open[pick].best.gain && open[i].order < open[pick].order))
                pick = i;
        }
        if (pick == open.size()) break;

        LeafWork leaf = std::move(open[pick]);
        open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));

        const int li = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        const int ri = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[leaf.node].feature = leaf.best.feature;
        tree.nodes[leaf.node].threshold = leaf.best.threshold;
        tree.nodes[leaf.node].left = li;
        tree.nodes[leaf.node].right = ri;

        LeafWork lw, rw;
        lw.node = li;
        rw.node = ri;
        for (std::size_t i : leaf.rows) {
            auto& side = x(i, leaf.best.feature) <= leaf.best.threshold ? lw : rw;
            side.rows.push_back(i);
            side.sum_g += g[i];
            side.sum_h += h[i];
            side.sum_w += wt[i];
        }
        for (auto* child : {&lw, &rw}) {
            tree.nodes[child->node].value = -child->sum_g / std::max(child->sum_h, 1e-12);
            child->best = find_best_split(x, g, h, wt, *child, cfg.min_samples_leaf);
            child->order = next_order++;
            open.push_back(std::move(*child));
        }
        ++n_leaves;
    }
    return tree;
}

inline std::vector<std::size_t> bagging_rows(std::size_t n, double rate, Rng& rng) {
    if (rate >= 1.0) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    const auto take = std::max<std::size_t>(1, static_cast<std::size_t>(rate * static_cast<double>(n)));
    for (std::size_t i = 0; i < take; ++i)
        std::swap(pool[i], pool[i + rng.uniform_index(n - i)]);
    pool.resize(take);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace detail

class GbmRegressor {
public:
    BaseLearnerConfig config;
    double base_score = 0.0;
    std::vector<DecisionTree> trees;
    std::size_t n_features = 0;

    std::size_t n_trees_built() const { return trees.size(); }

    double predict_row(std::span<const double> row) const {
        double f = base_score;
        for (const auto& t : trees) f += config.learning_rate * t.predict_row(row);
        return f;
    }

    std::vector<double> predict(const CovariateMatrix& x) const {
        if (x.cols() != n_features) throw DimensionError("predict: feature count mismatch");
        std::vector<double> out(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict_row(x.row(i));
        return out;
    }
};

inline GbmRegressor fit_regressor(const CovariateMatrix& x, std::span<const double> targets,
                                  std::span<const double> weights,
                                  const BaseLearnerConfig& config) {
    config.validate();
    const std::size_t n = x.rows();
    if (targets.size() != n) throw DimensionError("fit_regressor: target length mismatch");
    std::vector<double> wt(weights.begin(), weights.end());
    if (wt.empty()) wt.assign(n, 1.0);
    if (wt.size() != n) throw DimensionError("fit_regressor: weight length mismatch");
    double wsum = 0.0, wysum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (wt[i] < 0.0) throw ConfigError("fit_regressor: negative weight");
        wsum += wt[i];
        wysum += wt[i] * targets[i];
    }
    if (wsum <= 0.0) throw ConfigError("fit_regressor: weights sum to zero");

    GbmRegressor model;
    model.config = config;
    model.n_features = x.cols();
    model.base_score = wysum / wsum;

    std::vector<double> pred(n, model.base_score);
    std::vector<double> g(n), h(n);
    Rng bag_rng(derive_seed(config.seed, "bagging"));
    std::vector<std::size_t> rows;
    for (std::size_t t = 0; t < config.n_estimators; ++t) {
        if (rows.empty() || (config.subsample_freq > 0 && t % config.subsample_freq == 0))
            rows = detail::bagging_rows(n, config.subsample, bag_rng);
        for (std::size_t i = 0; i < n; ++i) {
            g[i] = wt[i] * (pred[i] - targets[i]);
            h[i] = wt[i];
        }
        DecisionTree tree = detail::build_tree(x, g, h, wt, rows, config);
        for (std::size_t i = 0; i < n; ++i)
            pred[i] += config.learning_rate * tree.predict_row(x.row(i));
        model.trees.push_back(std::move(tree));
    }
    return model;
}

inline GbmRegressor fit_regressor(const CovariateMatrix& x, std::span<const double> targets,
                                  const BaseLearnerConfig& config) {
    return fit_regressor(x, targets, {}, config);
}

class PropensityModel {
public:
    BaseLearnerConfig config;
    double base_logit = 0.0;
    std::vector<DecisionTree> trees;
    std::size_t n_features = 0;
    double clip_bound = 0.01;

    double predict_row(std::span<const double> row) const {
        double f = base_logit;
        for (const auto& t : trees) f += config.learning_rate * t.predict_row(row);
        const double p = 1.0 / (1.0 + std::exp(-f));
        return std::clamp(p, clip_bound, 1.0 - clip_bound);
    }

    std::vector<double> predict(const CovariateMatrix& x) const {
        if (x.cols() != n_features) throw DimensionError("predict: feature count mismatch");
        std::vector<double> out(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict_row(x.row(i));
        return out;
    }
};

inline PropensityModel fit_propensity(const CovariateMatrix& x, std::span<const int> w,
                                      const BaseLearnerConfig& config,
                                      double clip_bound = 0.01) {
    config.validate();
    if (!(clip_bound > 0.0 && clip_bound < 0.5))
        throw ConfigError("fit_propensity: clip_bound must lie in (0, 0.5)");
    const std::size_t n = x.rows();
    if (w.size() != n) throw DimensionError("fit_propensity: label length mismatch");
    std::size_t n1 = 0;
    for (int wi : w) n1 += static_cast<std::size_t>(wi);
    if (n1 == 0 || n1 == n) throw ConfigError("fit_propensity: both classes must be present");

    PropensityModel model;
    model.config = config;
    model.n_features = x.cols();
    model.clip_bound = clip_bound;
    const double p0 = std::clamp(static_cast<double>(n1) / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
    model.base_logit = std::log(p0 / (1.0 - p0));

    std::vector<double> f(n, model.base_logit);
    std::vector<double> g(n), h(n);
    std::vector<double> wt(n, 1.0);
    Rng bag_rng(derive_seed(config.seed, "bagging"));
    std::vector<std::size_t> rows;
    for (std::size_t t = 0; t < config.n_estimators; ++t) {
        if (rows.empty() || (config.subsample_freq > 0 && t % config.subsample_freq == 0))
            rows = detail::bagging_rows(n, config.subsample, bag_rng);
        for (std::size_t i = 0; i < n; ++i) {
            const double p = 1.0 / (1.0 + std::exp(-f[i]));
            g[i] = p - static_cast<double>(w[i]);
            h[i] = std::max(p * (1.0 - p), 1e-6);
        }
        DecisionTree tree = detail::build_tree(x, g, h, wt, rows, config);
        for (std::size_t i = 0; i < n; ++i)
            f[i] += config.learning_rate * tree.predict_row(x.row(i));
        model.trees.push_back(std::move(tree));
    }
    return model;
}

}  // namespace claga
