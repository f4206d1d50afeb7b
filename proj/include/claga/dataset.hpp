#pragma once
// Data containers, synthetic generators with known ground truth, fold partitioning.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "claga/errors.hpp"
#include "claga/rng.hpp"

namespace claga {

class CovariateMatrix {
public:
    CovariateMatrix() = default;
    CovariateMatrix(std::size_t n, std::size_t d) : n_(n), d_(d), values_(n * d, 0.0) {
        if (n < 1 || d < 1) throw ConfigError("CovariateMatrix requires n >= 1 and d >= 1");
    }
    CovariateMatrix(std::size_t n, std::size_t d, std::vector<double> values)
        : n_(n), d_(d), values_(std::move(values)) {
        if (n < 1 || d < 1) throw ConfigError("CovariateMatrix requires n >= 1 and d >= 1");
        if (values_.size() != n * d) throw DimensionError("CovariateMatrix value count mismatch");
        for (double v : values_)
            if (!std::isfinite(v)) throw ParseError("CovariateMatrix entries must be finite");
    }

    std::size_t rows() const { return n_; }
    std::size_t cols() const { return d_; }

    double operator()(std::size_t i, std::size_t j) const { return values_[i * d_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return values_[i * d_ + j]; }

    std::span<const double> row(std::size_t i) const {
        return {values_.data() + i * d_, d_};
    }

    // rows selected by index, in the given order
    CovariateMatrix select(std::span<const std::size_t> idx) const {
        CovariateMatrix out(idx.size(), d_);
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t j = 0; j < d_; ++j) out(r, j) = (*this)(idx[r], j);
        return out;
    }

    // appends one extra column (used by the single-model learner for W)
    CovariateMatrix with_column(std::span<const double> col) const {
        if (col.size() != n_) throw DimensionError("appended column length mismatch");
        CovariateMatrix out(n_, d_ + 1);
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < d_; ++j) out(i, j) = (*this)(i, j);
            out(i, d_) = col[i];
        }
        return out;
    }

private:
    std::size_t n_ = 0, d_ = 0;
    std::vector<double> values_;
};

struct ObservedDataset {
    CovariateMatrix x;
    std::vector<int> w;       // strictly {0,1}
    std::vector<double> y;

    std::size_t size() const { return w.size(); }

    void validate() const {
        if (x.rows() != w.size() || w.size() != y.size())
            throw DimensionError("ObservedDataset: x/w/y lengths disagree");
        for (int wi : w)
            if (wi != 0 && wi != 1) throw ParseError("ObservedDataset: w must be binary");
    }

    bool both_groups_present() const {
        bool has0 = false, has1 = false;
        for (int wi : w) (wi ? has1 : has0) = true;
        return has0 && has1;
    }

    ObservedDataset select(std::span<const std::size_t> idx) const {
        ObservedDataset out;
        out.x = x.select(idx);
        out.w.reserve(idx.size());
        out.y.reserve(idx.size());
        for (std::size_t i : idx) {
            out.w.push_back(w[i]);
            out.y.push_back(y[i]);
        }
        return out;
    }
};

struct SyntheticDataset {
    ObservedDataset base;
    std::vector<double> mu0, mu1, tau;
    std::vector<double> y0, y1;
    double treat_prob = 0.5;

    std::size_t size() const { return base.size(); }

    void validate() const {
        base.validate();
        const std::size_t n = base.size();
        if (mu0.size() != n || mu1.size() != n || tau.size() != n || y0.size() != n || y1.size() != n)
            throw DimensionError("SyntheticDataset: vector lengths disagree");
        if (!(treat_prob > 0.0 && treat_prob < 1.0))
            throw ConfigError("SyntheticDataset: treat_prob must lie in (0,1)");
        for (std::size_t i = 0; i < n; ++i) {
            // stated additively so it holds bitwise: mu1 is built as mu0 + tau
            if (mu1[i] != mu0[i] + tau[i])
                throw ParseError("SyntheticDataset: mu1 != mu0 + tau at row " + std::to_string(i));
            if (base.y[i] != (base.w[i] ? y1[i] : y0[i]))
                throw ParseError("SyntheticDataset: consistency violated at row " + std::to_string(i));
        }
    }
};

enum class DgpKind { ConstantEffect, LinearEffect, NonlinearEffect };

inline std::string to_string(DgpKind k) {
    switch (k) {
        case DgpKind::ConstantEffect: return "constant_effect";
        case DgpKind::LinearEffect: return "linear_effect";
        case DgpKind::NonlinearEffect: return "nonlinear_effect";
    }
    return "?";
}

inline DgpKind dgp_kind_from_string(const std::string& s) {
    if (s == "constant_effect") return DgpKind::ConstantEffect;
    if (s == "linear_effect") return DgpKind::LinearEffect;
    if (s == "nonlinear_effect") return DgpKind::NonlinearEffect;
    throw ConfigError("unknown dgp_kind: " + s);
}

struct DGPConfig {
    std::size_t n = 1000;
    std::size_t d = 6;
    DgpKind dgp_kind = DgpKind::NonlinearEffect;
    double treat_prob = 0.5;
    double noise_sd = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 2) throw ConfigError("DGPConfig: n must be >= 2");
        if (d < 1) throw ConfigError("DGPConfig: d must be >= 1");
        if (!(treat_prob > 0.0 && treat_prob < 1.0))
            throw ConfigError("DGPConfig: treat_prob must lie in (0,1)");
        if (noise_sd < 0.0) throw ConfigError("DGPConfig: noise_sd must be >= 0");
    }
};

namespace detail {

inline double dgp_mu0(DgpKind kind, std::span<const double> x) {
    const std::size_t d = x.size();
    double lin = 0.0;
    for (std::size_t j = 0; j < d; ++j) lin += x[j] / static_cast<double>(j + 1);
    if (kind == DgpKind::NonlinearEffect) return lin + std::sin(2.0 * x[0]);
    return lin;
}

inline double dgp_tau(DgpKind kind, std::span<const double> x) {
    const std::size_t d = x.size();
    switch (kind) {
        case DgpKind::ConstantEffect:
            return 1.0;
        case DgpKind::LinearEffect: {
            double t = 0.0;
            for (std::size_t j = 0; j < std::min<std::size_t>(3, d); ++j)
                t += x[j] / static_cast<double>(j + 1);
            return t;
        }
        case DgpKind::NonlinearEffect: {
            const std::size_t j1 = std::min<std::size_t>(1, d - 1);
            const std::size_t j2 = std::min<std::size_t>(2, d - 1);
            return x[0] * x[j1] + (x[j2] > 0.3 ? 1.5 : 0.0);
        }
    }
    return 0.0;
}

}  // namespace detail

inline SyntheticDataset generate_synthetic(const DGPConfig& config) {
    config.validate();
    SyntheticDataset ds;
    ds.treat_prob = config.treat_prob;

    Rng rx(derive_seed(config.seed, "dgp.x"));
    ds.base.x = CovariateMatrix(config.n, config.d);
    for (std::size_t i = 0; i < config.n; ++i)
        for (std::size_t j = 0; j < config.d; ++j) ds.base.x(i, j) = rx.uniform(-1.0, 1.0);

    ds.mu0.resize(config.n);
    ds.mu1.resize(config.n);
    ds.tau.resize(config.n);
    for (std::size_t i = 0; i < config.n; ++i) {
        const auto row = ds.base.x.row(i);
        ds.mu0[i] = detail::dgp_mu0(config.dgp_kind, row);
        ds.tau[i] = detail::dgp_tau(config.dgp_kind, row);
        ds.mu1[i] = ds.mu0[i] + ds.tau[i];
    }

    Rng rnoise(derive_seed(config.seed, "dgp.noise"));
    ds.y0.resize(config.n);
    ds.y1.resize(config.n);
    for (std::size_t i = 0; i < config.n; ++i) {
        ds.y0[i] = ds.mu0[i] + (config.noise_sd > 0.0 ? rnoise.normal(0.0, config.noise_sd) : 0.0);
        ds.y1[i] = ds.mu1[i] + (config.noise_sd > 0.0 ? rnoise.normal(0.0, config.noise_sd) : 0.0);
    }

    Rng rw(derive_seed(config.seed, "dgp.w"));
    ds.base.w.resize(config.n);
    ds.base.y.resize(config.n);
    for (std::size_t i = 0; i < config.n; ++i) {
        ds.base.w[i] = rw.bernoulli(config.treat_prob) ? 1 : 0;
        ds.base.y[i] = ds.base.w[i] ? ds.y1[i] : ds.y0[i];
    }
    return ds;
}

// Redraw W ~ Bernoulli(treat_prob) and rebuild Y from the stored potential
// outcomes; everything else is untouched.
inline SyntheticDataset randomize_assignment(const SyntheticDataset& ds, std::uint64_t seed) {
    SyntheticDataset out = ds;
    Rng rw(derive_seed(seed, "reassign"));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.base.w[i] = rw.bernoulli(out.treat_prob) ? 1 : 0;
        out.base.y[i] = out.base.w[i] ? out.y1[i] : out.y0[i];
    }
    return out;
}

struct FoldAssignment {
    std::vector<std::size_t> fold_of;  // values in [0, k)
    std::size_t k = 0;

    std::vector<std::size_t> members_of(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] == fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> complement_of(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] != fold) out.push_back(i);
        return out;
    }
};

// Uniformly random balanced partition; fold sizes differ by at most one.
inline FoldAssignment kfold_partition(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("kfold_partition: k must be >= 2");
    if (k > n) throw ConfigError("kfold_partition: k must be <= n");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, "kfold"));
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_index(i + 1)]);
    FoldAssignment fa;
    fa.k = k;
    fa.fold_of.resize(n);
    for (std::size_t pos = 0; pos < n; ++pos) fa.fold_of[order[pos]] = pos % k;
    return fa;
}

// As above but each treatment group is distributed round-robin over folds,
// so no complement loses a whole group unless a group has < 2 members.
inline FoldAssignment kfold_partition_stratified(std::span<const int> w, std::size_t k,
                                                 std::uint64_t seed) {
    const std::size_t n = w.size();
    if (k < 2) throw ConfigError("kfold_partition: k must be >= 2");
    if (k > n) throw ConfigError("kfold_partition: k must be <= n");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, "kfold.strat"));
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_index(i + 1)]);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return w[a] < w[b]; });
    FoldAssignment fa;
    fa.k = k;
    fa.fold_of.resize(n);
    for (std::size_t pos = 0; pos < n; ++pos) fa.fold_of[order[pos]] = pos % k;
    return fa;
}

}  // namespace claga
