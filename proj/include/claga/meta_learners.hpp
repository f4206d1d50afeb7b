#pragma once
// Five CATE estimation strategies behind one fit/predict interface.
// Each learner that regresses toward an explicit effect-scale target also
// exposes that per-instance target for the error-decomposition machinery.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "claga/dataset.hpp"
#include "claga/errors.hpp"
#include "claga/gbm.hpp"
#include "claga/rng.hpp"

namespace claga {

enum class AlgorithmKind { SingleModel, TwoModel, XLearner, RLearner, DRLearner };

inline std::string to_string(AlgorithmKind k) {
    switch (k) {
        case AlgorithmKind::SingleModel: return "single";
        case AlgorithmKind::TwoModel: return "two";
        case AlgorithmKind::XLearner: return "x";
        case AlgorithmKind::RLearner: return "r";
        case AlgorithmKind::DRLearner: return "dr";
    }
    return "?";
}

inline AlgorithmKind algorithm_from_string(const std::string& s) {
    if (s == "single") return AlgorithmKind::SingleModel;
    if (s == "two") return AlgorithmKind::TwoModel;
    if (s == "x") return AlgorithmKind::XLearner;
    if (s == "r") return AlgorithmKind::RLearner;
    if (s == "dr") return AlgorithmKind::DRLearner;
    throw ConfigError("unknown algorithm: " + s + " (expected single/two/x/r/dr)");
}

// Known constant propensity, or estimate it from (x, w).
struct Propensity {
    std::optional<double> known;

    static Propensity known_value(double pi) {
        if (!(pi > 0.0 && pi < 1.0)) throw ConfigError("known propensity must lie in (0,1)");
        return Propensity{pi};
    }
    static Propensity estimate() { return Propensity{std::nullopt}; }
};

struct PseudoOutcome {
    std::vector<double> values;
    AlgorithmKind defined_for;
};

class CateModel {
public:
    AlgorithmKind kind = AlgorithmKind::TwoModel;

    std::vector<double> predict_cate(const CovariateMatrix& x) const {
        if (custom_predict) return custom_predict(x);
        switch (kind) {
            case AlgorithmKind::SingleModel: {
                std::vector<double> ones(x.rows(), 1.0), zeros(x.rows(), 0.0);
                auto p1 = single.predict(x.with_column(ones));
                auto p0 = single.predict(x.with_column(zeros));
                for (std::size_t i = 0; i < p1.size(); ++i) p1[i] -= p0[i];
                return p1;
            }
            case AlgorithmKind::TwoModel: {
                auto p1 = model1.predict(x);
                auto p0 = model0.predict(x);
                for (std::size_t i = 0; i < p1.size(); ++i) p1[i] -= p0[i];
                return p1;
            }
            case AlgorithmKind::XLearner: {
                auto t0 = effect0.predict(x);  // fit on control imputations
                auto t1 = effect1.predict(x);  // fit on treated imputations
                auto e = propensity_at(x);
                for (std::size_t i = 0; i < t0.size(); ++i)
                    t0[i] = e[i] * t0[i] + (1.0 - e[i]) * t1[i];
                return t0;
            }
            case AlgorithmKind::RLearner:
            case AlgorithmKind::DRLearner:
                return final_stage.predict(x);
        }
        throw ConfigError("unreachable algorithm kind");
    }

    // Per-instance effect-scale training target, where the algorithm has one.
    std::optional<PseudoOutcome> learning_target(const ObservedDataset& data) const {
        if (kind == AlgorithmKind::SingleModel || kind == AlgorithmKind::TwoModel)
            return std::nullopt;
        if (data.size() != training_targets.size())
            throw DimensionError("learning_target: dataset size differs from training set");
        return PseudoOutcome{training_targets, kind};
    }

    // internals, populated by fit_cate
    GbmRegressor single, model0, model1, effect0, effect1, final_stage;
    std::optional<double> known_pi;
    PropensityModel prop_model;
    bool has_prop_model = false;
    std::vector<double> training_targets;  // effect-scale targets for X/R/DR

    // overrides the built-in prediction path when set (fixed-model diagnostics)
    std::function<std::vector<double>(const CovariateMatrix&)> custom_predict;

    std::vector<double> propensity_at(const CovariateMatrix& x) const {
        if (known_pi) return std::vector<double>(x.rows(), *known_pi);
        if (!has_prop_model) throw ConfigError("model has no propensity source");
        return prop_model.predict(x);
    }
};

namespace detail {

inline BaseLearnerConfig with_seed(BaseLearnerConfig cfg, std::uint64_t seed) {
    cfg.seed = seed;
    return cfg;
}

inline std::vector<std::size_t> rows_where(std::span<const int> w, int value) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < w.size(); ++i)
        if (w[i] == value) out.push_back(i);
    return out;
}

// Propensity per training row: the known constant, or 2-fold cross-fitted
// estimates so no row's propensity was fit on its own label.
inline std::vector<double> crossfit_propensity(const ObservedDataset& data,
                                               const BaseLearnerConfig& cfg,
                                               std::uint64_t seed, CateModel& model) {
    const std::size_t n = data.size();
    if (model.known_pi) return std::vector<double>(n, *model.known_pi);
    auto folds = kfold_partition_stratified(data.w, 2, derive_seed(seed, "prop.folds"));
    std::vector<double> e(n);
    for (std::size_t j = 0; j < 2; ++j) {
        auto train_idx = folds.complement_of(j);
        auto train = data.select(train_idx);
        if (!train.both_groups_present())
            throw FoldError("propensity cross-fit fold " + std::to_string(j) +
                            ": complement has a single class");
        auto m = fit_propensity(train.x, train.w, with_seed(cfg, derive_seed(seed, "prop", j)));
        for (std::size_t i : folds.members_of(j)) e[i] = m.predict_row(data.x.row(i));
    }
    // full-data model kept for test-time propensity
    model.prop_model = fit_propensity(data.x, data.w, with_seed(cfg, derive_seed(seed, "prop.full")));
    model.has_prop_model = true;
    return e;
}

// 2-fold cross-fitted outcome-model predictions mu0/mu1 for every training row.
inline void crossfit_outcomes(const ObservedDataset& data, const BaseLearnerConfig& cfg,
                              std::uint64_t seed, std::vector<double>& mu0,
                              std::vector<double>& mu1) {
    const std::size_t n = data.size();
    mu0.assign(n, 0.0);
    mu1.assign(n, 0.0);
    auto folds = kfold_partition_stratified(data.w, 2, derive_seed(seed, "mu.folds"));
    for (std::size_t j = 0; j < 2; ++j) {
        auto train_idx = folds.complement_of(j);
        auto train = data.select(train_idx);
        auto c_rows = rows_where(train.w, 0);
        auto t_rows = rows_where(train.w, 1);
        if (c_rows.empty() || t_rows.empty())
            throw FoldError("outcome cross-fit fold " + std::to_string(j) +
                            ": complement is missing a treatment group");
        auto dc = train.select(c_rows);
        auto dt = train.select(t_rows);
        auto m0 = fit_regressor(dc.x, dc.y, with_seed(cfg, derive_seed(seed, "mu0", j)));
        auto m1 = fit_regressor(dt.x, dt.y, with_seed(cfg, derive_seed(seed, "mu1", j)));
        for (std::size_t i : folds.members_of(j)) {
            mu0[i] = m0.predict_row(data.x.row(i));
            mu1[i] = m1.predict_row(data.x.row(i));
        }
    }
}

}  // namespace detail

inline CateModel fit_cate(AlgorithmKind kind, const ObservedDataset& data,
                          const BaseLearnerConfig& base_cfg, const Propensity& propensity) {
    data.validate();
    if (!data.both_groups_present())
        throw ConfigError("fit_cate: both treatment groups must be nonempty");
    const std::size_t n = data.size();
    const std::uint64_t seed = base_cfg.seed;

    CateModel model;
    model.kind = kind;
    model.known_pi = propensity.known;

    auto control_rows = detail::rows_where(data.w, 0);
    auto treated_rows = detail::rows_where(data.w, 1);
    auto dc = data.select(control_rows);
    auto dt = data.select(treated_rows);

    switch (kind) {
        case AlgorithmKind::SingleModel: {
            std::vector<double> wcol(n);
            for (std::size_t i = 0; i < n; ++i) wcol[i] = static_cast<double>(data.w[i]);
            model.single = fit_regressor(data.x.with_column(wcol), data.y,
                                         detail::with_seed(base_cfg, derive_seed(seed, "single")));
            break;
        }
        case AlgorithmKind::TwoModel: {
            model.model0 = fit_regressor(dc.x, dc.y,
                                         detail::with_seed(base_cfg, derive_seed(seed, "two.m0")));
            model.model1 = fit_regressor(dt.x, dt.y,
                                         detail::with_seed(base_cfg, derive_seed(seed, "two.m1")));
            break;
        }
        case AlgorithmKind::XLearner: {
            auto m0 = fit_regressor(dc.x, dc.y, detail::with_seed(base_cfg, derive_seed(seed, "x.m0")));
            auto m1 = fit_regressor(dt.x, dt.y, detail::with_seed(base_cfg, derive_seed(seed, "x.m1")));
            // imputed effects: treated D1 = y - mu0(x), control D0 = mu1(x) - y
            std::vector<double> d1(dt.size()), d0(dc.size());
            for (std::size_t r = 0; r < dt.size(); ++r)
                d1[r] = dt.y[r] - m0.predict_row(dt.x.row(r));
            for (std::size_t r = 0; r < dc.size(); ++r)
                d0[r] = m1.predict_row(dc.x.row(r)) - dc.y[r];
            model.effect1 = fit_regressor(dt.x, d1,
                                          detail::with_seed(base_cfg, derive_seed(seed, "x.e1")));
            model.effect0 = fit_regressor(dc.x, d0,
                                          detail::with_seed(base_cfg, derive_seed(seed, "x.e0")));
            if (!model.known_pi) {
                model.prop_model = fit_propensity(
                    data.x, data.w, detail::with_seed(base_cfg, derive_seed(seed, "x.prop")));
                model.has_prop_model = true;
            }
            model.training_targets.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                model.training_targets[i] =
                    data.w[i] ? data.y[i] - m0.predict_row(data.x.row(i))
                              : m1.predict_row(data.x.row(i)) - data.y[i];
            model.model0 = std::move(m0);
            model.model1 = std::move(m1);
            break;
        }
        case AlgorithmKind::RLearner: {
            auto e = detail::crossfit_propensity(data, base_cfg, derive_seed(seed, "r"), model);
            // cross-fitted marginal outcome m(x) = E[Y|x]
            std::vector<double> m_hat(n, 0.0);
            auto folds = kfold_partition_stratified(data.w, 2, derive_seed(seed, "r.m.folds"));
            for (std::size_t j = 0; j < 2; ++j) {
                auto train = data.select(folds.complement_of(j));
                auto m = fit_regressor(train.x, train.y,
                                       detail::with_seed(base_cfg, derive_seed(seed, "r.m", j)));
                for (std::size_t i : folds.members_of(j)) m_hat[i] = m.predict_row(data.x.row(i));
            }
            std::vector<double> target(n), weight(n);
            for (std::size_t i = 0; i < n; ++i) {
                double we = static_cast<double>(data.w[i]) - e[i];
                if (std::abs(we) < 0.01) we = we < 0.0 ? -0.01 : 0.01;
                target[i] = (data.y[i] - m_hat[i]) / we;
                weight[i] = we * we;
            }
            model.training_targets = target;
            model.final_stage = fit_regressor(data.x, target, weight,
                                              detail::with_seed(base_cfg, derive_seed(seed, "r.final")));
            break;
        }
        case AlgorithmKind::DRLearner: {
            auto e = detail::crossfit_propensity(data, base_cfg, derive_seed(seed, "dr"), model);
            std::vector<double> mu0, mu1;
            detail::crossfit_outcomes(data, base_cfg, derive_seed(seed, "dr"), mu0, mu1);
            std::size_t clipped = 0;
            std::vector<double> target(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double ei = e[i];
                if (ei <= 0.011 || ei >= 0.989) ++clipped;
                target[i] = mu1[i] - mu0[i] +
                            static_cast<double>(data.w[i]) * (data.y[i] - mu1[i]) / ei -
                            (1.0 - static_cast<double>(data.w[i])) * (data.y[i] - mu0[i]) / (1.0 - ei);
            }
            if (clipped == n)
                throw DiagnosticError("fit_cate(dr): every propensity estimate is at the clip bound");
            model.training_targets = target;
            model.final_stage = fit_regressor(data.x, target,
                                              detail::with_seed(base_cfg, derive_seed(seed, "dr.final")));
            break;
        }
    }
    return model;
}

inline std::vector<double> predict_cate(const CateModel& model, const CovariateMatrix& x) {
    return model.predict_cate(x);
}

inline std::optional<PseudoOutcome> learning_target(const CateModel& model,
                                                    const ObservedDataset& data) {
    return model.learning_target(data);
}

}  // namespace claga
