#pragma once
// Consistent relabeling across group assignments: K-fold primary estimators,
// out-of-sample relabeling, and a secondary regression on the relabels.

#include <cstdint>
#include <string>
#include <vector>

#include "claga/dataset.hpp"
#include "claga/errors.hpp"
#include "claga/gbm.hpp"
#include "claga/meta_learners.hpp"

namespace claga {

struct ClagaConfig {
    std::size_t k = 2;
    AlgorithmKind primary_kind = AlgorithmKind::TwoModel;
    BaseLearnerConfig primary_cfg;
    BaseLearnerConfig secondary_cfg;
    Propensity propensity = Propensity::estimate();
    std::size_t primary_replicates = 1;
    bool stratified = false;
    std::uint64_t seed = 0;

    void validate() const {
        if (k < 2) throw ConfigError("ClagaConfig: k must be >= 2");
        if (primary_replicates < 1) throw ConfigError("ClagaConfig: primary_replicates must be >= 1");
    }
};

struct RelabeledDataset {
    CovariateMatrix x;
    std::vector<double> labels;  // out-of-sample predictions, one per instance
};

// labels[i] comes from the primary model whose training folds excluded i.
// The labels read only x, never w or y, so they are invariant to mutating
// assignments after the primaries are fit.
inline RelabeledDataset relabel(const ObservedDataset& data, const FoldAssignment& folds,
                                const std::vector<std::vector<CateModel>>& primaries) {
    if (primaries.size() != folds.k)
        throw FoldError("relabel: primary model count does not match fold count");
    RelabeledDataset out;
    out.x = data.x;
    out.labels.resize(data.size());
    for (std::size_t j = 0; j < folds.k; ++j) {
        auto members = folds.members_of(j);
        if (members.empty()) continue;
        auto xm = data.x.select(members);
        std::vector<double> acc(members.size(), 0.0);
        for (const auto& model : primaries[j]) {
            auto p = model.predict_cate(xm);
            for (std::size_t r = 0; r < p.size(); ++r) acc[r] += p[r];
        }
        const double scale = 1.0 / static_cast<double>(primaries[j].size());
        for (std::size_t r = 0; r < members.size(); ++r)
            out.labels[members[r]] = acc[r] * scale;
    }
    return out;
}

struct ClagaFitResult {
    CateModel secondary;       // final estimator g'
    FoldAssignment folds;
    std::vector<std::vector<CateModel>> primaries;  // [fold][replicate]
    RelabeledDataset relabeled;
};

inline ClagaFitResult claga_fit_detailed(const ObservedDataset& data, const ClagaConfig& cfg) {
    cfg.validate();
    data.validate();
    if (cfg.k > data.size()) throw ConfigError("claga_fit: k exceeds dataset size");

    ClagaFitResult result;
    result.folds = cfg.stratified
                       ? kfold_partition_stratified(data.w, cfg.k, derive_seed(cfg.seed, "claga.folds"))
                       : kfold_partition(data.size(), cfg.k, derive_seed(cfg.seed, "claga.folds"));

    result.primaries.resize(cfg.k);
    for (std::size_t j = 0; j < cfg.k; ++j) {
        auto train = data.select(result.folds.complement_of(j));
        if (!train.both_groups_present())
            throw FoldError("claga_fit: complement of fold " + std::to_string(j) +
                            " is missing a treatment group");
        for (std::size_t r = 0; r < cfg.primary_replicates; ++r) {
            auto pc = cfg.primary_cfg;
            pc.seed = derive_seed(cfg.seed, "claga.primary", j * cfg.primary_replicates + r);
            result.primaries[j].push_back(fit_cate(cfg.primary_kind, train, pc, cfg.propensity));
        }
    }

    result.relabeled = relabel(data, result.folds, result.primaries);

    auto sc = cfg.secondary_cfg;
    sc.seed = derive_seed(cfg.seed, "claga.secondary");
    CateModel secondary;
    secondary.kind = AlgorithmKind::DRLearner;  // predict path: plain final-stage regressor
    secondary.final_stage = fit_regressor(result.relabeled.x, result.relabeled.labels, sc);
    secondary.training_targets = result.relabeled.labels;
    result.secondary = std::move(secondary);
    return result;
}

inline CateModel claga_fit(const ObservedDataset& data, const ClagaConfig& cfg) {
    return claga_fit_detailed(data, cfg).secondary;
}

}  // namespace claga
