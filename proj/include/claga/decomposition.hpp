#pragma once
// Five-term decomposition of per-instance squared CATE error:
//   total = model_error + model_target_cov + wvg + sdmg + target_bias_sq
// With pi set to the empirical group fraction and uncorrected (population)
// variances, the identity holds exactly for the empirical record measure.
// Bessel-corrected variances would break it; do not "fix" that.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "claga/errors.hpp"

namespace claga {

struct RunRecord {
    int w;              // assignment drawn for this run
    double tilde_tau;   // learning target realized under that assignment
    double hat_tau;     // model prediction for this instance in this run
};

struct RunRecordSet {
    // records[i] spans the retrains of instance i
    std::vector<std::vector<RunRecord>> records;
    std::vector<double> tau_true;
    double pi = 0.5;

    std::size_t n_instances() const { return records.size(); }
};

enum class PiMode { Known, Empirical };

struct DecompositionReport {
    double model_error = 0.0;
    double model_target_cov = 0.0;
    double wvg = 0.0;
    double sdmg = 0.0;
    double target_bias_sq = 0.0;
    double total = 0.0;
    double identity_residual = 0.0;

    double term_sum() const {
        return model_error + model_target_cov + wvg + sdmg + target_bias_sq;
    }
};

// Law of total variance for the two-component mixture indexed by W.
inline double mixture_variance(double pi, double m0, double v0, double m1, double v1) {
    if (v0 < 0.0 || v1 < 0.0) throw ConfigError("mixture_variance: negative variance input");
    if (!(pi >= 0.0 && pi <= 1.0)) throw ConfigError("mixture_variance: pi must lie in [0,1]");
    const double dm = m0 - m1;
    return (1.0 - pi) * v0 + pi * v1 + pi * (1.0 - pi) * dm * dm;
}

inline DecompositionReport decompose(const RunRecordSet& records, std::size_t instance,
                                     PiMode pi_mode = PiMode::Empirical) {
    if (instance >= records.n_instances())
        throw ConfigError("decompose: instance index out of range");
    const auto& recs = records.records[instance];
    const double tau = records.tau_true[instance];

    std::size_t n0 = 0, n1 = 0;
    for (const auto& r : recs) (r.w ? n1 : n0)++;
    if (n0 < 2 || n1 < 2)
        throw DiagnosticError("decompose: instance " + std::to_string(instance) +
                              " needs at least 2 records per group");
    const double n = static_cast<double>(recs.size());

    // constant groups get their exact mean and a zero variance; sum/count would
    // introduce rounding and a spurious nonzero gap between the groups
    double lo0 = recs[0].tilde_tau, hi0 = lo0, lo1 = lo0, hi1 = lo0;
    bool seen0 = false, seen1 = false;
    for (const auto& r : recs) {
        auto& lo = r.w ? lo1 : lo0;
        auto& hi = r.w ? hi1 : hi0;
        auto& seen = r.w ? seen1 : seen0;
        if (!seen) {
            lo = hi = r.tilde_tau;
            seen = true;
        } else {
            lo = std::min(lo, r.tilde_tau);
            hi = std::max(hi, r.tilde_tau);
        }
    }
    double m0 = 0.0, m1 = 0.0;
    for (const auto& r : recs) (r.w ? m1 : m0) += r.tilde_tau;
    m0 = lo0 == hi0 ? lo0 : m0 / static_cast<double>(n0);
    m1 = lo1 == hi1 ? lo1 : m1 / static_cast<double>(n1);
    double v0 = 0.0, v1 = 0.0;  // population (uncorrected) variances
    for (const auto& r : recs) {
        const double d = r.tilde_tau - (r.w ? m1 : m0);
        (r.w ? v1 : v0) += d * d;
    }
    v0 = lo0 == hi0 ? 0.0 : v0 / static_cast<double>(n0);
    v1 = lo1 == hi1 ? 0.0 : v1 / static_cast<double>(n1);

    const double pi = pi_mode == PiMode::Known ? records.pi
                                               : static_cast<double>(n1) / n;

    DecompositionReport rep;
    double mean_bias = 0.0;
    for (const auto& r : recs) {
        const double fit_err = r.hat_tau - r.tilde_tau;
        const double bias = tau - r.tilde_tau;
        const double tot = r.hat_tau - tau;
        rep.model_error += fit_err * fit_err;
        rep.model_target_cov += bias * fit_err;
        rep.total += tot * tot;
        mean_bias += bias;
    }
    rep.model_error /= n;
    rep.model_target_cov *= -2.0 / n;
    rep.total /= n;
    mean_bias /= n;

    rep.wvg = (1.0 - pi) * v0 + pi * v1;
    const double dm = m0 - m1;
    rep.sdmg = pi * (1.0 - pi) * dm * dm;
    rep.target_bias_sq = mean_bias * mean_bias;
    rep.identity_residual = std::abs(rep.term_sum() - rep.total);
    return rep;
}

// |model_target_cov| against its Cauchy-Schwarz ceiling.
struct CovarianceBound {
    double lhs = 0.0;
    double rhs = 0.0;
};

inline CovarianceBound covariance_bound(const RunRecordSet& records, std::size_t instance) {
    if (instance >= records.n_instances())
        throw ConfigError("covariance_bound: instance index out of range");
    const auto& recs = records.records[instance];
    if (recs.empty()) throw DiagnosticError("covariance_bound: no records");
    const double tau = records.tau_true[instance];
    const double n = static_cast<double>(recs.size());
    double cov = 0.0, bias_sq = 0.0, fit_sq = 0.0;
    for (const auto& r : recs) {
        const double bias = tau - r.tilde_tau;
        const double fit_err = r.hat_tau - r.tilde_tau;
        cov += bias * fit_err;
        bias_sq += bias * bias;
        fit_sq += fit_err * fit_err;
    }
    CovarianceBound b;
    b.lhs = std::abs(-2.0 * cov / n);
    b.rhs = 2.0 * std::sqrt(bias_sq / n) * std::sqrt(fit_sq / n);
    return b;
}

// A finite-support distribution of learning targets.
struct DiscreteDist {
    std::vector<double> values;
    std::vector<double> probs;  // nonnegative, summing to 1

    void validate() const {
        if (values.empty() || values.size() != probs.size())
            throw ConfigError("DiscreteDist: empty or mismatched support");
        double s = 0.0;
        for (double p : probs) {
            if (p < 0.0) throw ConfigError("DiscreteDist: negative probability");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-9) throw ConfigError("DiscreteDist: probabilities must sum to 1");
    }

    double mean() const {
        double m = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) m += probs[i] * values[i];
        return m;
    }

    double variance() const {
        const double m = mean();
        double v = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
            v += probs[i] * (values[i] - m) * (values[i] - m);
        return v;
    }
};

// Verifies the full decomposition by exact enumeration: the left side
// E[(model(t) - tau)^2] is computed over the joint (W, target) support, the
// right side from the five analytic terms. Returns |lhs - rhs|.
template <typename ModelFn>
double verify_identity(const DiscreteDist& dist0, const DiscreteDist& dist1, double pi,
                       double tau, ModelFn&& model) {
    dist0.validate();
    dist1.validate();
    if (!(pi >= 0.0 && pi <= 1.0)) throw ConfigError("verify_identity: pi must lie in [0,1]");

    double lhs = 0.0;
    double model_error = 0.0, cov = 0.0, mean_bias = 0.0;
    for (int w = 0; w <= 1; ++w) {
        const auto& dist = w ? dist1 : dist0;
        const double pw = w ? pi : 1.0 - pi;
        for (std::size_t s = 0; s < dist.values.size(); ++s) {
            const double t = dist.values[s];
            const double hat = model(t);
            const double p = pw * dist.probs[s];
            lhs += p * (hat - tau) * (hat - tau);
            model_error += p * (hat - t) * (hat - t);
            cov += p * (tau - t) * (hat - t);
            mean_bias += p * (tau - t);
        }
    }
    const double wvg = (1.0 - pi) * dist0.variance() + pi * dist1.variance();
    const double dmean = dist0.mean() - dist1.mean();
    const double sdmg = pi * (1.0 - pi) * dmean * dmean;
    const double rhs = model_error - 2.0 * cov + wvg + sdmg + mean_bias * mean_bias;
    return std::abs(lhs - rhs);
}

}  // namespace claga
