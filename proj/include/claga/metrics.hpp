#pragma once
// Evaluation metrics: PEHE, uplift curve / AUUC, Welch t-test, and the
// discrepancy-ratio diagnostic over re-randomized retrains.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "claga/dataset.hpp"
#include "claga/errors.hpp"
#include "claga/meta_learners.hpp"
#include "claga/rng.hpp"

namespace claga {

inline double pehe(std::span<const double> tau_hat, std::span<const double> tau) {
    if (tau_hat.size() != tau.size() || tau_hat.empty())
        throw DimensionError("pehe: vectors must have equal nonzero length");
    double acc = 0.0;
    for (std::size_t i = 0; i < tau.size(); ++i) {
        const double d = tau_hat[i] - tau[i];
        acc += d * d;
    }
    return acc / static_cast<double>(tau.size());
}

struct UpliftCurve {
    struct Point {
        double fraction;  // k/n, in (0,1]
        double gain;
    };
    std::vector<Point> points;
    double auuc = 0.0;
};

// Sort by score descending (ties by original index ascending); for each prefix
// of size k, gain(k) = (mean treated outcome - mean control outcome) * k/n,
// zero when either group is absent from the prefix. auuc = mean gain over k.
inline UpliftCurve uplift_auuc(std::span<const double> scores, std::span<const int> w,
                               std::span<const double> y) {
    const std::size_t n = scores.size();
    if (w.size() != n || y.size() != n) throw DimensionError("uplift_auuc: length mismatch");
    if (n < 2) throw ConfigError("uplift_auuc: need at least 2 rows");
    bool has0 = false, has1 = false;
    for (int wi : w) (wi ? has1 : has0) = true;
    if (!has0 || !has1) throw ConfigError("uplift_auuc: both treatment groups required");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    UpliftCurve curve;
    curve.points.reserve(n);
    double sum_yt = 0.0, sum_yc = 0.0;
    std::size_t nt = 0, nc = 0;
    double total = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        const std::size_t i = order[k - 1];
        if (w[i]) {
            sum_yt += y[i];
            ++nt;
        } else {
            sum_yc += y[i];
            ++nc;
        }
        double gain = 0.0;
        if (nt > 0 && nc > 0)
            gain = (sum_yt / static_cast<double>(nt) - sum_yc / static_cast<double>(nc)) *
                   (static_cast<double>(k) / static_cast<double>(n));
        total += gain;
        curve.points.push_back({static_cast<double>(k) / static_cast<double>(n), gain});
    }
    curve.auuc = total / static_cast<double>(n);
    return curve;
}

namespace detail {

// Regularized incomplete beta I_x(a,b) via the Lentz continued fraction.
inline double beta_cont_frac(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cont_frac(a, b, x) / a;
    return 1.0 - front * beta_cont_frac(b, a, 1.0 - x) / b;
}

}  // namespace detail

// Two-sided p-value of the Student-t distribution: P(|T_df| >= |t|).
inline double student_t_two_sided_p(double t, double df) {
    if (df <= 0.0) throw ConfigError("student_t_two_sided_p: df must be positive");
    const double x = df / (df + t * t);
    return detail::incomplete_beta(df / 2.0, 0.5, x);
}

struct TTestResult {
    double t_stat = 0.0;
    double df = 1.0;
    double p_value = 1.0;
    bool degenerate = false;  // both samples constant
};

inline TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2)
        throw ConfigError("welch_t_test: each sample needs at least 2 observations");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    double ma = 0.0, mb = 0.0;
    for (double v : a) ma += v;
    for (double v : b) mb += v;
    ma /= na;
    mb /= nb;
    double va = 0.0, vb = 0.0;  // sample (Bessel) variances
    for (double v : a) va += (v - ma) * (v - ma);
    for (double v : b) vb += (v - mb) * (v - mb);
    va /= (na - 1.0);
    vb /= (nb - 1.0);

    TTestResult r;
    const double se2 = va / na + vb / nb;
    if (se2 <= 0.0) {
        r.degenerate = true;
        r.df = na + nb - 2.0;
        if (ma == mb) {
            r.t_stat = 0.0;
            r.p_value = 1.0;
        } else {
            r.t_stat = ma > mb ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
            r.p_value = 0.0;
        }
        return r;
    }
    r.t_stat = (ma - mb) / std::sqrt(se2);
    r.df = se2 * se2 / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    r.p_value = student_t_two_sided_p(r.t_stat, r.df);
    return r;
}

struct DiscrepancyReport {
    double ratio = 0.0;
    std::size_t n_tested = 0;
    std::size_t n_significant = 0;
    std::size_t n_excluded = 0;
    struct PerInstance {
        std::size_t index;
        std::optional<double> p_value;  // nullopt: excluded (fewer than 2 per group)
    };
    std::vector<PerInstance> per_instance;
};

// Retrain `runs` times with re-randomized assignments; per instance, compare
// the predictions collected under W=1 vs W=0 with a Welch t-test.
inline DiscrepancyReport discrepancy_ratio(
    const SyntheticDataset& ds,
    const std::function<CateModel(const ObservedDataset&, std::uint64_t run_seed)>& fit_fn,
    std::size_t runs, double alpha, std::uint64_t seed) {
    if (runs < 2) throw ConfigError("discrepancy_ratio: runs must be >= 2");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("discrepancy_ratio: alpha must lie in [0,1)");

    const std::size_t n = ds.size();
    std::vector<std::vector<double>> group0(n), group1(n);
    for (std::size_t r = 0; r < runs; ++r) {
        const std::uint64_t run_seed = derive_seed(seed, "discrepancy.run", r);
        auto redrawn = randomize_assignment(ds, run_seed);
        auto model = fit_fn(redrawn.base, run_seed);
        auto pred = model.predict_cate(redrawn.base.x);
        for (std::size_t i = 0; i < n; ++i)
            (redrawn.base.w[i] ? group1[i] : group0[i]).push_back(pred[i]);
    }

    DiscrepancyReport report;
    report.per_instance.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (group0[i].size() < 2 || group1[i].size() < 2) {
            ++report.n_excluded;
            report.per_instance.push_back({i, std::nullopt});
            continue;
        }
        const auto t = welch_t_test(group1[i], group0[i]);
        ++report.n_tested;
        if (t.p_value < alpha) ++report.n_significant;
        report.per_instance.push_back({i, t.p_value});
    }
    if (report.n_tested == 0)
        throw DiagnosticError("discrepancy_ratio: every instance was excluded");
    report.ratio = static_cast<double>(report.n_significant) / static_cast<double>(report.n_tested);
    return report;
}

}  // namespace claga
