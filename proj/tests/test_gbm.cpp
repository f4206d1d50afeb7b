#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "claga/gbm.hpp"
#include "claga/rng.hpp"

using namespace claga;

namespace {

BaseLearnerConfig small_cfg() {
    BaseLearnerConfig cfg;
    cfg.n_estimators = 50;
    cfg.num_leaves = 8;
    cfg.learning_rate = 0.3;
    cfg.min_samples_leaf = 1;
    return cfg;
}

CovariateMatrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
    CovariateMatrix x(n, d);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
    return x;
}

double train_mse(const GbmRegressor& m, const CovariateMatrix& x,
                 const std::vector<double>& y) {
    auto p = m.predict(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += (p[i] - y[i]) * (p[i] - y[i]);
    return acc / static_cast<double>(y.size());
}

// Exhaustive best single split by SSE reduction, ties to the lowest
// (feature, threshold). Independent of the tree builder.
struct BruteStump {
    int feature = -1;
    double threshold = 0.0;
    double left_mean = 0.0, right_mean = 0.0;
    bool found = false;
};

BruteStump brute_force_stump(const CovariateMatrix& x, const std::vector<double>& y) {
    const std::size_t n = x.rows();
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    double base_sse = 0.0;
    for (double v : y) base_sse += (v - mean) * (v - mean);

    BruteStump best;
    double best_gain = 0.0;
    for (std::size_t f = 0; f < x.cols(); ++f) {
        std::vector<double> vals;
        for (std::size_t i = 0; i < n; ++i) vals.push_back(x(i, f));
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (std::size_t c = 0; c + 1 < vals.size(); ++c) {
            const double thr = vals[c] + 0.5 * (vals[c + 1] - vals[c]);
            double sl = 0.0, sr = 0.0;
            std::size_t nl = 0, nr = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (x(i, f) <= thr) {
                    sl += y[i];
                    ++nl;
                } else {
                    sr += y[i];
                    ++nr;
                }
            const double ml = sl / nl, mr = sr / nr;
            double sse = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double m = x(i, f) <= thr ? ml : mr;
                sse += (y[i] - m) * (y[i] - m);
            }
            const double gain = base_sse - sse;
            if (gain > best_gain) {
                best_gain = gain;
                best = {static_cast<int>(f), thr, ml, mr, true};
            }
        }
    }
    return best;
}

}  // namespace

TEST_CASE("constant target gives constant predictions") {
    auto x = random_matrix(80, 3, 1);
    std::vector<double> y(80, 3.75);
    auto m = fit_regressor(x, y, small_cfg());
    for (double p : m.predict(x)) CHECK(p == doctest::Approx(3.75).epsilon(1e-12));
}

TEST_CASE("a stump ensemble fits a 1D step function") {
    const std::size_t n = 200;
    CovariateMatrix x(n, 1);
    std::vector<double> y(n);
    Rng rng(2);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform(-1.0, 1.0);
        y[i] = x(i, 0) > 0.0 ? 1.0 : 0.0;
    }
    BaseLearnerConfig cfg = small_cfg();
    cfg.num_leaves = 2;
    cfg.n_estimators = 100;
    cfg.learning_rate = 0.3;
    auto m = fit_regressor(x, y, cfg);
    CHECK(train_mse(m, x, y) < 1e-3);
}

TEST_CASE("zero estimators predict the weighted mean") {
    auto x = random_matrix(20, 2, 3);
    std::vector<double> y, wt;
    Rng rng(4);
    for (std::size_t i = 0; i < 20; ++i) {
        y.push_back(rng.uniform(0.0, 10.0));
        wt.push_back(rng.uniform(0.5, 2.0));
    }
    BaseLearnerConfig cfg = small_cfg();
    cfg.n_estimators = 0;
    auto m = fit_regressor(x, y, wt, cfg);
    double ws = 0.0, wys = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
        ws += wt[i];
        wys += wt[i] * y[i];
    }
    for (double p : m.predict(x)) CHECK(p == doctest::Approx(wys / ws).epsilon(1e-14));
}

TEST_CASE("train MSE is non-increasing in ensemble size") {
    auto x = random_matrix(300, 4, 5);
    std::vector<double> y;
    Rng rng(6);
    for (std::size_t i = 0; i < 300; ++i)
        y.push_back(std::sin(3.0 * x(i, 0)) + x(i, 1) * x(i, 2) + 0.2 * rng.normal());
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t trees : {1u, 5u, 20u, 80u}) {
        BaseLearnerConfig cfg = small_cfg();
        cfg.n_estimators = trees;
        cfg.subsample = 1.0;
        const double mse = train_mse(fit_regressor(x, y, cfg), x, y);
        CHECK(mse <= prev + 1e-12);
        prev = mse;
    }
}

TEST_CASE("single stump matches a brute-force best-split search") {
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        const std::size_t n = 10 + trial * 2;
        auto x = random_matrix(n, 3, 100 + trial);
        std::vector<double> y;
        Rng rng(200 + trial);
        for (std::size_t i = 0; i < n; ++i) y.push_back(rng.uniform(-2.0, 2.0));

        BaseLearnerConfig cfg;
        cfg.n_estimators = 1;
        cfg.num_leaves = 2;
        cfg.learning_rate = 1.0;
        cfg.min_samples_leaf = 1;
        auto m = fit_regressor(x, y, cfg);
        auto oracle = brute_force_stump(x, y);
        REQUIRE(oracle.found);
        for (std::size_t i = 0; i < n; ++i) {
            const double expected =
                x(i, oracle.feature) <= oracle.threshold ? oracle.left_mean : oracle.right_mean;
            CHECK(m.predict_row(x.row(i)) == doctest::Approx(expected).epsilon(1e-10));
        }
    }
}

TEST_CASE("duplicated row equals weight two") {
    const std::size_t n = 40;
    auto x = random_matrix(n, 3, 7);
    std::vector<double> y;
    Rng rng(8);
    for (std::size_t i = 0; i < n; ++i) y.push_back(rng.uniform(-1.0, 1.0));

    // weight 2 on row 0
    std::vector<double> wt(n, 1.0);
    wt[0] = 2.0;
    BaseLearnerConfig cfg = small_cfg();
    cfg.subsample = 1.0;
    auto m_weighted = fit_regressor(x, y, wt, cfg);

    // duplicate row 0
    CovariateMatrix x2(n + 1, 3);
    std::vector<double> y2;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < 3; ++j) x2(i, j) = x(i, j);
        y2.push_back(y[i]);
    }
    for (std::size_t j = 0; j < 3; ++j) x2(n, j) = x(0, j);
    y2.push_back(y[0]);
    auto m_dup = fit_regressor(x2, y2, cfg);

    for (std::size_t i = 0; i < n; ++i)
        CHECK(m_weighted.predict_row(x.row(i)) ==
              doctest::Approx(m_dup.predict_row(x.row(i))).epsilon(1e-10));
}

TEST_CASE("determinism and purity of predict") {
    auto x = random_matrix(100, 4, 9);
    std::vector<double> y;
    Rng rng(10);
    for (std::size_t i = 0; i < 100; ++i) y.push_back(x(i, 0) + rng.normal());
    BaseLearnerConfig cfg = small_cfg();
    cfg.subsample = 0.7;
    cfg.subsample_freq = 3;
    auto a = fit_regressor(x, y, cfg);
    auto b = fit_regressor(x, y, cfg);
    CHECK(a.predict(x) == b.predict(x));
    CHECK(a.predict(x) == a.predict(x));
}

TEST_CASE("dimension and input errors") {
    auto x = random_matrix(10, 2, 11);
    std::vector<double> y(10, 1.0);
    auto m = fit_regressor(x, y, small_cfg());
    CHECK_THROWS_AS(m.predict(random_matrix(5, 3, 0)), DimensionError);
    std::vector<double> bad_y(9, 1.0);
    CHECK_THROWS_AS(fit_regressor(x, bad_y, small_cfg()), DimensionError);
    std::vector<double> zero_wt(10, 0.0);
    CHECK_THROWS_AS(fit_regressor(x, y, zero_wt, small_cfg()), ConfigError);
}

TEST_CASE("hand-built 4-leaf tree traversal") {
    // x0 <= 0 ? (x1 <= -0.5 ? 10 : 20) : (x1 <= 0.5 ? 30 : 40)
    DecisionTree tree;
    tree.nodes.resize(7);
    tree.nodes[0] = {0, 0.0, 1, 2, 0.0};
    tree.nodes[1] = {1, -0.5, 3, 4, 0.0};
    tree.nodes[2] = {1, 0.5, 5, 6, 0.0};
    tree.nodes[3] = {-1, 0.0, -1, -1, 10.0};
    tree.nodes[4] = {-1, 0.0, -1, -1, 20.0};
    tree.nodes[5] = {-1, 0.0, -1, -1, 30.0};
    tree.nodes[6] = {-1, 0.0, -1, -1, 40.0};
    const double pts[4][2] = {{-1.0, -1.0}, {-1.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}};
    const double expect[4] = {10.0, 20.0, 30.0, 40.0};
    for (int c = 0; c < 4; ++c) CHECK(tree.predict_row({pts[c], 2}) == expect[c]);
    CHECK(tree.leaf_count() == 4);
}

TEST_CASE("propensity model calibration on randomized assignment") {
    const std::size_t n = 5000;
    auto x = random_matrix(n, 4, 12);
    std::vector<int> w(n);
    Rng rng(13);
    for (std::size_t i = 0; i < n; ++i) w[i] = rng.bernoulli(0.4) ? 1 : 0;
    BaseLearnerConfig cfg = small_cfg();
    cfg.n_estimators = 30;
    auto m = fit_propensity(x, w, cfg);
    auto p = m.predict(x);
    double mean_p = 0.0, mean_w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_p += p[i];
        mean_w += w[i];
        CHECK(p[i] >= m.clip_bound);
        CHECK(p[i] <= 1.0 - m.clip_bound);
    }
    CHECK(std::abs(mean_p / n - mean_w / n) < 0.03);
}

TEST_CASE("propensity model separates a threshold rule") {
    const std::size_t n = 400;
    auto x = random_matrix(n, 1, 14);
    std::vector<int> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = x(i, 0) > 0.0 ? 1 : 0;
    BaseLearnerConfig cfg = small_cfg();
    cfg.n_estimators = 60;
    auto m = fit_propensity(x, w, cfg);
    auto p = m.predict(x);
    for (std::size_t i = 0; i < n; ++i)
        if (w[i]) CHECK(p[i] >= 0.9);
}

TEST_CASE("propensity rejects single-class labels") {
    auto x = random_matrix(10, 2, 15);
    std::vector<int> w(10, 1);
    CHECK_THROWS_AS(fit_propensity(x, w, small_cfg()), ConfigError);
}
