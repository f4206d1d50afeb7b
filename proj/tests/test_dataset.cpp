#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "claga/dataset.hpp"

using namespace claga;

namespace {

DGPConfig make_cfg(DgpKind kind, std::size_t n, double noise_sd, std::uint64_t seed) {
    DGPConfig cfg;
    cfg.n = n;
    cfg.d = 6;
    cfg.dgp_kind = kind;
    cfg.noise_sd = noise_sd;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("constant-effect DGP yields constant tau") {
    auto ds = generate_synthetic(make_cfg(DgpKind::ConstantEffect, 200, 1.0, 7));
    for (double t : ds.tau) CHECK(t == 1.0);
}

TEST_CASE("zero noise reproduces the conditional means exactly") {
    for (auto kind : {DgpKind::ConstantEffect, DgpKind::LinearEffect, DgpKind::NonlinearEffect}) {
        auto ds = generate_synthetic(make_cfg(kind, 100, 0.0, 3));
        for (std::size_t i = 0; i < ds.size(); ++i) {
            CHECK(ds.y0[i] == ds.mu0[i]);
            CHECK(ds.y1[i] == ds.mu1[i]);
        }
    }
}

TEST_CASE("treatment fraction concentrates at treat_prob") {
    auto ds = generate_synthetic(make_cfg(DgpKind::LinearEffect, 10000, 1.0, 11));
    double mean_w = 0.0;
    for (int w : ds.base.w) mean_w += w;
    mean_w /= static_cast<double>(ds.size());
    CHECK(mean_w >= 0.48);
    CHECK(mean_w <= 0.52);
}

TEST_CASE("synthetic invariants hold exactly") {
    auto ds = generate_synthetic(make_cfg(DgpKind::NonlinearEffect, 500, 1.5, 42));
    CHECK_NOTHROW(ds.validate());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(ds.mu1[i] == ds.mu0[i] + ds.tau[i]);
        CHECK(ds.base.y[i] == (ds.base.w[i] ? ds.y1[i] : ds.y0[i]));
    }
}

TEST_CASE("generation is bit-reproducible given the seed") {
    auto a = generate_synthetic(make_cfg(DgpKind::NonlinearEffect, 300, 1.0, 99));
    auto b = generate_synthetic(make_cfg(DgpKind::NonlinearEffect, 300, 1.0, 99));
    CHECK(a.base.w == b.base.w);
    CHECK(a.base.y == b.base.y);
    CHECK(a.y0 == b.y0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < 6; ++j) CHECK(a.base.x(i, j) == b.base.x(i, j));
}

TEST_CASE("assignment is uncorrelated with covariates at scale") {
    auto ds = generate_synthetic(make_cfg(DgpKind::LinearEffect, 10000, 1.0, 5));
    const double n = static_cast<double>(ds.size());
    double mw = 0.0;
    for (int w : ds.base.w) mw += w;
    mw /= n;
    for (std::size_t j = 0; j < ds.base.x.cols(); ++j) {
        double mx = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i) mx += ds.base.x(i, j);
        mx /= n;
        double cov = 0.0, vw = 0.0, vx = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const double dw = ds.base.w[i] - mw;
            const double dx = ds.base.x(i, j) - mx;
            cov += dw * dx;
            vw += dw * dw;
            vx += dx * dx;
        }
        CHECK(std::abs(cov / std::sqrt(vw * vx)) < 0.05);
    }
}

TEST_CASE("randomize_assignment") {
    auto ds = generate_synthetic(make_cfg(DgpKind::NonlinearEffect, 400, 1.0, 8));

    SUBCASE("deterministic given seed") {
        auto a = randomize_assignment(ds, 123);
        auto b = randomize_assignment(ds, 123);
        CHECK(a.base.w == b.base.w);
        CHECK(a.base.y == b.base.y);
    }

    SUBCASE("consistency and ground truth preserved") {
        auto r = randomize_assignment(ds, 77);
        for (std::size_t i = 0; i < r.size(); ++i)
            CHECK(r.base.y[i] == (r.base.w[i] ? r.y1[i] : r.y0[i]));
        CHECK(r.tau == ds.tau);
        CHECK(r.y0 == ds.y0);
        CHECK(r.y1 == ds.y1);
    }

    SUBCASE("per-instance assignment frequency concentrates") {
        std::size_t hits = 0;
        const std::size_t redraws = 1000;
        for (std::size_t r = 0; r < redraws; ++r)
            hits += static_cast<std::size_t>(randomize_assignment(ds, 1000 + r).base.w[0]);
        const double frac = static_cast<double>(hits) / redraws;
        CHECK(frac >= 0.45);
        CHECK(frac <= 0.55);
    }
}

TEST_CASE("kfold_partition balance and coverage") {
    SUBCASE("n=10 k=2: two folds of five") {
        auto fa = kfold_partition(10, 2, 1);
        CHECK(fa.members_of(0).size() == 5);
        CHECK(fa.members_of(1).size() == 5);
    }

    SUBCASE("n=4802 k=10: eight folds of 480 and two of 481") {
        auto fa = kfold_partition(4802, 10, 1);
        std::multiset<std::size_t> sizes;
        for (std::size_t j = 0; j < 10; ++j) sizes.insert(fa.members_of(j).size());
        CHECK(sizes.count(480) == 8);
        CHECK(sizes.count(481) == 2);
    }

    SUBCASE("n=5 k=5: singletons") {
        auto fa = kfold_partition(5, 5, 1);
        for (std::size_t j = 0; j < 5; ++j) CHECK(fa.members_of(j).size() == 1);
    }

    SUBCASE("disjoint cover with balanced sizes, random n/k") {
        Rng rng(4);
        for (int trial = 0; trial < 30; ++trial) {
            const std::size_t n = 2 + rng.uniform_index(200);
            const std::size_t k = 2 + rng.uniform_index(std::min<std::size_t>(n - 1, 12));
            auto fa = kfold_partition(n, k, trial);
            std::size_t total = 0, mn = n, mx = 0;
            for (std::size_t j = 0; j < k; ++j) {
                const auto sz = fa.members_of(j).size();
                CHECK(sz >= 1);
                total += sz;
                mn = std::min(mn, sz);
                mx = std::max(mx, sz);
            }
            CHECK(total == n);
            CHECK(mx - mn <= 1);
        }
    }

    SUBCASE("deterministic given seed, sensitive to seed") {
        auto a = kfold_partition(100, 5, 10);
        auto b = kfold_partition(100, 5, 10);
        auto c = kfold_partition(100, 5, 11);
        CHECK(a.fold_of == b.fold_of);
        CHECK(a.fold_of != c.fold_of);
    }

    SUBCASE("configuration errors") {
        CHECK_THROWS_AS(kfold_partition(10, 1, 0), ConfigError);
        CHECK_THROWS_AS(kfold_partition(10, 11, 0), ConfigError);
    }
}

TEST_CASE("stratified partition keeps both groups in every complement") {
    std::vector<int> w(40, 0);
    for (std::size_t i = 0; i < 6; ++i) w[i] = 1;  // rare treated group
    auto fa = kfold_partition_stratified(w, 5, 3);
    for (std::size_t j = 0; j < 5; ++j) {
        bool has0 = false, has1 = false;
        for (std::size_t i : fa.complement_of(j)) (w[i] ? has1 : has0) = true;
        CHECK(has0);
        CHECK(has1);
    }
}

TEST_CASE("config validation") {
    DGPConfig cfg = make_cfg(DgpKind::LinearEffect, 100, 1.0, 0);
    cfg.n = 1;
    CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
    cfg = make_cfg(DgpKind::LinearEffect, 100, -0.5, 0);
    CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
    cfg = make_cfg(DgpKind::LinearEffect, 100, 1.0, 0);
    cfg.treat_prob = 1.0;
    CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
}
