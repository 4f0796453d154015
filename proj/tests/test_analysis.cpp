#include "helpers.hpp"

#include "attnlab/analysis.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace attnlab;
using namespace testutil;

namespace {

/// Independent two-step reference: O(n^2) fractional ranks, then Pearson.
double rank_then_pearson(const VectorXd& a, const VectorXd& b) {
    auto rankify = [](const VectorXd& v) {
        VectorXd r(v.size());
        for (int i = 0; i < v.size(); ++i) {
            int less = 0, equal = 0;
            for (int j = 0; j < v.size(); ++j) {
                if (v(j) < v(i)) ++less;
                if (v(j) == v(i)) ++equal;
            }
            r(i) = less + 1 + (equal - 1) * 0.5;
        }
        return r;
    };
    const VectorXd ra = rankify(a), rb = rankify(b);
    const double ma = ra.mean(), mb = rb.mean();
    double num = 0.0, va = 0.0, vb = 0.0;
    for (int i = 0; i < ra.size(); ++i) {
        num += (ra(i) - ma) * (rb(i) - mb);
        va += (ra(i) - ma) * (ra(i) - ma);
        vb += (rb(i) - mb) * (rb(i) - mb);
    }
    return num / std::sqrt(va * vb);
}

VectorXd vec(std::initializer_list<double> xs) {
    VectorXd v(static_cast<int>(xs.size()));
    int i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

} // namespace

TEST_CASE("cosine similarity basics") {
    CHECK(cosine_similarity(vec({1, 2, 3}), vec({1, 2, 3})).value ==
          doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_similarity(vec({1, 0}), vec({0, 1})).value ==
          doctest::Approx(0.0).epsilon(1e-15));
    CHECK(cosine_similarity(vec({1, 0}), vec({1, 1})).value ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("cosine of a zero vector is the undefined sentinel") {
    const MetricValue m = cosine_similarity(vec({0, 0}), vec({0, 0}));
    CHECK_FALSE(m.defined);
    CHECK(std::isnan(m.value));
    const MetricValue m2 = cosine_similarity(vec({0, 0}), vec({1, 0}));
    CHECK_FALSE(m2.defined);
}

TEST_CASE("cosine is scale invariant and symmetric") {
    std::mt19937_64 eng(11);
    std::normal_distribution<double> dist;
    for (int rep = 0; rep < 20; ++rep) {
        VectorXd a(7), b(7);
        for (int i = 0; i < 7; ++i) {
            a(i) = dist(eng);
            b(i) = dist(eng);
        }
        const double base = cosine_similarity(a, b).value;
        CHECK(std::abs(cosine_similarity(3.7 * a, b).value - base) < 1e-12);
        CHECK(std::abs(cosine_similarity(b, a).value - base) < 1e-15);
    }
}

TEST_CASE("spearman extremes") {
    CHECK(spearman_correlation(vec({1, 2, 3, 4}), vec({10, 20, 30, 40})).value ==
          doctest::Approx(1.0).epsilon(1e-15));
    CHECK(spearman_correlation(vec({1, 2, 3, 4}), vec({4, 3, 2, 1})).value ==
          doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("spearman handles ties with average ranks") {
    const MetricValue m = spearman_correlation(vec({1, 2, 2, 3}), vec({1, 3, 2, 4}));
    REQUIRE(m.defined);
    CHECK(m.value == doctest::Approx(0.9486832980505138).epsilon(1e-14));
    CHECK(m.value ==
          doctest::Approx(rank_then_pearson(vec({1, 2, 2, 3}), vec({1, 3, 2, 4})))
              .epsilon(1e-14));
}

TEST_CASE("spearman matches the two-step reference on random data") {
    std::mt19937_64 eng(5);
    for (int rep = 0; rep < 50; ++rep) {
        VectorXd a(9), b(9);
        for (int i = 0; i < 9; ++i) {
            a(i) = static_cast<double>(eng() % 6); // frequent ties
            b(i) = static_cast<double>(eng() % 6);
        }
        const MetricValue m = spearman_correlation(a, b);
        if (!m.defined) continue;
        CHECK(m.value == doctest::Approx(rank_then_pearson(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("spearman is invariant under strictly monotone transforms") {
    std::mt19937_64 eng(8);
    std::normal_distribution<double> dist;
    VectorXd a(8), b(8);
    for (int i = 0; i < 8; ++i) {
        a(i) = dist(eng);
        b(i) = dist(eng);
    }
    const double base = spearman_correlation(a, b).value;
    const VectorXd ea = a.array().exp();
    const VectorXd cb = b.array().cube();
    CHECK(spearman_correlation(ea, cb).value == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("constant input is the undefined sentinel") {
    const MetricValue m = spearman_correlation(vec({2, 2, 2}), vec({1, 2, 3}));
    CHECK_FALSE(m.defined);
    CHECK(std::isnan(m.value));
}

TEST_CASE("a single-point grid is trivially monotone") {
    AlignmentConfig cfg;
    cfg.base = run_spec();
    cfg.instances = 2;
    cfg.lambda_grid = {1.0};
    cfg.at_step = 0;
    const AlignmentReport rep = lambda_alignment_sweep(cfg);
    CHECK(rep.monotone_cosine);
    CHECK(rep.monotone_spearman);
    CHECK(rep.n_valid_per_lambda[0] == 2);
}

TEST_CASE("the alignment sweep is deterministic") {
    AlignmentConfig cfg;
    cfg.base = run_spec();
    cfg.instances = 3;
    cfg.at_step = 5;
    const AlignmentReport r1 = lambda_alignment_sweep(cfg);
    const AlignmentReport r2 = lambda_alignment_sweep(cfg);
    CHECK(r1.cosine_per_lambda == r2.cosine_per_lambda);
    CHECK(r1.spearman_per_lambda == r2.spearman_per_lambda);
}

TEST_CASE("trend summary of synthetic traces") {
    Trace down;
    for (int k = 0; k < 5; ++k) {
        TraceRecord r;
        r.step = k;
        r.loss_hallu = 10.0 - k;
        r.loss_adv = 5.0 - 0.5 * k;
        r.eta_sum = 2.0 - 0.1 * k;
        r.beta_valid = true;
        r.beta_sum = 1.0 - 0.1 * k;
        down.records.push_back(r);
    }
    const TrendSummary s = trend_test(down);
    CHECK(s.loss_hallu.frac_decreasing == 1.0);
    CHECK(s.loss_adv.frac_decreasing == 1.0);
    CHECK(s.co_descent);
    CHECK(s.has_beta);
    CHECK(s.beta_sum.last < s.beta_sum.first);

    Trace flat;
    for (int k = 0; k < 4; ++k) {
        TraceRecord r;
        r.step = k;
        r.loss_hallu = 1.0;
        r.loss_adv = 2.0;
        r.eta_sum = 3.0;
        r.beta_valid = false;
        flat.records.push_back(r);
    }
    const TrendSummary f = trend_test(flat);
    CHECK_FALSE(f.co_descent);
    CHECK(f.loss_hallu.frac_decreasing == 0.0);
    CHECK_FALSE(f.has_beta);
}

TEST_CASE("the canonical optimization trace co-descends") {
    const ModelSpec spec = run_spec();
    auto [P, H] = init_model(spec);
    const TargetSpec T = default_targets(spec, H, P, 1, 1.0);
    OptimConfig cfg;
    const Trace trace = run_perturbation_opt(H, P, T, cfg);
    const TrendSummary s = trend_test(trace);
    CHECK(s.co_descent);
    CHECK(s.eta_sum.last < s.eta_sum.first);
}

TEST_CASE("spearman is symmetric in its arguments") {
    std::mt19937_64 eng(21);
    for (int rep = 0; rep < 10; ++rep) {
        VectorXd a(6), b(6);
        for (int i = 0; i < 6; ++i) {
            a(i) = static_cast<double>(eng() % 9);
            b(i) = static_cast<double>(eng() % 9);
        }
        const MetricValue ab = spearman_correlation(a, b);
        const MetricValue ba = spearman_correlation(b, a);
        if (!ab.defined) continue;
        CHECK(ab.value == doctest::Approx(ba.value).epsilon(1e-15));
    }
}
