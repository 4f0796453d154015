#include "attnlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace attnlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

VectorXd average_ranks(const VectorXd& v) {
    const int n = static_cast<int>(v.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return v(a) < v(b); });
    VectorXd r(n);
    int i = 0;
    while (i < n) {
        int j = i;
        while (j + 1 < n && v(order[j + 1]) == v(order[i])) ++j;
        const double rank = 0.5 * (i + j) + 1.0; // average of ranks i+1..j+1
        for (int k = i; k <= j; ++k) r(order[k]) = rank;
        i = j + 1;
    }
    return r;
}

double pearson(const VectorXd& a, const VectorXd& b, bool& defined) {
    const double ma = a.mean(), mb = b.mean();
    const VectorXd da = a.array() - ma, db = b.array() - mb;
    const double va = da.squaredNorm(), vb = db.squaredNorm();
    if (va == 0.0 || vb == 0.0) {
        defined = false;
        return kNaN;
    }
    defined = true;
    return da.dot(db) / std::sqrt(va * vb);
}

} // namespace

MetricValue cosine_similarity(const VectorXd& a, const VectorXd& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("cosine_similarity: length mismatch");
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return {kNaN, false};
    return {a.dot(b) / (na * nb), true};
}

MetricValue spearman_correlation(const VectorXd& a, const VectorXd& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("spearman_correlation: length mismatch");
    if (a.size() < 2) return {kNaN, false};
    bool defined = false;
    const double rho = pearson(average_ranks(a), average_ranks(b), defined);
    return {rho, defined};
}

AlignmentReport lambda_alignment_sweep(const AlignmentConfig& cfg) {
    if (cfg.lambda_grid.empty())
        throw std::invalid_argument("lambda_alignment_sweep: empty grid");
    const int L = static_cast<int>(cfg.lambda_grid.size());
    std::vector<double> cos_acc(L, 0.0), sp_acc(L, 0.0);
    std::vector<int> cos_n(L, 0), sp_n(L, 0);

    for (int inst = 0; inst < cfg.instances; ++inst) {
        ModelSpec spec = cfg.base;
        spec.seed = cfg.base.seed + static_cast<std::uint64_t>(inst);
        auto [P, H] = init_model(spec);
        const TargetSpec T = default_targets(spec, H, P, cfg.target_position, 1.0);

        Perturbation D = Perturbation::zero(spec);
        if (cfg.at_step > 0) {
            OptimConfig traj;
            traj.steps = cfg.at_step;
            traj.step_size = cfg.step_size;
            traj.loss_kind = cfg.trajectory_loss;
            traj.lambda = cfg.trajectory_lambda;
            run_perturbation_opt(H, P, T, traj,
                                 [&](int step, const Perturbation& d) {
                                     if (step == cfg.at_step) D = d;
                                 });
        }
        TargetSpec Ti = T;
        const VectorXd ga = exact_grad(LossKind::Adv, H, D, P, Ti).flatten();
        for (int k = 0; k < L; ++k) {
            Ti.lambda = cfg.lambda_grid[k];
            const VectorXd gh = exact_grad(LossKind::Hallu, H, D, P, Ti).flatten();
            const MetricValue c = cosine_similarity(gh, ga);
            if (c.defined) {
                cos_acc[k] += c.value;
                ++cos_n[k];
            }
            const MetricValue s = cfg.spearman_signed
                ? spearman_correlation(gh, ga)
                : spearman_correlation(gh.cwiseAbs(), ga.cwiseAbs());
            if (s.defined) {
                sp_acc[k] += s.value;
                ++sp_n[k];
            }
        }
    }

    AlignmentReport rep;
    rep.lambda_grid = cfg.lambda_grid;
    rep.n_instances = cfg.instances;
    rep.cosine_per_lambda.resize(L);
    rep.spearman_per_lambda.resize(L);
    rep.n_valid_per_lambda.resize(L);
    for (int k = 0; k < L; ++k) {
        rep.cosine_per_lambda[k] = cos_n[k] ? cos_acc[k] / cos_n[k] : kNaN;
        rep.spearman_per_lambda[k] = sp_n[k] ? sp_acc[k] / sp_n[k] : kNaN;
        rep.n_valid_per_lambda[k] = std::min(cos_n[k], sp_n[k]);
    }
    auto nondecreasing = [](const std::vector<double>& v) {
        for (std::size_t i = 1; i < v.size(); ++i)
            if (!(v[i] >= v[i - 1])) return false;
        return true;
    };
    rep.monotone_cosine = nondecreasing(rep.cosine_per_lambda);
    rep.monotone_spearman = nondecreasing(rep.spearman_per_lambda);
    return rep;
}

namespace {

SeriesTrend series_trend(const std::vector<double>& xs) {
    SeriesTrend t;
    if (xs.empty()) return t;
    t.first = xs.front();
    t.last = xs.back();
    if (xs.size() < 2) return t;
    int dec = 0;
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (xs[i] < xs[i - 1]) ++dec;
    t.frac_decreasing = static_cast<double>(dec) / static_cast<double>(xs.size() - 1);
    return t;
}

} // namespace

TrendSummary trend_test(const Trace& trace) {
    if (trace.records.size() < 2)
        throw std::invalid_argument("trend_test: trace must have at least 2 records");
    std::vector<double> lh, la, eta, beta;
    for (const TraceRecord& r : trace.records) {
        lh.push_back(r.loss_hallu);
        la.push_back(r.loss_adv);
        eta.push_back(r.eta_sum);
        if (r.beta_valid) beta.push_back(r.beta_sum);
    }
    TrendSummary s;
    s.loss_hallu = series_trend(lh);
    s.loss_adv = series_trend(la);
    s.eta_sum = series_trend(eta);
    s.has_beta = beta.size() >= 2;
    if (s.has_beta) s.beta_sum = series_trend(beta);
    s.co_descent = (s.loss_hallu.last < s.loss_hallu.first) &&
                   (s.loss_adv.last < s.loss_adv.first);
    return s;
}

} // namespace attnlab
