#include "attnlab/theory.hpp"

#include <cmath>

namespace attnlab {

void ProportionalInstance::validate() const {
    if (n_pos < 2 || vocab < 2 || m < 1)
        throw std::invalid_argument("ProportionalInstance: bad dimensions");
    if (eta.size() != n_pos - 1)
        throw std::invalid_argument("ProportionalInstance: eta must have n_pos-1 entries");
    if (beta.size() != vocab - 1)
        throw std::invalid_argument("ProportionalInstance: beta must have vocab-1 entries");
    for (int i = 0; i < eta.size(); ++i)
        if (!(eta(i) >= 0.0 && eta(i) < 1.0))
            throw std::invalid_argument("ProportionalInstance: eta entries must be in [0,1)");
    for (int i = 0; i < beta.size(); ++i)
        if (!(beta(i) >= 0.0 && beta(i) < 1.0))
            throw std::invalid_argument("ProportionalInstance: beta entries must be in [0,1)");
}

VectorXd ProportionalInstance::attention_row() const {
    VectorXd row(n_pos);
    const double a = alpha();
    row(0) = a;
    for (int j = 0; j < eta.size(); ++j) row(j + 1) = eta(j) * a;
    return row;
}

ProportionalLosses losses_from_proportional(const ProportionalInstance& inst) {
    inst.validate();
    const double L = inst.target_logit;
    const double lam = inst.lambda;
    const double log_alpha = -std::log1p(inst.eta_sum());

    double sum_log_eta = 0.0;
    for (int j = 0; j < inst.eta.size(); ++j) {
        if (inst.eta(j) == 0.0 && lam > 0.0)
            throw std::domain_error("losses_from_proportional: log(0) with lambda > 0");
        sum_log_eta += std::log(inst.eta(j));
    }

    double sum_exp = 0.0;
    for (int j = 0; j < inst.beta.size(); ++j) sum_exp += std::exp(inst.beta(j) * L);

    ProportionalLosses out;
    out.hallu_reduced = inst.m * ((lam - 1.0) * log_alpha + lam * sum_log_eta);
    out.hallu_literal =
        inst.m * ((lam * (inst.n_pos - 1) - 1.0) * log_alpha + lam * sum_log_eta);
    out.adv_excl_target = inst.m * (-L + std::log(sum_exp));
    out.adv_full_sum = inst.m * (-L + std::log(std::exp(L) + sum_exp));
    return out;
}

TaylorPair taylor_losses(const ProportionalInstance& inst, int order) {
    inst.validate();
    if (order != 1 && order != 2)
        throw std::invalid_argument("taylor_losses: order must be 1 or 2");
    const double se = inst.eta_sum();
    if (!(se < 1.0))
        throw std::invalid_argument("taylor_losses: requires sum eta < 1");
    const double L = inst.target_logit;
    const double lam = inst.lambda;

    double sum_log_eta = 0.0;
    for (int j = 0; j < inst.eta.size(); ++j) {
        if (inst.eta(j) == 0.0 && lam > 0.0)
            throw std::domain_error("taylor_losses: log(0) with lambda > 0");
        sum_log_eta += std::log(inst.eta(j));
    }
    double log_alpha_trunc = -se;
    if (order == 2) log_alpha_trunc += 0.5 * se * se;

    double sum_poly = 0.0;
    for (int j = 0; j < inst.beta.size(); ++j) {
        const double y = inst.beta(j) * L;
        sum_poly += 1.0 + y + (order == 2 ? 0.5 * y * y : 0.0);
    }

    TaylorPair out;
    out.hallu_taylor = inst.m * ((lam - 1.0) * log_alpha_trunc + lam * sum_log_eta);
    out.adv_taylor = inst.m * (-L + std::log(sum_poly));
    return out;
}

EtaBetaResult eta_from_beta(const VectorXd& beta, double target_logit, double lambda) {
    if (lambda <= 0.0)
        throw std::invalid_argument("eta_from_beta: lambda must be positive");
    const double sum_beta = beta.sum();
    if (sum_beta <= 0.0)
        throw std::invalid_argument("eta_from_beta: sum beta must be positive");

    VectorXd e(beta.size());
    for (int j = 0; j < beta.size(); ++j)
        e(j) = std::exp(-beta(j) * target_logit / lambda);
    EtaBetaResult out;
    out.eta_sum = std::sqrt(sum_beta * e.sum());
    out.C = out.eta_sum / sum_beta;
    out.eta = e / out.C;
    return out;
}

double fit_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_log_slope: need matching series, length >= 2");
    const int n = static_cast<int>(x.size());
    double mx = 0.0, my = 0.0;
    std::vector<double> lx(n), ly(n);
    for (int i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw std::domain_error("fit_log_slope: entries must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    return num / den;
}

ConvergenceReport prop1_sweep(const SweepConfig& cfg) {
    if (cfg.scales.size() < 2)
        throw std::invalid_argument("prop1_sweep: need at least two scales");
    for (std::size_t i = 1; i < cfg.scales.size(); ++i)
        if (!(cfg.scales[i] < cfg.scales[i - 1]))
            throw std::invalid_argument("prop1_sweep: scales must be strictly decreasing");

    const double L =
        cfg.target_logit >= 0.0 ? cfg.target_logit : std::log(static_cast<double>(cfg.vocab - 1));
    ConvergenceReport rep;
    rep.scales = cfg.scales;
    for (double s : cfg.scales) {
        ProportionalInstance inst;
        inst.n_pos = cfg.n_pos;
        inst.vocab = cfg.vocab;
        inst.m = cfg.m;
        inst.target_logit = L;
        inst.lambda = cfg.lambda_squared ? s * s : cfg.lambda_fixed;
        inst.eta = VectorXd::Constant(cfg.n_pos - 1, s);
        inst.beta = VectorXd::Constant(cfg.vocab - 1, s);

        const ProportionalLosses pl = losses_from_proportional(inst);
        const TaylorPair t2 = taylor_losses(inst, 2);
        rep.gaps.push_back(std::abs(pl.hallu_reduced - pl.adv_excl_target));
        rep.taylor_resid_hallu.push_back(std::abs(pl.hallu_reduced - t2.hallu_taylor));
        rep.taylor_resid_adv.push_back(std::abs(pl.adv_excl_target - t2.adv_taylor));
    }
    rep.fitted_order = fit_log_slope(rep.scales, rep.gaps);
    rep.taylor_order_hallu = fit_log_slope(rep.scales, rep.taylor_resid_hallu);
    rep.taylor_order_adv = fit_log_slope(rep.scales, rep.taylor_resid_adv);
    return rep;
}

} // namespace attnlab
