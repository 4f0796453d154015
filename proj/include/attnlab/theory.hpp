#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace attnlab {

using Eigen::VectorXd;

/// A synthetic state satisfying the proportional-scaling assumptions exactly:
/// non-target attention weights eta_j * alpha with alpha = 1/(1 + sum eta),
/// and non-target logits beta_j * target_logit.
struct ProportionalInstance {
    VectorXd eta;        // length n_pos - 1, entries in [0, 1)
    VectorXd beta;       // length vocab - 1, entries in [0, 1)
    double target_logit = 1.0;
    double lambda = 1.0;
    int n_pos = 4;
    int vocab = 4;
    int m = 1;

    void validate() const;

    double eta_sum() const { return eta.sum(); }
    double alpha() const { return 1.0 / (1.0 + eta.sum()); }
    /// The reconstructed attention row [alpha*eta_0, ..., alpha, ...] sums to
    /// one by construction; target placed first for convenience.
    VectorXd attention_row() const;
};

/// The closed-form loss values of a proportional instance. Two readings are
/// kept for each loss where they differ:
///  - hallu_reduced: m ((lambda-1) log alpha + lambda sum log eta_j)
///  - hallu_literal : the per-definition loss evaluated on the reconstructed
///                    attention row, m ((lambda (N-1) - 1) log alpha + ...)
///  - adv_excl_target: m (-L* + log sum_{j != y*} exp(beta_j L*))
///  - adv_full_sum   : the same with the target's own exp(L*) included
struct ProportionalLosses {
    double hallu_reduced = 0.0;
    double hallu_literal = 0.0;
    double adv_excl_target = 0.0;
    double adv_full_sum = 0.0;
};

/// Throws std::domain_error when some eta_j = 0 with lambda > 0 (divergent log).
ProportionalLosses losses_from_proportional(const ProportionalInstance& inst);

struct TaylorPair {
    double hallu_taylor = 0.0;
    double adv_taylor = 0.0;
};

/// Truncated expansions of the two losses around vanishing scaling factors.
/// order 1 keeps the linear terms; order 2 adds (sum eta)^2/2 and
/// (beta_j L*)^2/2 respectively. Requires sum eta < 1 (expansion region).
TaylorPair taylor_losses(const ProportionalInstance& inst, int order);

struct EtaBetaResult {
    VectorXd eta;
    double C = 0.0;       // normalization, (sum eta)/(sum beta)
    double eta_sum = 0.0;
};

/// Closed-form compatibility map eta_j = (1/C) exp(-beta_j L* / lambda) with
/// sum eta = sqrt(sum beta * sum_j exp(-beta_j L* / lambda)).
/// Requires lambda > 0 and sum beta > 0.
EtaBetaResult eta_from_beta(const VectorXd& beta, double target_logit, double lambda);

struct SweepConfig {
    std::vector<double> scales = {1e-1, 1e-2, 1e-3, 1e-4};
    int n_pos = 8;
    int vocab = 4;
    int m = 1;
    /// Target logit; defaults to log(vocab-1) so both limiting values vanish.
    double target_logit = -1.0; // < 0 means "use log(vocab-1)"
    /// lambda = scale^2 when true (the coordinated limit); else lambda_fixed.
    bool lambda_squared = true;
    double lambda_fixed = 2.0;
};

struct ConvergenceReport {
    std::vector<double> scales;
    std::vector<double> gaps;                 // |hallu_reduced - adv_excl_target|
    std::vector<double> taylor_resid_hallu;   // |exact - order-2 truncation|
    std::vector<double> taylor_resid_adv;
    double fitted_order = 0.0;                // LS slope of log gap vs log scale
    double taylor_order_hallu = 0.0;
    double taylor_order_adv = 0.0;
};

/// At each scale s sets eta_j = beta_j = s uniformly (lambda = s^2 by
/// default), evaluates the closed-form losses, the gap, and the order-2
/// truncation residuals, then fits decay orders.
ConvergenceReport prop1_sweep(const SweepConfig& cfg);

/// Least-squares slope of log(y) against log(x); requires positive entries.
double fit_log_slope(const std::vector<double>& x, const std::vector<double>& y);

} // namespace attnlab
