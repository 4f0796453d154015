#include "attnlab/losses.hpp"

#include <cmath>
#include <string>

namespace attnlab {

namespace {

double logsumexp(const VectorXd& v) {
    const double mx = v.maxCoeff();
    return mx + std::log((v.array() - mx).exp().sum());
}

constexpr double kBetaDenominatorGuard = 1e-9;

} // namespace

LossValue jailbreak_loss(const AttentionState& S, const TargetSpec& T) {
    const int m = static_cast<int>(S.z.rows());
    LossValue L;
    L.per_position.resize(m);
    for (int i = 0; i < m; ++i) {
        const VectorXd zi = S.z.row(i);
        L.per_position(i) = -(zi(T.y_star[i]) - logsumexp(zi));
    }
    L.total = L.per_position.sum();
    return L;
}

LossValue hallucination_loss(const AttentionState& S, const TargetSpec& T) {
    const int m = static_cast<int>(S.A_delta.rows());
    const int N = static_cast<int>(S.A_delta.cols());
    LossValue L;
    L.per_position.resize(m);
    for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int j = 0; j < N; ++j) {
            const double a = S.A_delta(i, j);
            if (a == 0.0)
                throw std::domain_error("hallucination_loss: zero attention entry at (" +
                                        std::to_string(i) + "," + std::to_string(j) + ")");
            if (j == T.t)
                acc -= std::log(a);
            else
                acc += T.lambda * std::log(a);
        }
        L.per_position(i) = acc;
    }
    L.total = L.per_position.sum();
    return L;
}

ScalingFactors scaling_factors(const AttentionState& S, const TargetSpec& T,
                               bool aggregate) {
    const int m = static_cast<int>(S.A_delta.rows());
    const int N = static_cast<int>(S.A_delta.cols());
    const int V = static_cast<int>(S.z.cols());

    MatrixXd eta(m, N - 1);
    VectorXd eta_sum(m), alpha(m);
    MatrixXd beta(m, V - 1);
    VectorXd beta_sum(m);
    bool valid = true;

    for (int i = 0; i < m; ++i) {
        const double a_t = S.A_delta(i, T.t);
        alpha(i) = a_t;
        int col = 0;
        double es = 0.0;
        for (int j = 0; j < N; ++j) {
            if (j == T.t) continue;
            eta(i, col) = S.A_delta(i, j) / a_t;
            es += eta(i, col);
            ++col;
        }
        eta_sum(i) = es;

        const double zy = S.z(i, T.y_star[i]);
        if (std::abs(zy) < kBetaDenominatorGuard) {
            valid = false;
            continue;
        }
        col = 0;
        double bs = 0.0;
        for (int w = 0; w < V; ++w) {
            if (w == T.y_star[i]) continue;
            beta(i, col) = S.z(i, w) / zy;
            bs += beta(i, col);
            ++col;
        }
        beta_sum(i) = bs;
    }

    ScalingFactors F;
    F.valid = valid;
    F.aggregated = aggregate;
    if (!aggregate) {
        F.eta_per_j = std::move(eta);
        F.eta_sum = std::move(eta_sum);
        F.alpha = std::move(alpha);
        if (valid) {
            F.beta_per_j = std::move(beta);
            F.beta_sum = std::move(beta_sum);
        }
        return F;
    }
    F.eta_per_j = eta.colwise().mean();
    F.eta_sum.resize(1);
    F.eta_sum(0) = eta_sum.mean();
    F.alpha.resize(1);
    F.alpha(0) = alpha.mean();
    if (valid) {
        F.beta_per_j = beta.colwise().mean();
        F.beta_sum.resize(1);
        F.beta_sum(0) = beta_sum.mean();
    }
    return F;
}

} // namespace attnlab
