#pragma once

#include "attnlab/types.hpp"

namespace attnlab {

/// A loss with its per-query-position decomposition; total is their sum.
struct LossValue {
    double total = 0.0;
    VectorXd per_position;
};

/// Concentration metrics of a state (the eta/beta diagnostics).
///
/// eta_j = A_delta[i][j] / A_delta[i][t] over non-target positions j (ascending,
/// target skipped); beta_j = z[i][j] / z[i][y*_i] over non-target vocabulary
/// indices. alpha is the target attention weight itself. When aggregated,
/// every row-indexed quantity is the arithmetic mean over query positions
/// (stored with a single row). The beta fields are only meaningful while
/// `valid` is true; the guard trips when some |z[i][y*_i]| < 1e-9.
struct ScalingFactors {
    MatrixXd eta_per_j;   // m (or 1) x (N-1)
    VectorXd eta_sum;     // m (or 1)
    MatrixXd beta_per_j;  // m (or 1) x (vocab-1); unset when !valid
    VectorXd beta_sum;    // m (or 1); unset when !valid
    VectorXd alpha;       // m (or 1)
    bool aggregated = false;
    bool valid = true;
};

/// Negative log-likelihood of the target tokens under the state's logits:
/// per position, -(z_i[y*_i] - logsumexp_j z_i[j]).
LossValue jailbreak_loss(const AttentionState& S, const TargetSpec& T);

/// Attention redistribution loss, per position:
/// -log A_delta[i][t] + lambda * sum_{j != t} log A_delta[i][j].
/// Throws std::domain_error if a needed attention entry is exactly zero
/// (softmax output is strictly positive; zero signals upstream corruption).
LossValue hallucination_loss(const AttentionState& S, const TargetSpec& T);

ScalingFactors scaling_factors(const AttentionState& S, const TargetSpec& T,
                               bool aggregate);

} // namespace attnlab
