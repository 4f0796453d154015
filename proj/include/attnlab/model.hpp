#pragma once

#include "attnlab/types.hpp"

namespace attnlab {

/// Attention score scaling. The model applies no 1/sqrt(d_k) factor by
/// default; the scaled variant is available for robustness experiments.
struct AttentionOptions {
    bool scale_by_sqrt_dk = false;
    /// When true, the perturbation is also added to key/value inputs.
    /// Default off: only query rows are perturbed.
    bool perturb_keys_values = false;
};

namespace detail {

/// Numerically stable softmax (max-subtraction). Input must be finite.
VectorXd softmax_row(const VectorXd& scores);

} // namespace detail

/// Samples projections and embeddings i.i.d. Gaussian mean 0, std 1/sqrt(d_e)
/// from GaussianStream(spec.seed), in the order W_Q, W_K, W_V, W_out, H_v,
/// H_t (each row-major). Same spec => bit-identical output.
std::pair<ProjectionSet, EmbeddingSet> init_model(const ModelSpec& spec);

/// Row-stochastic attention of the clean embeddings for the given query
/// positions: A[i][j] = softmax_j (W_Q H_qi)^T (W_K H_j).
/// Throws std::runtime_error naming the query row if scores are not finite.
MatrixXd attention_weights(const EmbeddingSet& H, const ProjectionSet& P,
                           const std::vector<int>& queries,
                           const AttentionOptions& opt = {});

/// Attention with perturbed queries against clean keys:
/// A[i][j] = softmax_j (W_Q (H+D)_qi)^T (W_K H_j).
MatrixXd perturbed_attention(const EmbeddingSet& H, const Perturbation& D,
                             const ProjectionSet& P,
                             const std::vector<int>& queries,
                             const AttentionOptions& opt = {});

/// Full forward pass: clean attention, perturbed attention, value mixing
/// o_i = sum_j A_delta[i][j] W_V H_j, and logits z_i = W_out o_i.
AttentionState forward(const EmbeddingSet& H, const Perturbation& D,
                       const ProjectionSet& P, const TargetSpec& T,
                       const AttentionOptions& opt = {});

/// Default attack targets for an instance: every query targets the token
/// most promoted by the attention-target position's value vector,
/// y = argmax_w [W_out W_V H_t]_w, and the competing token is the strongest
/// non-target mean logit of the clean state.
TargetSpec default_targets(const ModelSpec& spec, const EmbeddingSet& H,
                           const ProjectionSet& P, int target_position,
                           double lambda);

} // namespace attnlab
