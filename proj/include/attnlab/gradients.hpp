#pragma once

#include "attnlab/losses.hpp"
#include "attnlab/model.hpp"

#include <functional>

namespace attnlab {

enum class LossKind { Hallu, Adv, Both };

/// A gradient with respect to the perturbation, same layout as Perturbation.
struct GradientField {
    MatrixXd d_delta_t; // n x d_e
    MatrixXd d_delta_v; // l x d_e

    static GradientField zero(const ModelSpec& spec) {
        GradientField g;
        g.d_delta_t = MatrixXd::Zero(spec.n, spec.d_e);
        g.d_delta_v = MatrixXd::Zero(spec.l, spec.d_e);
        return g;
    }

    VectorXd flatten() const;
    double norm() const { return std::sqrt(d_delta_t.squaredNorm() + d_delta_v.squaredNorm()); }
    GradientField operator+(const GradientField& o) const;
};

/// Per-(query, position) pieces of the attention Jacobian and the scalar
/// coefficients that weight them in the two losses' gradients.
///
/// delta_ij[i][j] is the d_v x d_e outer product
///   (W_V H_j) (A_delta[i][j] (u_j - sum_k A_delta[i][k] u_k))^T,
/// with u_j = W_Q^T W_K H_j, i.e. the j-th term of the Jacobian of o_i with
/// respect to the perturbed query embedding; rows sum to that Jacobian.
struct JacobianBlocks {
    std::vector<std::vector<MatrixXd>> delta_ij; // [m][N], each d_v x d_e
    VectorXd delta_softmax;                      // m: p_i[y*_i] - p_i[t_tok]
    MatrixXd gamma_adv;                          // m x N, = delta_softmax_i
    MatrixXd gamma_hallu;                        // m x N, -1 at t else lambda
};

/// Everything the grad-check experiment emits.
struct GradientReport {
    GradientField exact_adv, exact_hallu;
    GradientField fd_adv, fd_hallu;
    GradientField decomp_adv, decomp_hallu;
    double rel_err_fd_adv = 0.0;
    double rel_err_fd_hallu = 0.0;
    double cos_exact_vs_decomp_adv = 0.0;   // NaN when undefined
    double cos_exact_vs_decomp_hallu = 0.0; // NaN when undefined
};

/// Analytic gradient of the selected loss with respect to (delta_t, delta_v),
/// by the chain rule through the row softmax. Only query rows are nonzero.
GradientField exact_grad(LossKind kind, const EmbeddingSet& H, const Perturbation& D,
                         const ProjectionSet& P, const TargetSpec& T);

/// Central finite differences, (L(D + h e) - L(D - h e)) / 2h per coordinate.
/// Throws std::runtime_error naming the coordinate on a non-finite loss.
GradientField fd_grad(LossKind kind, const EmbeddingSet& H, const Perturbation& D,
                      const ProjectionSet& P, const TargetSpec& T, double h = 1e-5);

/// Generic central-difference gradient of a scalar function, used by the
/// FD machinery and directly testable against known derivatives.
VectorXd central_difference(const std::function<double(const VectorXd&)>& f,
                            const VectorXd& x, double h);

JacobianBlocks jacobian_blocks(const EmbeddingSet& H, const Perturbation& D,
                               const ProjectionSet& P, const TargetSpec& T);

/// Assembles the closed-form gradient decomposition sum_j Gamma_ij Delta_ij
/// into a field, contracting each block with a fixed unit probe vector:
/// W_out^T (e_{y*_i} - e_{t_tok}) normalized for the adversarial loss,
/// ones(d_v)/sqrt(d_v) for the attention loss. Diagnostic only; never used by
/// the optimizer. Throws std::invalid_argument on a zero probe.
GradientField decomposition_grad(LossKind kind, const JacobianBlocks& blocks,
                                 const EmbeddingSet& H, const ProjectionSet& P,
                                 const TargetSpec& T);

/// rel_err = |exact - fd| / max(|fd|, 1e-12); cosines between exact and
/// decomposition-form gradients (NaN when either side is zero).
GradientReport gradient_report(const EmbeddingSet& H, const Perturbation& D,
                               const ProjectionSet& P, const TargetSpec& T,
                               double fd_step = 1e-5);

/// Gradient of the selected loss with respect to the clean embedding rows,
/// including the query, key and value paths. Drives the discrete token
/// search, where swapping a token changes the base embedding itself.
MatrixXd grad_wrt_embeddings(LossKind kind, const EmbeddingSet& H,
                             const ProjectionSet& P, const TargetSpec& T);

} // namespace attnlab
