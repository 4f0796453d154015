#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace attnlab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Dimensions and seed of a toy single-block attention model.
///
/// Sequence layout: positions 0..l-1 are visual, positions l..l+n-1 are text
/// (all position and token indices in this library are 0-based).
struct ModelSpec {
    int n = 6;            // text positions
    int l = 2;            // visual positions
    int m = 4;            // query/output positions
    int d_e = 8;          // embedding dimension
    int d_k = 4;          // query/key dimension
    int d_v = 4;          // value dimension
    int vocab = 16;       // vocabulary size
    std::uint64_t seed = 42;

    int seq_len() const { return n + l; }

    void validate() const {
        if (n < 1 || l < 1 || m < 1 || d_e < 1 || d_k < 1 || d_v < 1)
            throw std::invalid_argument("ModelSpec: all counts must be >= 1");
        if (m > n + l)
            throw std::invalid_argument("ModelSpec: m must not exceed n + l");
        if (vocab < 2)
            throw std::invalid_argument("ModelSpec: vocab must be >= 2");
    }
};

/// The four projection matrices of the model.
struct ProjectionSet {
    MatrixXd W_Q;     // d_k x d_e
    MatrixXd W_K;     // d_k x d_e
    MatrixXd W_V;     // d_v x d_e
    MatrixXd W_out;   // vocab x d_v
};

/// Clean input embeddings. H stacks [H_v; H_t] in that order.
struct EmbeddingSet {
    MatrixXd H_v;     // l x d_e
    MatrixXd H_t;     // n x d_e
    MatrixXd H;       // (n+l) x d_e

    EmbeddingSet() = default;
    EmbeddingSet(MatrixXd hv, MatrixXd ht)
        : H_v(std::move(hv)), H_t(std::move(ht)) {
        H.resize(H_v.rows() + H_t.rows(), H_v.cols());
        H << H_v, H_t;
    }
};

/// Additive embedding perturbation, split by modality like the embeddings.
struct Perturbation {
    MatrixXd delta_t; // n x d_e
    MatrixXd delta_v; // l x d_e

    static Perturbation zero(const ModelSpec& spec) {
        Perturbation d;
        d.delta_t = MatrixXd::Zero(spec.n, spec.d_e);
        d.delta_v = MatrixXd::Zero(spec.l, spec.d_e);
        return d;
    }

    /// Rows aligned with EmbeddingSet::H, i.e. [delta_v; delta_t].
    MatrixXd combined() const {
        MatrixXd d(delta_v.rows() + delta_t.rows(), delta_t.cols());
        d << delta_v, delta_t;
        return d;
    }

    double squared_norm() const {
        return delta_t.squaredNorm() + delta_v.squaredNorm();
    }
};

/// Attack targets: an attention position to focus on, a token sequence whose
/// likelihood the adversarial loss raises, and a competing vocabulary index
/// used by the gradient-decomposition diagnostics.
struct TargetSpec {
    int t = 0;                          // attention target position
    int t_tok = 1;                      // competing vocabulary index
    std::vector<int> y_star;            // length m, target token per query
    std::vector<int> query_positions;   // length m, distinct
    double lambda = 1.0;

    void validate(const ModelSpec& spec) const {
        const int N = spec.seq_len();
        if (t < 0 || t >= N)
            throw std::invalid_argument("TargetSpec: t out of range");
        if (t_tok < 0 || t_tok >= spec.vocab)
            throw std::invalid_argument("TargetSpec: t_tok out of range");
        if (static_cast<int>(y_star.size()) != spec.m)
            throw std::invalid_argument("TargetSpec: y_star must have length m");
        for (int y : y_star)
            if (y < 0 || y >= spec.vocab)
                throw std::invalid_argument("TargetSpec: y_star entry out of range");
        if (static_cast<int>(query_positions.size()) != spec.m)
            throw std::invalid_argument("TargetSpec: query_positions must have length m");
        std::vector<bool> seen(N, false);
        for (int q : query_positions) {
            if (q < 0 || q >= N)
                throw std::invalid_argument("TargetSpec: query position out of range");
            if (seen[q])
                throw std::invalid_argument("TargetSpec: query positions must be distinct");
            seen[q] = true;
        }
        if (lambda < 0.0)
            throw std::invalid_argument("TargetSpec: lambda must be nonnegative");
    }
};

/// Last m sequence positions, the default query set.
std::vector<int> default_query_positions(const ModelSpec& spec);

/// Clean and perturbed attention plus downstream outputs and logits.
struct AttentionState {
    MatrixXd A;        // m x (n+l), row-stochastic
    MatrixXd A_delta;  // m x (n+l), row-stochastic
    MatrixXd o_tilde;  // m x d_v
    MatrixXd z;        // m x vocab
};

} // namespace attnlab
