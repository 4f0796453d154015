#include "attnlab/model.hpp"

#include "attnlab/rng.hpp"

#include <cmath>
#include <string>

namespace attnlab {

std::vector<int> default_query_positions(const ModelSpec& spec) {
    std::vector<int> q(spec.m);
    for (int i = 0; i < spec.m; ++i)
        q[i] = spec.seq_len() - spec.m + i;
    return q;
}

namespace detail {

VectorXd softmax_row(const VectorXd& scores) {
    const double mx = scores.maxCoeff();
    VectorXd e = (scores.array() - mx).exp();
    return e / e.sum();
}

} // namespace detail

std::pair<ProjectionSet, EmbeddingSet> init_model(const ModelSpec& spec) {
    spec.validate();
    GaussianStream g(spec.seed);
    const double std_dev = 1.0 / std::sqrt(static_cast<double>(spec.d_e));
    ProjectionSet P;
    P.W_Q = g.matrix(spec.d_k, spec.d_e, std_dev);
    P.W_K = g.matrix(spec.d_k, spec.d_e, std_dev);
    P.W_V = g.matrix(spec.d_v, spec.d_e, std_dev);
    P.W_out = g.matrix(spec.vocab, spec.d_v, std_dev);
    MatrixXd H_v = g.matrix(spec.l, spec.d_e, std_dev);
    MatrixXd H_t = g.matrix(spec.n, spec.d_e, std_dev);
    return {std::move(P), EmbeddingSet(std::move(H_v), std::move(H_t))};
}

namespace {

MatrixXd attention_impl(const MatrixXd& H_query, const MatrixXd& H_keys,
                        const ProjectionSet& P, const std::vector<int>& queries,
                        const AttentionOptions& opt) {
    const MatrixXd K = H_keys * P.W_K.transpose(); // N x d_k
    const double scale =
        opt.scale_by_sqrt_dk ? 1.0 / std::sqrt(static_cast<double>(P.W_Q.rows())) : 1.0;
    MatrixXd A(static_cast<int>(queries.size()), H_keys.rows());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const VectorXd q = P.W_Q * H_query.row(queries[i]).transpose();
        VectorXd scores = scale * (K * q);
        if (!scores.allFinite())
            throw std::runtime_error("attention: non-finite scores in query row " +
                                     std::to_string(queries[i]));
        A.row(static_cast<int>(i)) = detail::softmax_row(scores).transpose();
    }
    return A;
}

} // namespace

MatrixXd attention_weights(const EmbeddingSet& H, const ProjectionSet& P,
                           const std::vector<int>& queries,
                           const AttentionOptions& opt) {
    return attention_impl(H.H, H.H, P, queries, opt);
}

MatrixXd perturbed_attention(const EmbeddingSet& H, const Perturbation& D,
                             const ProjectionSet& P,
                             const std::vector<int>& queries,
                             const AttentionOptions& opt) {
    const MatrixXd Ht = H.H + D.combined();
    const MatrixXd& keys = opt.perturb_keys_values ? Ht : H.H;
    return attention_impl(Ht, keys, P, queries, opt);
}

AttentionState forward(const EmbeddingSet& H, const Perturbation& D,
                       const ProjectionSet& P, const TargetSpec& T,
                       const AttentionOptions& opt) {
    AttentionState S;
    S.A = attention_weights(H, P, T.query_positions, opt);
    S.A_delta = perturbed_attention(H, D, P, T.query_positions, opt);
    const MatrixXd values =
        (opt.perturb_keys_values ? MatrixXd(H.H + D.combined()) : H.H) *
        P.W_V.transpose();                       // N x d_v
    S.o_tilde = S.A_delta * values;              // m x d_v
    S.z = S.o_tilde * P.W_out.transpose();       // m x vocab
    return S;
}

TargetSpec default_targets(const ModelSpec& spec, const EmbeddingSet& H,
                           const ProjectionSet& P, int target_position,
                           double lambda) {
    TargetSpec T;
    T.t = target_position;
    T.lambda = lambda;
    T.query_positions = default_query_positions(spec);

    const VectorXd promote = P.W_out * (P.W_V * H.H.row(T.t).transpose());
    int y = 0;
    promote.maxCoeff(&y);
    T.y_star.assign(spec.m, y);

    AttentionState S = forward(H, Perturbation::zero(spec), P, T);
    const VectorXd mean_z = S.z.colwise().mean();
    int best = -1;
    for (int w = 0; w < spec.vocab; ++w) {
        if (w == y) continue;
        if (best < 0 || mean_z(w) > mean_z(best)) best = w;
    }
    T.t_tok = best;
    T.validate(spec);
    return T;
}

} // namespace attnlab
