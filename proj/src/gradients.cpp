#include "attnlab/gradients.hpp"

#include "attnlab/analysis.hpp"

#include <cmath>
#include <string>

namespace attnlab {

VectorXd GradientField::flatten() const {
    VectorXd v(d_delta_t.size() + d_delta_v.size());
    int k = 0;
    for (int r = 0; r < d_delta_t.rows(); ++r)
        for (int c = 0; c < d_delta_t.cols(); ++c)
            v(k++) = d_delta_t(r, c);
    for (int r = 0; r < d_delta_v.rows(); ++r)
        for (int c = 0; c < d_delta_v.cols(); ++c)
            v(k++) = d_delta_v(r, c);
    return v;
}

GradientField GradientField::operator+(const GradientField& o) const {
    GradientField g;
    g.d_delta_t = d_delta_t + o.d_delta_t;
    g.d_delta_v = d_delta_v + o.d_delta_v;
    return g;
}

namespace {

/// Writes a per-sequence-row gradient into the split (delta_v; delta_t) layout.
void add_row(GradientField& g, int seq_pos, int l, const VectorXd& row) {
    if (seq_pos < l)
        g.d_delta_v.row(seq_pos) += row.transpose();
    else
        g.d_delta_t.row(seq_pos - l) += row.transpose();
}

/// dL/ds coefficients per query row for one loss, evaluated on a state.
/// For the attention loss: chi_k = c_k - a_k * (lambda (N-1) - 1) with
/// c_t = -1 and c_j = lambda. For the likelihood loss:
/// chi_k = a_k (w_k - a.w) with w_k = (W_V H_k) . W_out^T (p - e_{y*}).
MatrixXd score_coefficients(LossKind kind, const AttentionState& S,
                            const EmbeddingSet& H, const ProjectionSet& P,
                            const TargetSpec& T) {
    const int m = static_cast<int>(S.A_delta.rows());
    const int N = static_cast<int>(S.A_delta.cols());
    MatrixXd chi(m, N);
    if (kind == LossKind::Hallu) {
        const double Sc = T.lambda * (N - 1) - 1.0;
        for (int i = 0; i < m; ++i)
            for (int k = 0; k < N; ++k) {
                const double c = (k == T.t) ? -1.0 : T.lambda;
                chi(i, k) = c - S.A_delta(i, k) * Sc;
            }
        return chi;
    }
    const MatrixXd values = H.H * P.W_V.transpose(); // N x d_v
    for (int i = 0; i < m; ++i) {
        VectorXd p = detail::softmax_row(S.z.row(i));
        p(T.y_star[i]) -= 1.0;
        const VectorXd g = P.W_out.transpose() * p;  // d_v
        const VectorXd w = values * g;               // N
        const double wbar = S.A_delta.row(i).dot(w);
        for (int k = 0; k < N; ++k)
            chi(i, k) = S.A_delta(i, k) * (w(k) - wbar);
    }
    return chi;
}

GradientField exact_grad_single(LossKind kind, const EmbeddingSet& H,
                                const Perturbation& D, const ProjectionSet& P,
                                const TargetSpec& T) {
    ModelSpec dims;
    dims.n = static_cast<int>(D.delta_t.rows());
    dims.l = static_cast<int>(D.delta_v.rows());
    dims.d_e = static_cast<int>(H.H.cols());
    GradientField g;
    g.d_delta_t = MatrixXd::Zero(dims.n, dims.d_e);
    g.d_delta_v = MatrixXd::Zero(dims.l, dims.d_e);

    const AttentionState S = forward(H, D, P, T);
    const MatrixXd chi = score_coefficients(kind, S, H, P, T);
    const MatrixXd K = H.H * P.W_K.transpose();      // N x d_k
    for (std::size_t i = 0; i < T.query_positions.size(); ++i) {
        const VectorXd row =
            P.W_Q.transpose() * (K.transpose() * chi.row(static_cast<int>(i)).transpose());
        add_row(g, T.query_positions[i], dims.l, row);
    }
    return g;
}

double loss_value(LossKind kind, const AttentionState& S, const TargetSpec& T) {
    switch (kind) {
    case LossKind::Hallu: return hallucination_loss(S, T).total;
    case LossKind::Adv: return jailbreak_loss(S, T).total;
    case LossKind::Both:
        return hallucination_loss(S, T).total + jailbreak_loss(S, T).total;
    }
    return 0.0;
}

} // namespace

GradientField exact_grad(LossKind kind, const EmbeddingSet& H, const Perturbation& D,
                         const ProjectionSet& P, const TargetSpec& T) {
    if (kind == LossKind::Both) {
        return exact_grad_single(LossKind::Hallu, H, D, P, T) +
               exact_grad_single(LossKind::Adv, H, D, P, T);
    }
    return exact_grad_single(kind, H, D, P, T);
}

VectorXd central_difference(const std::function<double(const VectorXd&)>& f,
                            const VectorXd& x, double h) {
    VectorXd g(x.size());
    for (int i = 0; i < x.size(); ++i) {
        VectorXd xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        g(i) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

GradientField fd_grad(LossKind kind, const EmbeddingSet& H, const Perturbation& D,
                      const ProjectionSet& P, const TargetSpec& T, double h) {
    if (h <= 0.0)
        throw std::invalid_argument("fd_grad: step must be positive");
    GradientField g;
    g.d_delta_t = MatrixXd::Zero(D.delta_t.rows(), D.delta_t.cols());
    g.d_delta_v = MatrixXd::Zero(D.delta_v.rows(), D.delta_v.cols());

    auto eval = [&](const Perturbation& d, const char* which, int r, int c) {
        const double v = loss_value(kind, forward(H, d, P, T), T);
        if (!std::isfinite(v))
            throw std::runtime_error(std::string("fd_grad: non-finite loss at ") + which +
                                     "(" + std::to_string(r) + "," + std::to_string(c) + ")");
        return v;
    };
    Perturbation d = D;
    for (int r = 0; r < D.delta_t.rows(); ++r)
        for (int c = 0; c < D.delta_t.cols(); ++c) {
            d.delta_t(r, c) = D.delta_t(r, c) + h;
            const double fp = eval(d, "delta_t", r, c);
            d.delta_t(r, c) = D.delta_t(r, c) - h;
            const double fm = eval(d, "delta_t", r, c);
            d.delta_t(r, c) = D.delta_t(r, c);
            g.d_delta_t(r, c) = (fp - fm) / (2.0 * h);
        }
    for (int r = 0; r < D.delta_v.rows(); ++r)
        for (int c = 0; c < D.delta_v.cols(); ++c) {
            d.delta_v(r, c) = D.delta_v(r, c) + h;
            const double fp = eval(d, "delta_v", r, c);
            d.delta_v(r, c) = D.delta_v(r, c) - h;
            const double fm = eval(d, "delta_v", r, c);
            d.delta_v(r, c) = D.delta_v(r, c);
            g.d_delta_v(r, c) = (fp - fm) / (2.0 * h);
        }
    return g;
}

JacobianBlocks jacobian_blocks(const EmbeddingSet& H, const Perturbation& D,
                               const ProjectionSet& P, const TargetSpec& T) {
    const AttentionState S = forward(H, D, P, T);
    const int m = static_cast<int>(S.A_delta.rows());
    const int N = static_cast<int>(S.A_delta.cols());

    const MatrixXd U = H.H * (P.W_Q.transpose() * P.W_K).transpose(); // N x d_e, rows u_j
    const MatrixXd values = H.H * P.W_V.transpose();                  // N x d_v

    JacobianBlocks B;
    B.delta_ij.resize(m);
    B.delta_softmax.resize(m);
    B.gamma_adv.resize(m, N);
    B.gamma_hallu.resize(m, N);
    for (int i = 0; i < m; ++i) {
        const VectorXd ubar = U.transpose() * S.A_delta.row(i).transpose(); // d_e
        B.delta_ij[i].reserve(N);
        for (int j = 0; j < N; ++j) {
            const VectorXd coeff =
                S.A_delta(i, j) * (U.row(j).transpose() - ubar);            // d_e
            B.delta_ij[i].push_back(values.row(j).transpose() * coeff.transpose());
        }
        const VectorXd p = detail::softmax_row(S.z.row(i));
        B.delta_softmax(i) = p(T.y_star[i]) - p(T.t_tok);
        for (int j = 0; j < N; ++j) {
            B.gamma_adv(i, j) = B.delta_softmax(i);
            B.gamma_hallu(i, j) = (j == T.t) ? -1.0 : T.lambda;
        }
    }
    return B;
}

GradientField decomposition_grad(LossKind kind, const JacobianBlocks& blocks,
                                 const EmbeddingSet& H, const ProjectionSet& P,
                                 const TargetSpec& T) {
    if (kind == LossKind::Both)
        throw std::invalid_argument("decomposition_grad: kind must be Hallu or Adv");
    ModelSpec dims;
    dims.d_e = static_cast<int>(H.H.cols());
    dims.l = static_cast<int>(H.H_v.rows());
    dims.n = static_cast<int>(H.H_t.rows());

    GradientField g;
    g.d_delta_t = MatrixXd::Zero(dims.n, dims.d_e);
    g.d_delta_v = MatrixXd::Zero(dims.l, dims.d_e);

    const int m = static_cast<int>(blocks.delta_softmax.size());
    const int N = static_cast<int>(blocks.gamma_adv.cols());
    const int d_v = static_cast<int>(P.W_V.rows());
    for (int i = 0; i < m; ++i) {
        VectorXd probe;
        if (kind == LossKind::Adv) {
            VectorXd e = VectorXd::Zero(P.W_out.rows());
            e(T.y_star[i]) += 1.0;
            e(T.t_tok) -= 1.0;
            probe = P.W_out.transpose() * e;
        } else {
            probe = VectorXd::Ones(d_v);
        }
        const double nrm = probe.norm();
        if (nrm == 0.0)
            throw std::invalid_argument("decomposition_grad: zero probe vector");
        probe /= nrm;

        const MatrixXd& gamma =
            (kind == LossKind::Adv) ? blocks.gamma_adv : blocks.gamma_hallu;
        VectorXd row = VectorXd::Zero(dims.d_e);
        for (int j = 0; j < N; ++j)
            row += gamma(i, j) * (blocks.delta_ij[i][j].transpose() * probe);
        add_row(g, T.query_positions[i], dims.l, row);
    }
    return g;
}

GradientReport gradient_report(const EmbeddingSet& H, const Perturbation& D,
                               const ProjectionSet& P, const TargetSpec& T,
                               double fd_step) {
    GradientReport R;
    R.exact_adv = exact_grad(LossKind::Adv, H, D, P, T);
    R.exact_hallu = exact_grad(LossKind::Hallu, H, D, P, T);
    R.fd_adv = fd_grad(LossKind::Adv, H, D, P, T, fd_step);
    R.fd_hallu = fd_grad(LossKind::Hallu, H, D, P, T, fd_step);
    const JacobianBlocks B = jacobian_blocks(H, D, P, T);
    R.decomp_adv = decomposition_grad(LossKind::Adv, B, H, P, T);
    R.decomp_hallu = decomposition_grad(LossKind::Hallu, B, H, P, T);

    auto rel_err = [](const GradientField& a, const GradientField& b) {
        const double diff = std::sqrt((a.d_delta_t - b.d_delta_t).squaredNorm() +
                                      (a.d_delta_v - b.d_delta_v).squaredNorm());
        return diff / std::max(b.norm(), 1e-12);
    };
    R.rel_err_fd_adv = rel_err(R.exact_adv, R.fd_adv);
    R.rel_err_fd_hallu = rel_err(R.exact_hallu, R.fd_hallu);
    R.cos_exact_vs_decomp_adv =
        cosine_similarity(R.exact_adv.flatten(), R.decomp_adv.flatten()).value;
    R.cos_exact_vs_decomp_hallu =
        cosine_similarity(R.exact_hallu.flatten(), R.decomp_hallu.flatten()).value;
    return R;
}

MatrixXd grad_wrt_embeddings(LossKind kind, const EmbeddingSet& H,
                             const ProjectionSet& P, const TargetSpec& T) {
    if (kind == LossKind::Both) {
        return grad_wrt_embeddings(LossKind::Hallu, H, P, T) +
               grad_wrt_embeddings(LossKind::Adv, H, P, T);
    }
    const int N = static_cast<int>(H.H.rows());
    const int d_e = static_cast<int>(H.H.cols());
    Perturbation D;
    D.delta_v = MatrixXd::Zero(H.H_v.rows(), d_e);
    D.delta_t = MatrixXd::Zero(H.H_t.rows(), d_e);

    const AttentionState S = forward(H, D, P, T);
    const MatrixXd chi = score_coefficients(kind, S, H, P, T);
    const MatrixXd K = H.H * P.W_K.transpose();
    MatrixXd G = MatrixXd::Zero(N, d_e);
    for (std::size_t i = 0; i < T.query_positions.size(); ++i) {
        const int qi = T.query_positions[i];
        const int ri = static_cast<int>(i);
        // query path
        G.row(qi) +=
            (P.W_Q.transpose() * (K.transpose() * chi.row(ri).transpose())).transpose();
        // key path: dL/dH_p += chi_p * W_K^T q_i
        const VectorXd q = P.W_Q * H.H.row(qi).transpose();
        const VectorXd kq = P.W_K.transpose() * q;
        G += chi.row(ri).transpose() * kq.transpose();
        // value path: dL/dH_p += a_p * W_V^T dL/do_i (zero for the attention loss)
        if (kind == LossKind::Adv) {
            VectorXd p = detail::softmax_row(S.z.row(ri));
            p(T.y_star[i]) -= 1.0;
            const VectorXd dLdo = P.W_out.transpose() * p;
            G += S.A_delta.row(ri).transpose() * (P.W_V.transpose() * dLdo).transpose();
        }
    }
    return G;
}

} // namespace attnlab
