#include "attnlab/optimizer.hpp"

#include "attnlab/analysis.hpp"
#include "attnlab/rng.hpp"

#include <algorithm>
#include <cmath>

namespace attnlab {

Perturbation project_constraint(const Perturbation& D, const Constraint& c) {
    switch (c.kind) {
    case Constraint::Kind::None:
        return D;
    case Constraint::Kind::L2Ball: {
        const double norm = std::sqrt(D.squared_norm());
        if (norm <= c.radius) return D;
        Perturbation out = D;
        const double s = c.radius / norm;
        out.delta_t *= s;
        out.delta_v *= s;
        return out;
    }
    case Constraint::Kind::LinfBall: {
        Perturbation out = D;
        auto clamp = [&](MatrixXd& m) {
            m = m.cwiseMax(-c.radius).cwiseMin(c.radius);
        };
        clamp(out.delta_t);
        clamp(out.delta_v);
        return out;
    }
    }
    return D;
}

namespace {

TraceRecord make_record(int step, const EmbeddingSet& H, const Perturbation& D,
                        const ProjectionSet& P, const TargetSpec& T) {
    const AttentionState S = forward(H, D, P, T);
    TraceRecord r;
    r.step = step;
    r.loss_hallu = hallucination_loss(S, T).total;
    r.loss_adv = jailbreak_loss(S, T).total;
    const ScalingFactors F = scaling_factors(S, T, /*aggregate=*/true);
    r.eta_sum = F.eta_sum(0);
    r.beta_valid = F.valid;
    r.beta_sum = F.valid ? F.beta_sum(0) : std::numeric_limits<double>::quiet_NaN();
    const GradientField gh = exact_grad(LossKind::Hallu, H, D, P, T);
    const GradientField ga = exact_grad(LossKind::Adv, H, D, P, T);
    r.grad_norm_hallu = gh.norm();
    r.grad_norm_adv = ga.norm();
    r.grad_cosine = cosine_similarity(gh.flatten(), ga.flatten()).value;
    return r;
}

} // namespace

Trace run_perturbation_opt(const EmbeddingSet& H, const ProjectionSet& P,
                           const TargetSpec& T, const OptimConfig& cfg,
                           const std::function<void(int, const Perturbation&)>& observer) {
    cfg.validate();
    TargetSpec target = T;
    if (!std::isnan(cfg.lambda))
        target.lambda = cfg.lambda;

    ModelSpec dims;
    dims.n = static_cast<int>(H.H_t.rows());
    dims.l = static_cast<int>(H.H_v.rows());
    dims.d_e = static_cast<int>(H.H.cols());
    Perturbation D = Perturbation::zero(dims);

    const double sign = (cfg.direction == Direction::Minimize) ? 1.0 : -1.0;
    Trace trace;
    trace.records.reserve(cfg.steps + 1);
    for (int step = 0; step <= cfg.steps; ++step) {
        TraceRecord rec;
        try {
            rec = make_record(step, H, D, P, target);
        } catch (const std::exception& e) {
            trace.aborted = true;
            trace.abort_reason = e.what();
            return trace;
        }
        if (!std::isfinite(rec.loss_hallu) || !std::isfinite(rec.loss_adv)) {
            trace.aborted = true;
            trace.abort_reason = "non-finite loss at step " + std::to_string(step);
            trace.records.push_back(rec);
            return trace;
        }
        trace.records.push_back(rec);
        if (observer) observer(step, D);
        if (step == cfg.steps) break;

        const GradientField g = exact_grad(cfg.loss_kind, H, D, P, target);
        const double norm = g.norm();
        if (norm > 0.0 && cfg.step_size > 0.0) {
            const double scale = sign * cfg.step_size / norm;
            D.delta_t -= scale * g.d_delta_t;
            D.delta_v -= scale * g.d_delta_v;
            D = project_constraint(D, cfg.constraint);
        }
    }
    return trace;
}

namespace {

/// Prefix embeddings extended with suffix token embeddings as extra text rows.
EmbeddingSet extend_with_suffix(const EmbeddingSet& H, const MatrixXd& table,
                                const std::vector<int>& tokens) {
    MatrixXd ht(H.H_t.rows() + static_cast<int>(tokens.size()), H.H_t.cols());
    ht.topRows(H.H_t.rows()) = H.H_t;
    for (std::size_t s = 0; s < tokens.size(); ++s)
        ht.row(H.H_t.rows() + static_cast<int>(s)) = table.row(tokens[s]);
    return EmbeddingSet(H.H_v, std::move(ht));
}

} // namespace

std::pair<SuffixState, Trace> gcg_suffix_opt(const ModelSpec& spec,
                                             const EmbeddingSet& H,
                                             const ProjectionSet& P,
                                             const TargetSpec& T,
                                             const GcgConfig& cfg) {
    if (cfg.suffix_len <= 0)
        throw std::invalid_argument("gcg_suffix_opt: suffix length must be positive");
    if (cfg.topk < 1 || cfg.iters < 0)
        throw std::invalid_argument("gcg_suffix_opt: bad topk/iters");
    if (spec.vocab > 256)
        throw std::invalid_argument("gcg_suffix_opt: vocab too large for candidate evaluation");

    GaussianStream g(cfg.seed);
    SuffixState state;
    state.embedding_lookup =
        g.matrix(spec.vocab, spec.d_e, 1.0 / std::sqrt(static_cast<double>(spec.d_e)));
    state.suffix_tokens.assign(cfg.suffix_len, 0);

    const int prefix_text_rows = static_cast<int>(H.H_t.rows());
    ModelSpec ext = spec;
    ext.n = spec.n + cfg.suffix_len;

    auto adv_loss_of = [&](const std::vector<int>& tokens) {
        const EmbeddingSet He = extend_with_suffix(H, state.embedding_lookup, tokens);
        const AttentionState S = forward(He, Perturbation::zero(ext), P, T);
        return jailbreak_loss(S, T).total;
    };
    auto record_state = [&](int step, const std::vector<int>& tokens) {
        const EmbeddingSet He = extend_with_suffix(H, state.embedding_lookup, tokens);
        return make_record(step, He, Perturbation::zero(ext), P, T);
    };

    state.best_loss = adv_loss_of(state.suffix_tokens);
    Trace trace;
    trace.records.push_back(record_state(0, state.suffix_tokens));

    for (int it = 1; it <= cfg.iters; ++it) {
        const EmbeddingSet He =
            extend_with_suffix(H, state.embedding_lookup, state.suffix_tokens);
        const MatrixXd G = grad_wrt_embeddings(LossKind::Adv, He, P, T);

        // Candidate substitutions per slot, ranked by the one-hot relaxation
        // gradient (lookup row dotted with the slot's embedding gradient).
        struct Swap { int slot; int token; };
        std::vector<Swap> candidates;
        for (int s = 0; s < cfg.suffix_len; ++s) {
            const int row = static_cast<int>(H.H_v.rows()) + prefix_text_rows + s;
            const VectorXd slot_grad = G.row(row).transpose();
            const VectorXd scores = state.embedding_lookup * slot_grad;
            std::vector<int> order(spec.vocab);
            for (int w = 0; w < spec.vocab; ++w) order[w] = w;
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                return scores(a) < scores(b);
            });
            int taken = 0;
            for (int w : order) {
                if (w == state.suffix_tokens[s]) continue;
                candidates.push_back({s, w});
                if (++taken == cfg.topk) break;
            }
        }

        // Evaluate every candidate's true loss; commit the best improving swap.
        int best_slot = -1, best_token = -1;
        double best_val = state.best_loss;
        for (const Swap& sw : candidates) {
            std::vector<int> trial = state.suffix_tokens;
            trial[sw.slot] = sw.token;
            const double v = adv_loss_of(trial);
            if (v < best_val) {
                best_val = v;
                best_slot = sw.slot;
                best_token = sw.token;
            }
        }
        if (best_slot >= 0) {
            state.suffix_tokens[best_slot] = best_token;
            state.best_loss = best_val;
        }
        trace.records.push_back(record_state(it, state.suffix_tokens));
    }
    return {std::move(state), std::move(trace)};
}

} // namespace attnlab
