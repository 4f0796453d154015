#pragma once

#include "attnlab/gradients.hpp"

#include <functional>
#include <string>

namespace attnlab {

enum class Direction { Minimize, Maximize };

struct Constraint {
    enum class Kind { None, L2Ball, LinfBall };
    Kind kind = Kind::None;
    double radius = 0.0;

    static Constraint none() { return {}; }
    static Constraint l2_ball(double r) { return {Kind::L2Ball, r}; }
    static Constraint linf_ball(double r) { return {Kind::LinfBall, r}; }

    void validate() const {
        if (kind != Kind::None && radius <= 0.0)
            throw std::invalid_argument("Constraint: radius must be positive");
    }
};

struct OptimConfig {
    int steps = 80;
    double step_size = 0.05;
    Direction direction = Direction::Minimize;
    Constraint constraint;
    LossKind loss_kind = LossKind::Hallu;
    /// Overrides TargetSpec::lambda for the run when set (NaN = keep).
    double lambda = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t seed = 42;

    void validate() const {
        if (steps < 1)
            throw std::invalid_argument("OptimConfig: steps must be >= 1");
        if (step_size < 0.0)
            throw std::invalid_argument("OptimConfig: step_size must be nonnegative");
        constraint.validate();
    }
};

/// One row of the per-step trace. Both losses and the concentration metrics
/// are recorded regardless of which loss is optimized.
struct TraceRecord {
    int step = 0;
    double loss_hallu = 0.0;
    double loss_adv = 0.0;
    double eta_sum = 0.0;
    double beta_sum = 0.0;
    bool beta_valid = false;
    double grad_cosine = 0.0;      // cosine of the two exact gradients; NaN if undefined
    double grad_norm_hallu = 0.0;
    double grad_norm_adv = 0.0;
};

struct Trace {
    std::vector<TraceRecord> records;
    bool aborted = false;
    std::string abort_reason;
};

/// Euclidean projection onto the constraint set (joint over both perturbation
/// blocks); identity inside the set or for Constraint::None. Idempotent.
Perturbation project_constraint(const Perturbation& D, const Constraint& c);

/// Normalized-gradient iteration
///   D <- project(D -/+ step_size * grad / |grad|),
/// descending under Minimize. Records steps 0..steps inclusive; a non-finite
/// loss aborts with the partial trace retained. The optional observer sees
/// every recorded iterate.
Trace run_perturbation_opt(const EmbeddingSet& H, const ProjectionSet& P,
                           const TargetSpec& T, const OptimConfig& cfg,
                           const std::function<void(int, const Perturbation&)>& observer = {});

/// Discrete suffix state of the greedy-coordinate token search.
struct SuffixState {
    std::vector<int> suffix_tokens;
    MatrixXd embedding_lookup; // vocab x d_e
    double best_loss = 0.0;
};

struct GcgConfig {
    int suffix_len = 20;
    int topk = 4;
    int iters = 20;
    std::uint64_t seed = 42;
};

/// Greedy coordinate search over suffix tokens appended after the text
/// positions. Candidate substitutions are ranked per slot by the one-hot
/// relaxation gradient of the likelihood loss; each iteration evaluates the
/// true loss of every candidate and commits the single best improving swap.
/// Tokens start at 0; the lookup table is sampled from GaussianStream(seed)
/// with std 1/sqrt(d_e). Deterministic given the seed.
std::pair<SuffixState, Trace> gcg_suffix_opt(const ModelSpec& spec,
                                             const EmbeddingSet& H,
                                             const ProjectionSet& P,
                                             const TargetSpec& T,
                                             const GcgConfig& cfg);

} // namespace attnlab
