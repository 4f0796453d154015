#pragma once

#include "attnlab/model.hpp"
#include "attnlab/rng.hpp"

#include <random>

namespace testutil {

using namespace attnlab;

/// Tiny instance used for all golden-value tests: n=2 l=1 m=2, d_e=d_k=d_v=2,
/// vocab=3, seed 42, queries {1,2}, target position 0.
inline ModelSpec small_spec() {
    ModelSpec s;
    s.n = 2; s.l = 1; s.m = 2;
    s.d_e = 2; s.d_k = 2; s.d_v = 2;
    s.vocab = 3; s.seed = 42;
    return s;
}

inline TargetSpec small_targets(double lambda = 1.0) {
    TargetSpec T;
    T.t = 0;
    T.t_tok = 1;
    T.y_star = {0, 0};
    T.query_positions = {1, 2};
    T.lambda = lambda;
    return T;
}

/// Perturbation used by the golden forward/loss values: 0.1 on every text
/// entry, zero on visual entries.
inline Perturbation small_perturbation() {
    const ModelSpec s = small_spec();
    Perturbation D = Perturbation::zero(s);
    D.delta_t.setConstant(0.1);
    return D;
}

/// Mid-size instance driving the optimization and trend tests.
inline ModelSpec run_spec(std::uint64_t seed = 42) {
    ModelSpec s;
    s.n = 6; s.l = 2; s.m = 4;
    s.d_e = 8; s.d_k = 4; s.d_v = 4;
    s.vocab = 16; s.seed = seed;
    return s;
}

/// Seeded random instance within the acceptance bounds (n+l <= 16,
/// d_e <= 16, vocab <= 64), with a nonzero perturbation and valid targets.
struct RandomInstance {
    ModelSpec spec;
    ProjectionSet P;
    EmbeddingSet H;
    Perturbation D;
    TargetSpec T;
};

inline RandomInstance random_instance(std::uint64_t seed) {
    std::mt19937_64 eng(seed * 0x9E3779B97F4A7C15ULL + 1);
    auto pick = [&](int lo, int hi) {
        return lo + static_cast<int>(eng() % static_cast<std::uint64_t>(hi - lo + 1));
    };
    RandomInstance inst;
    inst.spec.n = pick(2, 10);
    inst.spec.l = pick(1, 5);
    inst.spec.m = pick(1, std::min(4, inst.spec.n + inst.spec.l));
    inst.spec.d_e = pick(2, 16);
    inst.spec.d_k = pick(2, 8);
    inst.spec.d_v = pick(2, 8);
    inst.spec.vocab = pick(3, 64);
    inst.spec.seed = seed;
    std::tie(inst.P, inst.H) = init_model(inst.spec);

    GaussianStream g(seed ^ 0xD1B54A32D192ED03ULL);
    inst.D.delta_v = 0.1 * g.matrix(inst.spec.l, inst.spec.d_e, 1.0);
    inst.D.delta_t = 0.1 * g.matrix(inst.spec.n, inst.spec.d_e, 1.0);

    const int t = pick(0, inst.spec.seq_len() - 1);
    static const double lambdas[] = {0.1, 1.0, 10.0};
    inst.T = default_targets(inst.spec, inst.H, inst.P, t, lambdas[seed % 3]);
    return inst;
}

// Golden values from an independent 50-digit evaluation of the small
// instance (frozen; 17 significant digits).
inline const double kGoldenCleanA[2][3] = {
    {0.2860519153620345, 0.3721729813385598, 0.34177510329940571},
    {0.25644511095975709, 0.39821309537150223, 0.34534179366874068}};
inline const double kGoldenPerturbedA[2][3] = {
    {0.27428290696746376, 0.38235078363406321, 0.34336630939847303},
    {0.24541642769379569, 0.40830810781328992, 0.34627546449291439}};
inline const double kGoldenOTilde[2][2] = {
    {-0.32704555393015963, -1.8674147178359592},
    {-0.30059212888967413, -1.7907056453589351}};
inline const double kGoldenZ[2][3] = {
    {1.0029403647500003, 0.13820556529133715, -0.14842094697791646},
    {0.95653768013658598, 0.13788316935850968, -0.14890098872543066}};
inline constexpr double kGoldenJailbreakTotal = 1.1245318391020787;
inline const double kGoldenJailbreakPer[2] = {0.55237204487656319, 0.57215979422551552};
inline constexpr double kGoldenHalluLambda10Total = -37.167887576561838;
inline const double kGoldenHalluLambda10Per[2] = {-19.01014734412613,
                                                  -18.157740232435708};
// Exact gradients at zero perturbation, lambda = 1 (rows = query positions 1,2).
inline const double kGoldenGradHallu[2][2] = {
    {0.34120675257787248, 0.39906516870141226},
    {0.33215957927228735, 0.38848234640362467}};
inline const double kGoldenGradAdv[2][2] = {
    {0.036179443537867143, 0.042320258157865047},
    {0.035492133919086416, 0.041516953343368781}};

} // namespace testutil
