// Acceptance suite: one line per criterion, nonzero exit on any failure.
//
// Each criterion asserts the property at its stated tolerance and enforces
// its runtime budget; golden baselines were frozen from the first validated
// run of this suite (regression pins, not theory assertions).

#include "helpers.hpp"

#include "attnlab/runner.hpp"
#include "attnlab/sha256.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace attnlab;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool ok = true;
    std::ostringstream detail;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail << (detail.str().empty() ? "" : "; ") << what;
        }
    }
};

double rel_err(const GradientField& a, const GradientField& b) {
    const double diff = std::sqrt((a.d_delta_t - b.d_delta_t).squaredNorm() +
                                  (a.d_delta_v - b.d_delta_v).squaredNorm());
    return diff / std::max(b.norm(), 1e-12);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- criterion bodies ------------------------------------------------------

void criterion_gradient_correctness(Check& c) {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const RandomInstance inst = random_instance(seed);
        for (LossKind kind : {LossKind::Hallu, LossKind::Adv}) {
            const GradientField ge = exact_grad(kind, inst.H, inst.D, inst.P, inst.T);
            const GradientField gf = fd_grad(kind, inst.H, inst.D, inst.P, inst.T, 1e-5);
            worst = std::max(worst, rel_err(ge, gf));
        }
    }
    c.detail << "max rel err " << worst;
    c.expect(worst < 1e-6, "rel err >= 1e-6");
}

void criterion_jacobian_identity(Check& c) {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const RandomInstance inst = random_instance(seed);
        const JacobianBlocks B = jacobian_blocks(inst.H, inst.D, inst.P, inst.T);
        const int d_e = inst.spec.d_e, d_v = inst.spec.d_v;
        const int l = inst.spec.l;
        for (std::size_t i = 0; i < inst.T.query_positions.size(); ++i) {
            MatrixXd sum = MatrixXd::Zero(d_v, d_e);
            for (const MatrixXd& blk : B.delta_ij[i]) sum += blk;
            // FD Jacobian of o_i wrt the perturbation row of query i
            MatrixXd J(d_v, d_e);
            const double h = 1e-6;
            const int pos = inst.T.query_positions[i];
            for (int col = 0; col < d_e; ++col) {
                Perturbation dp = inst.D, dm = inst.D;
                if (pos < l) {
                    dp.delta_v(pos, col) += h;
                    dm.delta_v(pos, col) -= h;
                } else {
                    dp.delta_t(pos - l, col) += h;
                    dm.delta_t(pos - l, col) -= h;
                }
                const VectorXd op =
                    forward(inst.H, dp, inst.P, inst.T).o_tilde.row(static_cast<int>(i));
                const VectorXd om =
                    forward(inst.H, dm, inst.P, inst.T).o_tilde.row(static_cast<int>(i));
                J.col(col) = (op - om) / (2.0 * h);
            }
            worst = std::max(worst, (sum - J).norm() / std::max(J.norm(), 1e-12));
        }
    }
    c.detail << "max rel Frobenius err " << worst;
    c.expect(worst < 1e-8, "Jacobian identity violated at 1e-8");
}

void criterion_prop1_limit(Check& c) {
    const ConvergenceReport rep = prop1_sweep(SweepConfig{});
    const double golden[4] = {0.25427978317515453, 0.053442140592094663,
                              0.005828640185190521, 0.00058924915458294148};
    for (int i = 0; i < 4; ++i)
        c.expect(std::abs(rep.gaps[i] - golden[i]) <= 1e-12 * std::abs(golden[i]) + 1e-15,
                 "gap deviates from golden baseline");
    for (std::size_t i = 1; i < rep.gaps.size(); ++i)
        c.expect(rep.gaps[i] < rep.gaps[i - 1], "gap not strictly decreasing");
    c.expect(rep.fitted_order > 0.0, "fitted order not positive");
    c.detail << "gaps " << rep.gaps[0] << " .. " << rep.gaps[3] << ", order "
             << rep.fitted_order;
}

void criterion_taylor_orders(Check& c) {
    SweepConfig cfg;
    cfg.lambda_squared = false;
    cfg.lambda_fixed = 2.0;
    cfg.scales = {0.05, 0.025, 0.0125, 0.00625};
    const ConvergenceReport rep = prop1_sweep(cfg);
    c.detail << "orders hallu " << rep.taylor_order_hallu << ", adv "
             << rep.taylor_order_adv;
    c.expect(std::abs(rep.taylor_order_hallu - 3.0) <= 0.3,
             "attention-loss truncation order outside 3 +- 0.3");
    c.expect(std::abs(rep.taylor_order_adv - 3.0) <= 0.3,
             "likelihood-loss truncation order outside 3 +- 0.3");
}

void criterion_eta_beta_form(Check& c) {
    // Fixed point at several betas.
    std::mt19937_64 eng(31);
    for (int rep = 0; rep < 20; ++rep) {
        VectorXd beta(3 + static_cast<int>(eng() % 5));
        for (int j = 0; j < beta.size(); ++j)
            beta(j) = 0.005 + 0.05 * static_cast<double>(eng() % 100) / 100.0;
        const double L = 0.5 + static_cast<double>(eng() % 100) / 10.0;
        const double lam = 0.2 + static_cast<double>(eng() % 50) / 10.0;
        const EtaBetaResult r = eta_from_beta(beta, L, lam);
        c.expect(std::abs(r.C * beta.sum() - r.eta_sum) <= 1e-12,
                 "fixed-point identity violated");
    }
    // Residual order under pair scaling of the derived (eta, beta).
    VectorXd beta0(3);
    beta0 << 0.01, 0.02, 0.03;
    const EtaBetaResult base = eta_from_beta(beta0, 5.0, 0.5);
    std::vector<double> scales = {1.0, 0.5, 0.25, 0.125}, resid;
    for (double s : scales) {
        ProportionalInstance inst;
        inst.n_pos = 4;
        inst.vocab = 4;
        inst.m = 1;
        inst.lambda = 0.5;
        inst.target_logit = 5.0;
        inst.eta = s * base.eta;
        inst.beta = s * beta0;
        const ProportionalLosses ex = losses_from_proportional(inst);
        const TaylorPair t1 = taylor_losses(inst, 1);
        resid.push_back(std::abs((ex.hallu_reduced - ex.adv_excl_target) -
                                 (t1.hallu_taylor - t1.adv_taylor)));
    }
    const double order = fit_log_slope(scales, resid);
    c.detail << "residual order " << order;
    c.expect(std::abs(order - 2.0) <= 0.3, "residual order outside 2 +- 0.3");
}

void criterion_trend_reproduction(Check& c) {
    const ModelSpec spec = run_spec();
    auto [P, H] = init_model(spec);
    const TargetSpec T = default_targets(spec, H, P, 1, 1.0);

    OptimConfig hallu_cfg;
    hallu_cfg.loss_kind = LossKind::Hallu;
    const Trace th = run_perturbation_opt(H, P, T, hallu_cfg);
    const TraceRecord& h0 = th.records.front();
    const TraceRecord& hT = th.records.back();
    c.expect(!th.aborted, "attention-loss run aborted");
    c.expect(hT.eta_sum < h0.eta_sum, "eta_sum did not shrink");
    c.expect(hT.loss_hallu < h0.loss_hallu, "attention loss did not shrink");
    c.expect(hT.loss_adv < h0.loss_adv, "no co-descent of the likelihood loss");

    OptimConfig adv_cfg;
    adv_cfg.loss_kind = LossKind::Adv;
    const Trace ta = run_perturbation_opt(H, P, T, adv_cfg);
    const TraceRecord& a0 = ta.records.front();
    const TraceRecord& aT = ta.records.back();
    c.expect(!ta.aborted, "likelihood-loss run aborted");
    c.expect(aT.loss_adv < a0.loss_adv, "likelihood loss did not shrink");
    c.expect(aT.loss_hallu < a0.loss_hallu, "no co-descent of the attention loss");
    // beta trend over records where the denominator guard passed
    double beta_first = 0.0, beta_last = 0.0;
    bool have_first = false, have_last = false;
    for (const TraceRecord& r : ta.records)
        if (r.beta_valid) {
            if (!have_first) {
                beta_first = r.beta_sum;
                have_first = true;
            }
            beta_last = r.beta_sum;
            have_last = true;
        }
    c.expect(have_first && have_last, "no beta-valid records");
    c.expect(beta_last < beta_first, "beta_sum did not shrink where valid");
    c.detail << "hallu-opt: eta " << h0.eta_sum << "->" << hT.eta_sum << ", adv-opt: beta "
             << beta_first << "->" << beta_last;
}

void criterion_table1_trend(Check& c) {
    AlignmentConfig cfg;
    cfg.base = run_spec(1);
    cfg.instances = 20;
    cfg.at_step = 40; // mid-run along the shared likelihood-loss trajectory
    cfg.trajectory_loss = LossKind::Adv;
    const AlignmentReport rep = lambda_alignment_sweep(cfg);
    const std::size_t last = rep.lambda_grid.size() - 1;
    c.detail << "cos " << rep.cosine_per_lambda[0] << "->" << rep.cosine_per_lambda[last]
             << ", spearman " << rep.spearman_per_lambda[0] << "->"
             << rep.spearman_per_lambda[last];
    c.expect(rep.cosine_per_lambda[last] >= rep.cosine_per_lambda[0],
             "cosine trend inverted");
    c.expect(rep.spearman_per_lambda[last] >= rep.spearman_per_lambda[0],
             "spearman trend inverted");
    for (int n : rep.n_valid_per_lambda)
        c.expect(n == 20, "undefined metrics in the sweep");

    // Regression pins, frozen from the first validated run of this suite.
    const double kCosGolden[4] = {0.5987920601219725, 0.8376879242114782,
                                  0.84909023874383216, 0.84836257062870235};
    const double kSpearGolden[4] = {0.92899487233151967, 0.94388604018417754,
                                    0.94338373796567598, 0.94264598158225199};
    for (std::size_t i = 0; i < 4; ++i) {
        if (std::isnan(kCosGolden[i])) continue; // pins not yet frozen
        c.expect(std::abs(rep.cosine_per_lambda[i] - kCosGolden[i]) < 1e-9,
                 "cosine regression drift");
        c.expect(std::abs(rep.spearman_per_lambda[i] - kSpearGolden[i]) < 1e-9,
                 "spearman regression drift");
    }
}

void criterion_gcg_desk_scale(Check& c) {
    bool attained_optimum = false;
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        ModelSpec spec;
        spec.n = 4; spec.l = 2; spec.m = 2;
        spec.d_e = 8; spec.d_k = 4; spec.d_v = 4;
        spec.vocab = 8; spec.seed = seed;
        auto [P, H] = init_model(spec);
        TargetSpec T = default_targets(spec, H, P, 1, 1.0);
        T.query_positions = {4, 5}; // prefix tail; suffix rows act as keys/values
        GcgConfig gc;
        gc.suffix_len = 2;
        gc.topk = 4;
        gc.iters = 8;
        gc.seed = seed ^ 0x9E3779B97F4A7C15ULL;
        auto [state, trace] = gcg_suffix_opt(spec, H, P, T, gc);

        // Brute force over all vocab^k suffixes through the same forward path.
        ModelSpec ext = spec;
        ext.n = spec.n + gc.suffix_len;
        std::vector<double> all;
        double best_brute = std::numeric_limits<double>::infinity();
        for (int w0 = 0; w0 < spec.vocab; ++w0)
            for (int w1 = 0; w1 < spec.vocab; ++w1) {
                MatrixXd ht(spec.n + 2, spec.d_e);
                ht.topRows(spec.n) = H.H_t;
                ht.row(spec.n) = state.embedding_lookup.row(w0);
                ht.row(spec.n + 1) = state.embedding_lookup.row(w1);
                const EmbeddingSet He(H.H_v, ht);
                const double v =
                    jailbreak_loss(forward(He, Perturbation::zero(ext), P, T), T).total;
                all.push_back(v);
                best_brute = std::min(best_brute, v);
            }
        const double init_loss = trace.records.front().loss_adv;
        c.expect(state.best_loss <= init_loss, "search ended above initialization");
        bool member = false;
        for (double v : all)
            member = member || std::abs(v - state.best_loss) < 1e-9;
        c.expect(member, "search result not in the exhaustive loss set");
        if (std::abs(state.best_loss - best_brute) < 1e-12) attained_optimum = true;
    }
    c.expect(attained_optimum, "brute-force optimum never attained");
    c.detail << (attained_optimum ? "optimum attained" : "optimum missed");
}

void criterion_determinism(Check& c) {
    const fs::path root = fs::temp_directory_path() / "attnlab_acceptance_det";
    fs::remove_all(root);
    const std::vector<std::string> configs = {
        R"({"experiment": "prop1"})",
        R"({"experiment": "taylor"})",
        R"({"experiment": "convergence", "instances": 1, "optim": {"steps": 20}})",
        R"({"experiment": "grad-check", "instances": 3})",
        R"({"experiment": "alignment", "instances": 3, "alignment": {"at_step": 10}})",
        R"({"experiment": "gcg", "model": {"vocab": 8}, "gcg": {"suffix_len": 2, "iters": 5}})"};
    for (std::size_t k = 0; k < configs.size(); ++k) {
        RunConfig cfg = parse_config(configs[k]);
        const std::string exp = cfg.experiment;
        cfg.out_dir = (root / (exp + "_a")).string();
        const RunManifest m1 = run(cfg);
        cfg.out_dir = (root / (exp + "_b")).string();
        const RunManifest m2 = run(cfg);
        if (m1.files.size() != m2.files.size()) {
            c.expect(false, exp + ": file lists differ");
            continue;
        }
        for (std::size_t i = 0; i < m1.files.size(); ++i) {
            const std::string a = slurp(root / (exp + "_a") / m1.files[i].name);
            const std::string b = slurp(root / (exp + "_b") / m2.files[i].name);
            c.expect(!a.empty() && a == b, exp + ": " + m1.files[i].name + " differs");
        }
    }
    c.detail << configs.size() << " experiments byte-stable";
}

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<void(Check&)> body;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "gradient correctness vs finite differences (100 instances, rel err < 1e-6)",
         30.0, criterion_gradient_correctness},
        {2, "Jacobian identity of the summed blocks (20 instances, 1e-8)", 10.0,
         criterion_jacobian_identity},
        {3, "proportional-sweep loss gap decreases with positive fitted order", 1.0,
         criterion_prop1_limit},
        {4, "order-2 truncation residuals decay with exponent 3 +- 0.3", 1.0,
         criterion_taylor_orders},
        {5, "eta-from-beta fixed point (1e-12) and quadratic gap residual", 1.0,
         criterion_eta_beta_form},
        {6, "80-step co-descent of both losses on the canonical instance", 5.0,
         criterion_trend_reproduction},
        {7, "lambda alignment trend over 20 instances (cos and spearman)", 30.0,
         criterion_table1_trend},
        {8, "greedy-coordinate suffix search vs brute force (vocab 8, k 2)", 10.0,
         criterion_gcg_desk_scale},
        {9, "byte-identical reruns of every experiment", 60.0, criterion_determinism},
    };

    int failures = 0;
    for (const Criterion& cr : criteria) {
        Check check;
        const auto start = std::chrono::steady_clock::now();
        try {
            cr.body(check);
        } catch (const std::exception& e) {
            check.expect(false, std::string("exception: ") + e.what());
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        if (secs > cr.budget_seconds)
            check.expect(false, "runtime budget exceeded");
        std::cout << (check.ok ? "[PASS]" : "[FAIL]") << " criterion " << cr.id << ": "
                  << cr.name << " (" << std::fixed << secs << std::defaultfloat << "s";
        const std::string detail = check.detail.str();
        if (!detail.empty()) std::cout << "; " << detail;
        std::cout << ")\n";
        if (!check.ok) ++failures;
    }
    if (failures) std::cout << failures << " criterion(s) failed\n";
    return failures == 0 ? 0 : 1;
}
