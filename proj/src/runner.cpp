#include "attnlab/runner.hpp"

#include "attnlab/rng.hpp"
#include "attnlab/sha256.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace attnlab {

const char* const kArtifactVersion = "0.1.0";

TargetSpec TargetConfig::resolve(const ModelSpec& spec, const EmbeddingSet& H,
                                 const ProjectionSet& P) const {
    TargetSpec T = default_targets(spec, H, P, t, lambda);
    if (!y_star.empty()) T.y_star = y_star;
    if (t_tok >= 0) T.t_tok = t_tok;
    if (!query_positions.empty()) T.query_positions = query_positions;
    T.validate(spec);
    return T;
}

namespace {

void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& known) {
    if (!j.is_object())
        throw ConfigError("config: " + where + " must be an object");
    std::string unknown;
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            unknown += (unknown.empty() ? "" : ", ") + it.key();
    if (!unknown.empty())
        throw ConfigError("config: unknown key(s) in " + where + ": " + unknown);
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

ModelSpec parse_model(const json& j) {
    check_keys(j, "model", {"n", "l", "m", "d_e", "d_k", "d_v", "vocab", "seed"});
    ModelSpec s;
    read_field(j, "n", s.n);
    read_field(j, "l", s.l);
    read_field(j, "m", s.m);
    read_field(j, "d_e", s.d_e);
    read_field(j, "d_k", s.d_k);
    read_field(j, "d_v", s.d_v);
    read_field(j, "vocab", s.vocab);
    read_field(j, "seed", s.seed);
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return s;
}

TargetConfig parse_target(const json& j) {
    check_keys(j, "target", {"t", "t_tok", "y_star", "query_positions", "lambda"});
    TargetConfig t;
    read_field(j, "t", t.t);
    read_field(j, "t_tok", t.t_tok);
    read_field(j, "y_star", t.y_star);
    read_field(j, "query_positions", t.query_positions);
    read_field(j, "lambda", t.lambda);
    if (t.lambda < 0.0)
        throw ConfigError("config: target.lambda must be nonnegative");
    return t;
}

OptimConfig parse_optim(const json& j) {
    check_keys(j, "optim",
               {"steps", "step_size", "direction", "constraint", "loss_kind", "lambda",
                "seed"});
    OptimConfig o;
    read_field(j, "steps", o.steps);
    read_field(j, "step_size", o.step_size);
    read_field(j, "seed", o.seed);
    if (j.contains("lambda")) o.lambda = j.at("lambda").get<double>();
    if (j.contains("direction")) {
        const std::string d = j.at("direction").get<std::string>();
        if (d == "minimize") o.direction = Direction::Minimize;
        else if (d == "maximize") o.direction = Direction::Maximize;
        else throw ConfigError("config: optim.direction must be minimize or maximize");
    }
    if (j.contains("loss_kind")) {
        const std::string k = j.at("loss_kind").get<std::string>();
        if (k == "hallu") o.loss_kind = LossKind::Hallu;
        else if (k == "adv") o.loss_kind = LossKind::Adv;
        else if (k == "both") o.loss_kind = LossKind::Both;
        else throw ConfigError("config: optim.loss_kind must be hallu, adv or both");
    }
    if (j.contains("constraint")) {
        const json& c = j.at("constraint");
        check_keys(c, "optim.constraint", {"type", "radius"});
        std::string type = "none";
        read_field(c, "type", type);
        double radius = 0.0;
        read_field(c, "radius", radius);
        if (type == "none") o.constraint = Constraint::none();
        else if (type == "l2_ball") o.constraint = Constraint::l2_ball(radius);
        else if (type == "linf_ball") o.constraint = Constraint::linf_ball(radius);
        else throw ConfigError("config: constraint.type must be none, l2_ball or linf_ball");
    }
    try {
        o.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return o;
}

GcgConfig parse_gcg(const json& j, std::uint64_t default_seed) {
    check_keys(j, "gcg", {"suffix_len", "topk", "iters", "seed"});
    GcgConfig g;
    g.seed = default_seed;
    read_field(j, "suffix_len", g.suffix_len);
    read_field(j, "topk", g.topk);
    read_field(j, "iters", g.iters);
    read_field(j, "seed", g.seed);
    if (g.suffix_len < 1 || g.topk < 1 || g.iters < 0)
        throw ConfigError("config: gcg fields must be positive");
    return g;
}

AlignmentConfig parse_alignment(const json& j) {
    check_keys(j, "alignment",
               {"grid", "at_step", "trajectory_loss", "trajectory_lambda", "step_size",
                "spearman_signed"});
    AlignmentConfig a;
    // The canonical sweep measures mid-run along the shared likelihood-loss
    // trajectory, where attention has concentrated on the target position.
    a.at_step = 40;
    a.trajectory_loss = LossKind::Adv;
    read_field(j, "grid", a.lambda_grid);
    read_field(j, "at_step", a.at_step);
    read_field(j, "trajectory_lambda", a.trajectory_lambda);
    read_field(j, "step_size", a.step_size);
    read_field(j, "spearman_signed", a.spearman_signed);
    if (j.contains("trajectory_loss")) {
        const std::string k = j.at("trajectory_loss").get<std::string>();
        if (k == "hallu") a.trajectory_loss = LossKind::Hallu;
        else if (k == "adv") a.trajectory_loss = LossKind::Adv;
        else throw ConfigError("config: alignment.trajectory_loss must be hallu or adv");
    }
    if (a.lambda_grid.empty())
        throw ConfigError("config: alignment.grid must be nonempty");
    if (a.at_step < 0)
        throw ConfigError("config: alignment.at_step must be nonnegative");
    return a;
}

SweepConfig parse_sweep(const json& j, const std::string& where, bool lambda_squared) {
    check_keys(j, where, {"scales", "n_pos", "vocab", "m", "target_logit", "lambda"});
    SweepConfig s;
    s.lambda_squared = lambda_squared;
    if (!lambda_squared) s.scales = {0.05, 0.025, 0.0125, 0.00625};
    read_field(j, "scales", s.scales);
    read_field(j, "n_pos", s.n_pos);
    read_field(j, "vocab", s.vocab);
    read_field(j, "m", s.m);
    read_field(j, "target_logit", s.target_logit);
    read_field(j, "lambda", s.lambda_fixed);
    return s;
}

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&tt));
    return buf;
}

} // namespace

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: not well-formed JSON: ") + e.what());
    }
    check_keys(j, "top level",
               {"model", "target", "optim", "gcg", "alignment", "prop1", "taylor",
                "experiment", "instances", "out_dir"});

    RunConfig cfg;
    if (j.contains("model")) cfg.model = parse_model(j.at("model"));
    if (j.contains("target")) cfg.target = parse_target(j.at("target"));
    if (j.contains("optim")) cfg.optim = parse_optim(j.at("optim"));
    cfg.gcg = parse_gcg(j.contains("gcg") ? j.at("gcg") : json::object(), cfg.model.seed);
    cfg.alignment =
        parse_alignment(j.contains("alignment") ? j.at("alignment") : json::object());
    cfg.prop1 = parse_sweep(j.contains("prop1") ? j.at("prop1") : json::object(), "prop1",
                            /*lambda_squared=*/true);
    cfg.taylor = parse_sweep(j.contains("taylor") ? j.at("taylor") : json::object(),
                             "taylor", /*lambda_squared=*/false);
    if (!j.contains("experiment"))
        throw ConfigError("config: missing required field: experiment");
    cfg.experiment = j.at("experiment").get<std::string>();
    static const std::set<std::string> kExperiments = {"convergence", "alignment",
                                                       "grad-check", "gcg", "taylor",
                                                       "prop1"};
    if (!kExperiments.count(cfg.experiment))
        throw ConfigError("config: unknown experiment: " + cfg.experiment);
    read_field(j, "instances", cfg.instances);
    if (cfg.instances < 1)
        throw ConfigError("config: instances must be >= 1");
    read_field(j, "out_dir", cfg.out_dir);
    return cfg;
}

json config_to_json(const RunConfig& cfg) {
    json optim{{"steps", cfg.optim.steps},
               {"step_size", cfg.optim.step_size},
               {"direction",
                cfg.optim.direction == Direction::Minimize ? "minimize" : "maximize"},
               {"loss_kind", cfg.optim.loss_kind == LossKind::Hallu  ? "hallu"
                             : cfg.optim.loss_kind == LossKind::Adv ? "adv"
                                                                    : "both"},
               {"seed", cfg.optim.seed}};
    if (!std::isnan(cfg.optim.lambda)) optim["lambda"] = cfg.optim.lambda;
    switch (cfg.optim.constraint.kind) {
    case Constraint::Kind::None:
        optim["constraint"] = {{"type", "none"}};
        break;
    case Constraint::Kind::L2Ball:
        optim["constraint"] = {{"type", "l2_ball"}, {"radius", cfg.optim.constraint.radius}};
        break;
    case Constraint::Kind::LinfBall:
        optim["constraint"] = {{"type", "linf_ball"}, {"radius", cfg.optim.constraint.radius}};
        break;
    }
    return json{
        {"model",
         {{"n", cfg.model.n}, {"l", cfg.model.l}, {"m", cfg.model.m},
          {"d_e", cfg.model.d_e}, {"d_k", cfg.model.d_k}, {"d_v", cfg.model.d_v},
          {"vocab", cfg.model.vocab}, {"seed", cfg.model.seed}}},
        {"target",
         {{"t", cfg.target.t}, {"t_tok", cfg.target.t_tok},
          {"y_star", cfg.target.y_star},
          {"query_positions", cfg.target.query_positions},
          {"lambda", cfg.target.lambda}}},
        {"optim", optim},
        {"gcg",
         {{"suffix_len", cfg.gcg.suffix_len}, {"topk", cfg.gcg.topk},
          {"iters", cfg.gcg.iters}, {"seed", cfg.gcg.seed}}},
        {"alignment",
         {{"grid", cfg.alignment.lambda_grid}, {"at_step", cfg.alignment.at_step},
          {"trajectory_loss",
           cfg.alignment.trajectory_loss == LossKind::Hallu ? "hallu" : "adv"},
          {"trajectory_lambda", cfg.alignment.trajectory_lambda},
          {"step_size", cfg.alignment.step_size},
          {"spearman_signed", cfg.alignment.spearman_signed}}},
        {"experiment", cfg.experiment},
        {"instances", cfg.instances},
        {"out_dir", cfg.out_dir}};
}

json RunManifest::to_json() const {
    json fs = json::array();
    for (const ManifestFile& f : files)
        fs.push_back({{"name", f.name}, {"sha256", f.sha256}});
    return json{{"config", config},   {"version", version}, {"started", started},
                {"finished", finished}, {"files", fs},       {"pass", pass}};
}

namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& content,
                std::vector<ManifestFile>& files) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << content;
    out.close();
    files.push_back({path.filename().string(), sha256_hex(content)});
}

std::string csv_of_trace(const Trace& t) {
    std::ostringstream ss;
    write_trace_csv(ss, t);
    return ss.str();
}

bool run_convergence(const RunConfig& cfg, const fs::path& dir,
                     std::vector<ManifestFile>& files) {
    bool pass = true;
    json summary = json::object();
    for (int inst = 0; inst < cfg.instances; ++inst) {
        ModelSpec spec = cfg.model;
        spec.seed = cfg.model.seed + static_cast<std::uint64_t>(inst);
        auto [P, H] = init_model(spec);
        const TargetSpec T = cfg.target.resolve(spec, H, P);
        for (LossKind kind : {LossKind::Hallu, LossKind::Adv}) {
            OptimConfig oc = cfg.optim;
            oc.loss_kind = kind;
            const Trace trace = run_perturbation_opt(H, P, T, oc);
            const std::string stem = std::string(kind == LossKind::Hallu ? "hallu" : "adv") +
                                     "_seed" + std::to_string(spec.seed);
            write_file(dir / ("trace_" + stem + ".csv"), csv_of_trace(trace), files);
            if (trace.aborted) {
                pass = false;
                summary[stem] = {{"aborted", true}, {"reason", trace.abort_reason}};
                continue;
            }
            const TrendSummary ts = trend_test(trace);
            summary[stem] = to_json(ts);
            // Built-in assertion: the optimized loss must end below its start.
            // Cross-loss co-descent is instance-dependent and only reported.
            const SeriesTrend& optimized =
                (kind == LossKind::Hallu) ? ts.loss_hallu : ts.loss_adv;
            pass = pass && optimized.last < optimized.first;
        }
    }
    write_file(dir / "trend_summary.json", summary.dump(2) + "\n", files);
    return pass;
}

bool run_alignment(const RunConfig& cfg, const fs::path& dir,
                   std::vector<ManifestFile>& files) {
    AlignmentConfig ac = cfg.alignment;
    ac.base = cfg.model;
    ac.instances = cfg.instances;
    ac.target_position = cfg.target.t;
    const AlignmentReport rep = lambda_alignment_sweep(ac);
    std::ostringstream csv;
    write_alignment_csv(csv, rep);
    write_file(dir / "alignment.csv", csv.str(), files);
    write_file(dir / "alignment.json", to_json(rep).dump(2) + "\n", files);
    const std::size_t last = rep.lambda_grid.size() - 1;
    return rep.cosine_per_lambda[last] >= rep.cosine_per_lambda[0] &&
           rep.spearman_per_lambda[last] >= rep.spearman_per_lambda[0];
}

bool run_grad_check(const RunConfig& cfg, const fs::path& dir,
                    std::vector<ManifestFile>& files) {
    bool pass = true;
    std::ostringstream csv;
    csv << "seed,rel_err_fd_adv,rel_err_fd_hallu,cos_exact_vs_decomp_adv,"
           "cos_exact_vs_decomp_hallu\n";
    json reports = json::array();
    for (int inst = 0; inst < cfg.instances; ++inst) {
        ModelSpec spec = cfg.model;
        spec.seed = cfg.model.seed + static_cast<std::uint64_t>(inst);
        auto [P, H] = init_model(spec);
        const TargetSpec T = cfg.target.resolve(spec, H, P);
        GaussianStream g(spec.seed ^ 0x5DEECE66DULL);
        Perturbation D;
        D.delta_v = 0.1 * g.matrix(spec.l, spec.d_e, 1.0);
        D.delta_t = 0.1 * g.matrix(spec.n, spec.d_e, 1.0);
        const GradientReport R = gradient_report(H, D, P, T);
        pass = pass && R.rel_err_fd_adv < 1e-6 && R.rel_err_fd_hallu < 1e-6;
        csv << spec.seed << ',' << fmt17(R.rel_err_fd_adv) << ','
            << fmt17(R.rel_err_fd_hallu) << ',' << fmt17(R.cos_exact_vs_decomp_adv) << ','
            << fmt17(R.cos_exact_vs_decomp_hallu) << "\n";
        json jr = to_json(R);
        jr["seed"] = spec.seed;
        reports.push_back(std::move(jr));
    }
    write_file(dir / "grad_check.csv", csv.str(), files);
    write_file(dir / "grad_reports.json", reports.dump(2) + "\n", files);
    return pass;
}

bool run_gcg(const RunConfig& cfg, const fs::path& dir,
             std::vector<ManifestFile>& files) {
    auto [P, H] = init_model(cfg.model);
    const TargetSpec T = cfg.target.resolve(cfg.model, H, P);
    auto [state, trace] = gcg_suffix_opt(cfg.model, H, P, T, cfg.gcg);
    write_file(dir / "gcg_trace.csv", csv_of_trace(trace), files);
    json out{{"suffix_tokens", state.suffix_tokens},
             {"best_loss", state.best_loss},
             {"init_loss", trace.records.front().loss_adv}};
    write_file(dir / "gcg.json", out.dump(2) + "\n", files);
    return state.best_loss <= trace.records.front().loss_adv;
}

bool run_sweep_experiment(const SweepConfig& sc, const fs::path& dir,
                          std::vector<ManifestFile>& files, const std::string& stem,
                          bool taylor_mode) {
    const ConvergenceReport rep = prop1_sweep(sc);
    std::ostringstream csv;
    write_convergence_csv(csv, rep);
    write_file(dir / (stem + ".csv"), csv.str(), files);
    write_file(dir / (stem + ".json"), to_json(rep).dump(2) + "\n", files);
    if (taylor_mode)
        return std::abs(rep.taylor_order_hallu - 3.0) <= 0.3 &&
               std::abs(rep.taylor_order_adv - 3.0) <= 0.3;
    bool decreasing = true;
    for (std::size_t i = 1; i < rep.gaps.size(); ++i)
        decreasing = decreasing && rep.gaps[i] < rep.gaps[i - 1];
    return decreasing && rep.fitted_order > 0.0;
}

} // namespace

RunManifest run(const RunConfig& cfg) {
    RunManifest manifest;
    manifest.version = kArtifactVersion;
    manifest.config = config_to_json(cfg);
    manifest.started = now_iso8601();

    const fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw ConfigError("config: out_dir not writable: " + cfg.out_dir);

    bool pass = false;
    try {
        if (cfg.experiment == "convergence")
            pass = run_convergence(cfg, dir, manifest.files);
        else if (cfg.experiment == "alignment")
            pass = run_alignment(cfg, dir, manifest.files);
        else if (cfg.experiment == "grad-check")
            pass = run_grad_check(cfg, dir, manifest.files);
        else if (cfg.experiment == "gcg")
            pass = run_gcg(cfg, dir, manifest.files);
        else if (cfg.experiment == "taylor")
            pass = run_sweep_experiment(cfg.taylor, dir, manifest.files, "taylor", true);
        else if (cfg.experiment == "prop1")
            pass = run_sweep_experiment(cfg.prop1, dir, manifest.files, "prop1", false);
    } catch (const std::exception& e) {
        // Partial outputs stay on disk; the manifest records the failure.
        manifest.pass = false;
        manifest.finished = now_iso8601();
        json mj = manifest.to_json();
        mj["error"] = e.what();
        std::ofstream out(dir / "manifest.json", std::ios::binary);
        out << mj.dump(2) << "\n";
        return manifest;
    }

    manifest.pass = pass;
    manifest.finished = now_iso8601();
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    out << manifest.to_json().dump(2) << "\n";
    return manifest;
}

} // namespace attnlab
