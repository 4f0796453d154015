#include "attnlab/runner.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

int main(int argc, char** argv) {
    CLI::App app{"attnlab: a toy attention-model laboratory for embedding-perturbation "
                 "objectives (attention concentration vs. target likelihood)"};

    std::string config_path, out_dir, experiment;
    std::uint64_t seed = 0;
    bool seed_set = false;

    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--out", out_dir, "output directory (overrides config)");
    app.add_option("--experiment", experiment,
                   "experiment name: convergence|alignment|grad-check|gcg|taylor|prop1");
    app.add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t v) { seed = v; seed_set = true; },
        "model seed (overrides config)");

    CLI11_PARSE(app, argc, argv);

    try {
        std::string text = "{}";
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) {
                std::cerr << "error: cannot read config file " << config_path << "\n";
                return 2;
            }
            std::ostringstream ss;
            ss << in.rdbuf();
            text = ss.str();
        }
        // Flags override file values; inject before parsing so validation sees
        // the effective document.
        attnlab::json doc = attnlab::json::parse(text);
        if (!experiment.empty()) doc["experiment"] = experiment;
        if (!out_dir.empty()) doc["out_dir"] = out_dir;
        if (seed_set) {
            if (!doc.contains("model")) doc["model"] = attnlab::json::object();
            doc["model"]["seed"] = seed;
        }

        const attnlab::RunConfig cfg = attnlab::parse_config(doc.dump());
        const attnlab::RunManifest manifest = attnlab::run(cfg);
        for (const attnlab::ManifestFile& f : manifest.files)
            std::cout << "wrote " << cfg.out_dir << "/" << f.name << "\n";
        std::cout << "experiment " << cfg.experiment << ": "
                  << (manifest.pass ? "PASS" : "FAIL") << "\n";
        return manifest.pass ? 0 : 1;
    } catch (const attnlab::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const attnlab::json::exception& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
