#pragma once

#include "attnlab/serialize.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace attnlab {

/// Raised for malformed or invalid configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Target configuration with optional fields resolved per instance:
/// y_star empty and t_tok < 0 select the default coupling rule, and an empty
/// query_positions list selects the last m sequence positions.
struct TargetConfig {
    int t = 1;
    int t_tok = -1;
    std::vector<int> y_star;
    std::vector<int> query_positions;
    double lambda = 1.0;

    TargetSpec resolve(const ModelSpec& spec, const EmbeddingSet& H,
                       const ProjectionSet& P) const;
};

struct RunConfig {
    ModelSpec model;
    TargetConfig target;
    OptimConfig optim;
    GcgConfig gcg;
    AlignmentConfig alignment;      // base/instances filled in at run time
    SweepConfig prop1;
    SweepConfig taylor;
    std::string experiment;         // convergence|alignment|grad-check|gcg|taylor|prop1
    int instances = 20;
    std::string out_dir = "out";
};

struct ManifestFile {
    std::string name;
    std::string sha256;
};

struct RunManifest {
    json config;
    std::string version;
    std::string started;
    std::string finished;
    std::vector<ManifestFile> files;
    bool pass = false;

    json to_json() const;
};

/// Parses and validates a JSON config document. Strict: unknown keys are an
/// error listing them; missing required fields are an error naming the field.
/// Defaults: steps 80, step size 0.05, lambda grid {0.1,1,10,100}, seed 42,
/// suffix length 20.
RunConfig parse_config(const std::string& text);

/// Effective configuration (defaults applied) as JSON, echoed in manifests.
json config_to_json(const RunConfig& cfg);

/// Dispatches to the named experiment, writes data files plus manifest.json
/// into cfg.out_dir, and returns the manifest. pass reflects the experiment's
/// built-in assertions. Data files are byte-deterministic under a fixed
/// config+seed; only the manifest carries timestamps.
RunManifest run(const RunConfig& cfg);

extern const char* const kArtifactVersion;

} // namespace attnlab
