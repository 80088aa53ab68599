#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "gradcode/assignment.hpp"

namespace gradcode {

/// One scheme/decoder combination inside a sweep.
struct ArmConfig {
    std::string name;
    std::string scheme = "graph";     // graph | frc | adjacency
    std::string decoder = "optimal";  // optimal | oracle | fixed
    std::string graph = "regular";    // regular | circulant | complete | cycle | file
    int n = 0;
    int d = 0;
    int m = 0;                        // frc only
    std::vector<int> offsets;         // circulant only
    std::string file;                 // graph = file
    std::uint64_t graph_seed = 1;     // graph = regular
};

struct ExperimentConfig {
    std::string kind;  // error_sweep | covariance_sweep | adversarial_audit |
                       // gd_compare | debias_demo | predict
    std::vector<double> p_grid;
    long long trials = 0;
    std::uint64_t seed = 0;
    std::vector<ArmConfig> arms;

    // gd_compare / predict
    long long N = 0;
    int k = 0;
    double noise_sigma = 0.0;
    int iterations = 0;
    int grid_lo = 0;
    int grid_hi = 20;
    double grid_base = 1.3;
    double grid_scale = 1e-6;
    int seeds = 1;
    int multiplier = 0;  // uncoded iteration multiplier; 0 means use d

    // adversarial_audit / predict
    int s_max = 0;

    // debias_demo
    double eps = 0.1;

    // predict
    double target_eps = 1e-2;
    double eps0 = 0.0;  // 0 means |theta*|^2 of the generated problem

    nlohmann::json echo;  // parsed config, replayed verbatim by the sidecar
};

/// Strict parse: unknown keys are rejected with their field path.
ExperimentConfig experiment_config_from_toml(const nlohmann::json& toml);
ExperimentConfig load_experiment_config(const std::string& path);

AssignmentScheme build_arm_scheme(const ArmConfig& arm);

struct ExperimentOutput {
    std::string csv;
    nlohmann::json sidecar;
};

ExperimentOutput run_experiment(const ExperimentConfig& config, int threads = 0);

/// Writes the CSV at csv_path and the sidecar at csv_path + ".json".
void write_experiment_output(const ExperimentOutput& out, const std::string& csv_path);

/// Re-runs the experiment recorded in a sidecar; output is byte-identical.
ExperimentOutput replay_from_sidecar(const std::string& sidecar_path, int threads = 0);

}  // namespace gradcode
