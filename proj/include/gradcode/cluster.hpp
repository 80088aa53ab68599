#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gradcode/assignment.hpp"
#include "gradcode/descent.hpp"

namespace gradcode {

struct DelayModel {
    enum class Kind { None, Fixed, Lognormal, Pin };
    Kind kind = Kind::None;
    double ms = 0.0;           // fixed / pin delay
    double log_mu = 0.0;       // lognormal parameters (of the millisecond delay)
    double log_sigma = 0.0;
    std::vector<int> pinned;   // pin: workers that receive the delay
};

struct ClusterConfig {
    std::string host = "127.0.0.1";
    int port = 0;
    int m = 0;
    std::string scheme_file;
    // problem generation parameters (workers regenerate the same data)
    long long N = 0;
    int k = 0;
    double noise_sigma = 0.0;
    std::uint64_t problem_seed = 0;
    int n_blocks = 0;

    double p = 0.0;  // wait rule: first ceil(m (1 - p)) responses
    std::string decoder = "optimal";  // optimal | fixed
    DelayModel delay;
    int iterations = 0;
    double gamma = 0.0;
    std::uint64_t seed = 0;  // permutation rho

    int handshake_timeout_ms = 10000;
    int iteration_deadline_ms = 60000;
};

ClusterConfig cluster_config_from_toml(const nlohmann::json& toml);
ClusterConfig load_cluster_config(const std::string& path);

struct PsResult {
    Eigen::VectorXd theta;
    GdTrace trace;
    int actual_port = 0;  // useful when config port is 0 (ephemeral)
};

/// Parameter server: broadcasts iterates, waits for the first
/// ceil(m (1 - p)) gradients per iteration, treats the rest as stragglers,
/// decodes and steps. If on_listening is set it receives the bound port
/// before the handshake phase begins.
PsResult serve_ps(const ClusterConfig& config,
                  const std::function<void(int port)>& on_listening = {});

/// Worker loop: receive theta, apply the configured delay, send the
/// column-aggregated gradient. Returns the process exit status.
int run_worker(const ClusterConfig& config, int worker_id, int port_override = 0);

/// Reconstructs the backing graph of a graph-kind scheme from its columns.
Graph graph_from_scheme(const AssignmentScheme& scheme);

}  // namespace gradcode
