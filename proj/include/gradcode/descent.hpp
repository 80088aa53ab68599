#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gradcode/assignment.hpp"
#include "gradcode/metrics.hpp"
#include "gradcode/stragglers.hpp"

namespace gradcode {

/// Synthetic least-squares instance f(theta) = |X theta - Y|^2, split into
/// contiguous equal blocks. mu and L are the extreme eigenvalues of 2 X^T X.
struct Problem {
    Eigen::MatrixXd X;
    Eigen::VectorXd Y;
    Eigen::VectorXd theta_star;
    double mu = 0.0;
    double L = 0.0;
    double L_block = 0.0;  // max over blocks of the top eigenvalue of 2 X_b^T X_b
    double sigma2 = 0.0;   // sum over blocks of |grad f_b(theta*)|^2
    int n_blocks = 0;
    BlockPartition partition;

    Eigen::VectorXd block_gradient(int block, const Eigen::VectorXd& theta) const;
    Eigen::VectorXd full_gradient(const Eigen::VectorXd& theta) const;
    int dim() const { return static_cast<int>(X.cols()); }
};

Problem gen_least_squares(long long N, int k, double noise_sigma, std::uint64_t seed,
                          int n_blocks);

struct GdIteration {
    double err_sq = 0.0;       // |theta_t - theta*|^2
    double step = 0.0;
    int stragglers = 0;
    double alpha_err_sq = 0.0; // |alpha - 1|^2 that iteration
};

struct GdTrace {
    std::vector<GdIteration> iters;  // length iterations + 1, entry 0 is t = 0
    Eigen::VectorXd theta_final;
    bool diverged = false;
    std::vector<int> permutation;  // rho, block shuffle
    std::string config_echo;

    std::string to_csv() const;
};

using StepSchedule = std::function<double(int iter)>;
inline StepSchedule constant_step(double gamma) {
    return [gamma](int) { return gamma; };
}

using StragglerSampler = std::function<StragglerSet(int iter)>;
StragglerSampler iid_straggler_sampler(int m, double p, std::uint64_t seed);

GdTrace gcod_run(const Problem& problem, const AssignmentScheme& scheme, DecoderKind decoder,
                 double p, const StepSchedule& gamma, int iterations, std::uint64_t seed);

/// Same loop with an externally supplied straggler sequence (cluster replay,
/// adversarial fixed sets).
GdTrace gcod_run_with_sampler(const Problem& problem, const AssignmentScheme& scheme,
                              DecoderKind decoder, double p, const StepSchedule& gamma,
                              int iterations, std::uint64_t seed,
                              const StragglerSampler& sampler);

using BetaSampler = std::function<std::vector<double>(int iter)>;
GdTrace sgd_alg_run(const BetaSampler& beta, const Problem& problem, const StepSchedule& gamma,
                    int iterations, std::uint64_t seed);

enum class AdversaryMode { FixedSet, PerIterationGreedy };
struct AdversarialGdResult {
    GdTrace trace;
    double r_measured = 0.0;  // max over iterations of |alpha - 1|_2
};
AdversarialGdResult adversarial_gd_run(const Problem& problem, const AssignmentScheme& scheme,
                                       int s, AdversaryMode mode, const StepSchedule& gamma,
                                       int iterations);

/// Ignore-stragglers baseline: one machine per block, surviving block
/// gradients summed unweighted, run for multiplier-times as many iterations.
GdTrace uncoded_baseline(const Problem& problem, double p, const StepSchedule& gamma,
                         int iterations, int iterations_multiplier, std::uint64_t seed);

struct GridEntry {
    double gamma_scale = 0.0;   // constant step or schedule parameter
    double terminal_error = 0.0;
    bool diverged = false;
};
struct GridSearchResult {
    GridEntry best;
    std::vector<GridEntry> entries;
};
GridSearchResult grid_search_step(const std::vector<double>& grid,
                                  const std::function<double(double)>& terminal_error_of);

struct ConvergenceParams {
    double mu = 0.0, L = 0.0, L_block = 0.0, sigma2 = 0.0;
    double r = 0.0;    // (1/n) E|beta - 1|^2, or adversarial |alpha - 1|_2 bound
    double s = 0.0;    // covariance operator norm
    double eps = 0.0;
    double eps0 = 0.0; // |theta_0 - theta*|^2
    int n_blocks = 0;
};

struct RandomPrediction {
    double gamma = 0.0;
    double k = 0.0;
};
RandomPrediction predict_random(const ConvergenceParams& params);

struct AdversarialPrediction {
    double gamma = 0.0;
    double k_max = 0.0;
    double floor = 0.0;  // (1 + eps) r sigma / (a mu)
    double a = 0.0;
};
AdversarialPrediction predict_adversarial(const ConvergenceParams& params, double eps);

}  // namespace gradcode
