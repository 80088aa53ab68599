#include "gradcode/descent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "gradcode/decoding.hpp"
#include "gradcode/util.hpp"

namespace gradcode {

Eigen::VectorXd Problem::block_gradient(int block, const Eigen::VectorXd& theta) const {
    auto [begin, end] = partition.ranges[block];
    auto rows = X.middleRows(begin, end - begin);
    return 2.0 * (rows.transpose() * (rows * theta - Y.segment(begin, end - begin)));
}

Eigen::VectorXd Problem::full_gradient(const Eigen::VectorXd& theta) const {
    return 2.0 * (X.transpose() * (X * theta - Y));
}

Problem gen_least_squares(long long N, int k, double noise_sigma, std::uint64_t seed,
                          int n_blocks) {
    if (k < 1) throw std::runtime_error("gen_least_squares: k must be >= 1");
    Problem prob;
    prob.partition = partition_blocks(N, n_blocks);
    prob.n_blocks = n_blocks;

    auto rng = make_rng(seed, 0x6D);
    std::normal_distribution<double> gauss(0.0, 1.0);
    prob.X.resize(N, k);
    const double row_scale = 1.0 / std::sqrt(static_cast<double>(k));
    for (long long i = 0; i < N; ++i)
        for (int j = 0; j < k; ++j) prob.X(i, j) = gauss(rng) * row_scale;
    Eigen::VectorXd theta_true(k);
    for (int j = 0; j < k; ++j) theta_true[j] = gauss(rng);
    Eigen::VectorXd noise(N);
    for (long long i = 0; i < N; ++i) noise[i] = gauss(rng) * noise_sigma;
    prob.Y = prob.X * theta_true + noise;

    Eigen::MatrixXd gram = prob.X.transpose() * prob.X;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("gen_least_squares: eigensolver failed");
    double min_ev = solver.eigenvalues()[0];
    double max_ev = solver.eigenvalues()[k - 1];
    if (min_ev <= 1e-12 * std::max(1.0, max_ev))
        throw std::runtime_error("gen_least_squares: X^T X is rank-deficient; retry with a new seed");
    prob.mu = 2.0 * min_ev;
    prob.L = 2.0 * max_ev;
    prob.theta_star = gram.ldlt().solve(prob.X.transpose() * prob.Y);

    prob.L_block = 0.0;
    prob.sigma2 = 0.0;
    for (int b = 0; b < n_blocks; ++b) {
        auto [begin, end] = prob.partition.ranges[b];
        auto rows = prob.X.middleRows(begin, end - begin);
        Eigen::MatrixXd block_gram = rows.transpose() * rows;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> bs(block_gram);
        prob.L_block = std::max(prob.L_block, 2.0 * bs.eigenvalues()[k - 1]);
        prob.sigma2 += prob.block_gradient(b, prob.theta_star).squaredNorm();
    }
    return prob;
}

std::string GdTrace::to_csv() const {
    std::ostringstream out;
    out << "iter,err_sq,step,stragglers,alpha_err\n";
    for (std::size_t t = 0; t < iters.size(); ++t)
        out << t << ',' << format_double(iters[t].err_sq) << ','
            << format_double(iters[t].step) << ',' << iters[t].stragglers << ','
            << format_double(iters[t].alpha_err_sq) << '\n';
    return out.str();
}

StragglerSampler iid_straggler_sampler(int m, double p, std::uint64_t seed) {
    return [m, p, seed](int iter) {
        return sample_iid(m, p, seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(iter + 1));
    };
}

namespace {

std::vector<int> random_permutation(int n, std::uint64_t seed) {
    auto rng = make_rng(seed, 0x4E0);
    std::vector<int> rho(n);
    std::iota(rho.begin(), rho.end(), 0);
    for (int i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<int> dist(0, i);
        std::swap(rho[i], rho[dist(rng)]);
    }
    return rho;
}

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

GdTrace gcod_run_with_sampler(const Problem& problem, const AssignmentScheme& scheme,
                              DecoderKind decoder, double p, const StepSchedule& gamma,
                              int iterations, std::uint64_t seed,
                              const StragglerSampler& sampler) {
    if (scheme.n_blocks != problem.n_blocks)
        throw std::runtime_error("gcod_run: scheme blocks != problem blocks");
    const int n = scheme.n_blocks;
    const int k = problem.dim();

    GdTrace trace;
    trace.permutation = random_permutation(n, seed);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(k);
    trace.iters.push_back({(theta - problem.theta_star).squaredNorm(), 0.0, 0, 0.0});

    std::vector<Eigen::VectorXd> block_grads(n);
    for (int t = 1; t <= iterations; ++t) {
        StragglerSet s = sampler(t);
        std::vector<double> w;
        std::vector<double> alpha;
        if (decoder == DecoderKind::OptimalGraph) {
            if (!scheme.graph || scheme.kind != "graph")
                throw std::runtime_error("gcod_run: optimal_graph decoder needs a graph scheme");
            auto dec = decode_optimal_graph(*scheme.graph, s);
            w = std::move(dec.w);
            alpha = std::move(dec.alpha);
        } else if (decoder == DecoderKind::Fixed) {
            auto dec = decode_fixed(scheme, s, p);
            w = std::move(dec.w);
            alpha = std::move(dec.alpha);
        } else {
            // Oracle has no canonical w; recover one per machine via least
            // squares is overkill here, so refuse.
            throw std::runtime_error("gcod_run: oracle decoder is not a machine-weight decoder");
        }

        // Worker contract: per-machine aggregates g_j, summed in machine order.
        for (int i = 0; i < n; ++i)
            block_grads[i] = problem.block_gradient(trace.permutation[i], theta);
        Eigen::VectorXd update = Eigen::VectorXd::Zero(k);
        for (int j = 0; j < scheme.m; ++j) {
            if (w[j] == 0.0) continue;
            Eigen::VectorXd gj = Eigen::VectorXd::Zero(k);
            for (auto [i, val] : scheme.columns[j]) gj += val * block_grads[i];
            update += w[j] * gj;
        }
        double step = gamma(t);
        theta -= step * update;
        GdIteration it;
        it.step = step;
        it.stragglers = static_cast<int>(s.members.size());
        it.alpha_err_sq = decoding_error_sq(alpha);
        if (!finite(theta)) {
            trace.diverged = true;
            it.err_sq = std::numeric_limits<double>::infinity();
            trace.iters.push_back(it);
            break;
        }
        it.err_sq = (theta - problem.theta_star).squaredNorm();
        trace.iters.push_back(it);
    }
    trace.theta_final = theta;
    return trace;
}

GdTrace gcod_run(const Problem& problem, const AssignmentScheme& scheme, DecoderKind decoder,
                 double p, const StepSchedule& gamma, int iterations, std::uint64_t seed) {
    return gcod_run_with_sampler(problem, scheme, decoder, p, gamma, iterations, seed,
                                 iid_straggler_sampler(scheme.m, p, seed));
}

GdTrace sgd_alg_run(const BetaSampler& beta, const Problem& problem, const StepSchedule& gamma,
                    int iterations, std::uint64_t seed) {
    const int n = problem.n_blocks;
    const int k = problem.dim();
    GdTrace trace;
    trace.permutation = random_permutation(n, seed);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(k);
    trace.iters.push_back({(theta - problem.theta_star).squaredNorm(), 0.0, 0, 0.0});
    for (int t = 1; t <= iterations; ++t) {
        std::vector<double> b = beta(t);
        if (static_cast<int>(b.size()) != n)
            throw std::runtime_error("sgd_alg_run: beta sampler length mismatch");
        Eigen::VectorXd update = Eigen::VectorXd::Zero(k);
        for (int i = 0; i < n; ++i) {
            if (b[i] == 0.0) continue;
            update += b[i] * problem.block_gradient(trace.permutation[i], theta);
        }
        double step = gamma(t);
        theta -= step * update;
        GdIteration it;
        it.step = step;
        it.alpha_err_sq = decoding_error_sq(b);
        if (!finite(theta)) {
            trace.diverged = true;
            it.err_sq = std::numeric_limits<double>::infinity();
            trace.iters.push_back(it);
            break;
        }
        it.err_sq = (theta - problem.theta_star).squaredNorm();
        trace.iters.push_back(it);
    }
    trace.theta_final = theta;
    return trace;
}

AdversarialGdResult adversarial_gd_run(const Problem& problem, const AssignmentScheme& scheme,
                                       int s, AdversaryMode mode, const StepSchedule& gamma,
                                       int iterations) {
    if (!scheme.graph || scheme.kind != "graph")
        throw std::runtime_error("adversarial_gd_run: graph scheme required");
    const Graph& g = *scheme.graph;
    StragglerSet fixed = adversarial_greedy(g, s);
    AdversarialGdResult result;
    double r_measured = 0.0;
    auto sampler = [&](int iter) {
        if (mode == AdversaryMode::FixedSet || iter == 1) return fixed;
        return adversarial_greedy(g, s);
    };
    auto wrapped = [&](int iter) {
        StragglerSet set = sampler(iter);
        auto alpha = decode_optimal_graph(g, set).alpha;
        r_measured = std::max(r_measured, std::sqrt(decoding_error_sq(alpha)));
        return set;
    };
    result.trace = gcod_run_with_sampler(problem, scheme, DecoderKind::OptimalGraph, 0.0,
                                         gamma, iterations, /*seed=*/1, wrapped);
    result.r_measured = r_measured;
    return result;
}

GdTrace uncoded_baseline(const Problem& problem, double p, const StepSchedule& gamma,
                         int iterations, int iterations_multiplier, std::uint64_t seed) {
    if (iterations_multiplier < 1)
        throw std::runtime_error("uncoded_baseline: multiplier must be >= 1");
    const int n = problem.n_blocks;
    auto sampler = iid_straggler_sampler(n, p, seed);
    auto beta = [&](int iter) {
        StragglerSet s = sampler(iter);
        std::vector<double> b(n, 1.0);
        for (int j : s.members) b[j] = 0.0;
        return b;
    };
    return sgd_alg_run(beta, problem, gamma, iterations * iterations_multiplier, seed);
}

GridSearchResult grid_search_step(const std::vector<double>& grid,
                                  const std::function<double(double)>& terminal_error_of) {
    if (grid.empty()) throw std::runtime_error("grid_search_step: empty grid");
    GridSearchResult result;
    bool any_finite = false;
    for (double c : grid) {
        GridEntry entry;
        entry.gamma_scale = c;
        entry.terminal_error = terminal_error_of(c);
        entry.diverged = !std::isfinite(entry.terminal_error);
        result.entries.push_back(entry);
        if (!entry.diverged) any_finite = true;
    }
    if (!any_finite) throw std::runtime_error("grid_search_step: all candidates diverged");
    result.best = result.entries.front();
    for (const auto& e : result.entries) {
        if (e.diverged) continue;
        if (result.best.diverged || e.terminal_error < result.best.terminal_error ||
            (e.terminal_error == result.best.terminal_error &&
             e.gamma_scale < result.best.gamma_scale))
            result.best = e;
    }
    return result;
}

RandomPrediction predict_random(const ConvergenceParams& params) {
    if (!(params.mu > 0.0)) throw std::runtime_error("predict_random: mu must be positive");
    if (!(params.eps > 0.0)) throw std::runtime_error("predict_random: eps must be positive");
    const double n = params.n_blocks;
    const double variance_term =
        params.r * (1.0 + 1.0 / (n - 1.0)) * params.sigma2;
    RandomPrediction out;
    out.gamma = params.mu * params.eps /
                (2.0 * params.mu * params.eps * (params.s * params.L_block + params.L) +
                 2.0 * variance_term);
    out.k = 2.0 * std::log(2.0 * params.eps0 / params.eps) *
            (params.s * params.L_block / params.mu + params.L / params.mu +
             variance_term / (params.mu * params.mu * params.eps));
    return out;
}

AdversarialPrediction predict_adversarial(const ConvergenceParams& params, double eps) {
    if (!(eps > 0.0 && eps <= 1.0))
        throw std::runtime_error("predict_adversarial: need eps in (0, 1]");
    AdversarialPrediction out;
    out.a = 1.0 - params.r * std::sqrt(params.L_block) / std::sqrt(params.mu);
    if (!(out.a > 0.0))
        throw std::runtime_error("predict_adversarial: a <= 0, noise-floor guarantee unavailable");
    const double r = params.r;
    const double denom =
        4.0 * (params.L * params.L + 2.0 * r * params.L * params.L_block +
               4.0 * r * r * params.L_block * params.L_block);
    out.gamma = eps * out.a * params.mu / denom;
    double sigma = std::sqrt(params.sigma2);
    out.floor = (1.0 + eps) * r * sigma / (out.a * params.mu);
    double log_arg = 2.0 * out.a * out.a * params.mu * params.mu * params.eps0 /
                     ((1.0 + eps) * (1.0 + eps) * r * r * params.sigma2);
    double log_term = log_arg > 1.0 ? std::log(log_arg) : 0.0;
    out.k_max = 2.0 * (1.0 + eps) * log_term / (3.0 * out.gamma * out.a * params.mu * eps);
    return out;
}

}  // namespace gradcode
