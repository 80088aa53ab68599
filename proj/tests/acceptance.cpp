// Acceptance gate: one pass/fail line per criterion, nonzero exit on failure.
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "gradcode/cluster.hpp"
#include "gradcode/decoding.hpp"
#include "gradcode/descent.hpp"
#include "gradcode/graph.hpp"
#include "gradcode/metrics.hpp"
#include "gradcode/stragglers.hpp"
#include "gradcode/util.hpp"

using namespace gradcode;

namespace {

int g_failures = 0;

void report(int idx, const char* name, bool ok, const std::string& detail,
            double seconds) {
    std::printf("%s  %2d. %-28s %s  (%.1fs)\n", ok ? "PASS" : "FAIL", idx, name,
                detail.c_str(), seconds);
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::vector<int> mask_members(int m, unsigned mask) {
    std::vector<int> out;
    for (int j = 0; j < m; ++j)
        if (mask & (1u << j)) out.push_back(j);
    return out;
}

std::string fmt(const char* pattern, double a, double b = 0, double c = 0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), pattern, a, b, c);
    return buf;
}

// ---- 1. oracle equivalence ------------------------------------------------

void criterion_oracle_equivalence() {
    Timer timer;
    std::vector<Graph> graphs;
    graphs.push_back(gen_named("complete", 3));
    for (int n = 4; n <= 7; ++n) graphs.push_back(gen_named("cycle", n));
    graphs.push_back(gen_named("complete", 4));
    graphs.push_back(gen_named("complete", 5));
    for (int i = 0; i < 20; ++i) graphs.push_back(gen_random_regular(8, 3, 500 + i));

    double worst = 0.0;
    for (const Graph& g : graphs) {
        AssignmentScheme a = graph_scheme(g);
        int m = g.m();
        for (unsigned mask = 0; mask < (1u << m); ++mask) {
            StragglerSet s = make_straggler_set(m, mask_members(m, mask), "enum");
            auto fast = decode_optimal_graph(g, s);
            auto oracle = decode_oracle(a, s);
            for (int i = 0; i < g.n; ++i)
                worst = std::max(worst, std::abs(fast.alpha[i] - oracle[i]));
        }
    }
    report(1, "oracle equivalence", worst <= 1e-9, fmt("max dev %.2e", worst),
           timer.elapsed());
}

// ---- 2. edge-sum / stationarity --------------------------------------------

void criterion_edge_sum() {
    Timer timer;
    double worst_sum = 0.0, worst_stat = 0.0;
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> unif(0.05, 0.6);
    for (int t = 0; t < 10000; ++t) {
        int n = 8 + 2 * (t % 5);
        int d = 3 + (t % 2);
        Graph g = [&] {
            for (std::uint64_t bump = 0;; ++bump) {
                try {
                    return gen_random_regular(n, d, 10000 + t + 1000000 * bump);
                } catch (const std::runtime_error&) {
                    if (bump >= 4) throw;
                }
            }
        }();
        StragglerSet s = sample_iid(g.m(), unif(rng), 20000 + t);
        auto dec = decode_optimal_graph(g, s);
        for (int j = 0; j < g.m(); ++j) {
            if (s.contains(j)) continue;
            auto [u, v] = g.edges[j];
            worst_sum = std::max(worst_sum, std::abs(dec.alpha[u] + dec.alpha[v] - 2.0));
            worst_stat = std::max(
                worst_stat, std::abs((1.0 - dec.alpha[u]) + (1.0 - dec.alpha[v])));
        }
    }
    bool ok = worst_sum <= 1e-12 && worst_stat <= 1e-9;
    report(2, "edge-sum / stationarity", ok,
           fmt("edge-sum %.2e, stationarity %.2e", worst_sum, worst_stat), timer.elapsed());
}

// ---- 3. frc closed form -----------------------------------------------------

void criterion_frc_closed_form() {
    Timer timer;
    AssignmentScheme frc = frc_scheme(16, 24, 3);
    const double p = 0.2, p3 = p * p * p;
    ErrorEstimate est = mc_error(frc, DecoderKind::Oracle, p, 100000, 42);
    double raw_dev = std::abs(est.raw_mean - p3);
    double norm_dev = std::abs(est.mean - p3 / (1 - p3));
    bool ok = raw_dev <= 3 * est.raw_stderr && norm_dev <= 3 * est.stderr_;
    report(3, "frc closed form", ok,
           fmt("raw %.4e vs 8.000e-03, norm %.4e vs 8.065e-03", est.raw_mean, est.mean),
           timer.elapsed());
}

// ---- 4 & 5. near-optimality and fixed-decoding lower bound ------------------

void criterion_near_optimality(const AssignmentScheme& scheme, int d) {
    Timer timer;
    bool ok = true;
    std::string detail;
    for (double p : {0.05, 0.10, 0.15, 0.20}) {
        ErrorEstimate est = mc_error(scheme, DecoderKind::OptimalGraph, p, 50000, 4242);
        double lb = bounds(d, p, 1.0).lb_universal;
        bool here = est.mean >= lb - 3 * est.stderr_ && est.mean <= 3 * lb;
        ok = ok && here;
        detail += fmt("p=%.2f:%.1fx ", p, est.mean / lb);
    }
    report(4, "near-optimal graph scheme", ok, detail + "(vs lb_universal)",
           timer.elapsed());
}

void criterion_fixed_lower_bound(const AssignmentScheme& scheme, int d) {
    Timer timer;
    bool ok = true;
    std::string detail;
    for (double p : {0.05, 0.10, 0.15, 0.20}) {
        ErrorEstimate est = mc_error(scheme, DecoderKind::Fixed, p, 50000, 77);
        double lb = bounds(d, p, 1.0).lb_fixed;
        ok = ok && est.mean >= lb - 3 * est.stderr_;
        detail += fmt("p=%.2f:%.2fx ", p, est.mean / lb);
    }
    report(5, "fixed-decoding lower bound", ok, detail + "(vs lb_fixed)", timer.elapsed());
}

// ---- 6. adversarial audit ---------------------------------------------------

void criterion_adversarial_audit(const Graph& g, const AssignmentScheme& scheme) {
    Timer timer;
    auto error_of = [&](const StragglerSet& s) {
        return decoding_error_sq(decode_optimal_graph(g, s).alpha);
    };
    AdversarialResult res = adversarial_exhaustive(scheme, 4, error_of);
    double per_block = res.worst_error / g.n;
    double p = 4.0 / 24.0;
    double upper = bounds(3, p, spectral_profile(g).gap).adv_upper;
    double floor = 1.0 / 16.0;
    bool ok = per_block <= upper && per_block >= floor;
    report(6, "adversarial audit", ok,
           fmt("worst/n %.4f in [%.4f, %.4f]", per_block, floor, upper), timer.elapsed());
}

// ---- 7. gd improvement -------------------------------------------------------

void criterion_gd_improvement(const AssignmentScheme& scheme) {
    Timer timer;
    Problem pb = gen_least_squares(2400, 400, 10.0, 1, 16);
    const double p = 0.2;
    const int iterations = 50, n_seeds = 8, mult = 3;
    std::vector<double> grid;
    for (int c = 0; c <= 45; ++c) grid.push_back(1e-6 * std::pow(1.3, c));

    auto median_of = [&](const std::function<double(std::uint64_t)>& run) {
        std::vector<double> errs;
        for (int r = 1; r <= n_seeds; ++r) errs.push_back(run(r));
        std::sort(errs.begin(), errs.end());
        return 0.5 * (errs[3] + errs[4]);
    };

    auto tuned = [&](DecoderKind decoder) {
        GridSearchResult gs = grid_search_step(grid, [&](double gamma) {
            GdTrace t = gcod_run(pb, scheme, decoder, p, constant_step(gamma), iterations, 0);
            return t.diverged ? std::numeric_limits<double>::infinity()
                              : t.iters.back().err_sq;
        });
        return median_of([&](std::uint64_t r) {
            return gcod_run(pb, scheme, decoder, p, constant_step(gs.best.gamma_scale),
                            iterations, r)
                .iters.back()
                .err_sq;
        });
    };

    double opt = tuned(DecoderKind::OptimalGraph);
    double fixed = tuned(DecoderKind::Fixed);

    GridSearchResult gsu = grid_search_step(grid, [&](double gamma) {
        GdTrace t = uncoded_baseline(pb, p, constant_step(gamma), iterations, mult, 0);
        return t.diverged ? std::numeric_limits<double>::infinity()
                          : t.iters.back().err_sq;
    });
    double uncoded = median_of([&](std::uint64_t r) {
        return uncoded_baseline(pb, p, constant_step(gsu.best.gamma_scale), iterations,
                                mult, r)
            .iters.back()
            .err_sq;
    });

    bool ok = opt <= 0.5 * fixed && opt <= 0.5 * uncoded;
    // the full-scale factor 1/(3 p^2) ~ 8.3x is reported, not gated
    report(7, "gd improvement", ok,
           fmt("opt/fixed %.3f, opt/uncoded %.3f (1/(3p^2)=8.3)", opt / fixed,
               opt / uncoded),
           timer.elapsed());
}

// ---- 8. convergence predictor -------------------------------------------------

void criterion_convergence_predictor() {
    Timer timer;
    Graph g = gen_circulant(16, {1, 2});  // vertex transitive, d = 4
    AssignmentScheme scheme = graph_scheme(g);
    Problem pb = gen_least_squares(400, 20, 1.0, 6, 16);
    const double p = 0.1;

    ErrorEstimate err = mc_error(scheme, DecoderKind::OptimalGraph, p, 40000, 8);
    CovarianceEstimate cov = covariance_opnorm(scheme, DecoderKind::OptimalGraph, p, 40000, 8);

    ConvergenceParams params;
    params.mu = pb.mu;
    params.L = pb.L;
    params.L_block = pb.L_block;
    params.sigma2 = pb.sigma2;
    params.r = err.mean;
    params.s = cov.value;
    params.eps0 = pb.theta_star.squaredNorm();
    params.n_blocks = 16;

    bool ok = true;
    std::string detail;
    for (double scale : {1e-2, 1e-3}) {
        params.eps = scale * params.eps0;
        RandomPrediction pred = predict_random(params);
        int k = static_cast<int>(std::ceil(pred.k));
        double mean = 0.0;
        const int n_seeds = 20;
        for (int r = 0; r < n_seeds; ++r) {
            GdTrace t = gcod_run(pb, scheme, DecoderKind::OptimalGraph, p,
                                 constant_step(pred.gamma), k, 300 + r);
            mean += t.iters.back().err_sq;
        }
        mean /= n_seeds;
        ok = ok && mean <= params.eps;
        detail += fmt("eps=%.0e:%.2fx ", params.eps, mean / params.eps);
    }
    report(8, "convergence predictor", ok, detail + "(mean err / eps)", timer.elapsed());
}

// ---- 9. adversarial floor ------------------------------------------------------

void criterion_adversarial_floor() {
    Timer timer;
    // odd cycle: a single straggling edge leaves an odd path, |alpha - 1|_2^2 = 1/15
    Graph g = gen_named("cycle", 15);
    AssignmentScheme scheme = graph_scheme(g);
    Problem pb = gen_least_squares(600, 15, 1.0, 12, 15);
    const int s = 1;
    const double eps = 0.5;

    StragglerSet adv_set = adversarial_greedy(g, s);
    double r = std::sqrt(decoding_error_sq(decode_optimal_graph(g, adv_set).alpha));

    ConvergenceParams params;
    params.mu = pb.mu;
    params.L = pb.L;
    params.L_block = pb.L_block;
    params.sigma2 = pb.sigma2;
    params.r = r;
    params.eps0 = pb.theta_star.squaredNorm();
    params.n_blocks = 15;
    AdversarialPrediction pred = predict_adversarial(params, eps);

    int k = static_cast<int>(std::ceil(pred.k_max));
    auto result = adversarial_gd_run(pb, scheme, s, AdversaryMode::FixedSet,
                                     constant_step(pred.gamma), k);
    double final_dist = std::sqrt(result.trace.iters.back().err_sq);
    bool reached = false;
    for (const auto& it : result.trace.iters)
        if (std::sqrt(it.err_sq) <= pred.floor) reached = true;
    bool ok = pred.a > 0 && reached;
    report(9, "adversarial floor", ok,
           fmt("a=%.3f floor=%.3f final=%.3f", pred.a, pred.floor, final_dist),
           timer.elapsed());
}

// ---- 10. debias ------------------------------------------------------------------

void criterion_debias() {
    Timer timer;
    Graph g = gen_random_regular(16, 3, 7);  // not vertex transitive: biased E[alpha]
    AssignmentScheme scheme = graph_scheme(g);
    const double p = 0.25;
    const int n = scheme.n_blocks, m = scheme.m;
    const long long trials = 200000;

    // pass 1: per-coordinate mean and the measured eps
    MeanAlphaEstimate mean = mean_alpha(scheme, DecoderKind::OptimalGraph, p, trials, 91);
    ErrorEstimate err = mc_error(scheme, DecoderKind::OptimalGraph, p, trials, 91);
    double eps = err.raw_mean + 3 * err.raw_stderr;  // conservative measured bound
    AssignmentScheme hat = debias(scheme, mean.mean, eps);

    // pass 2 (fresh seeds): decode with the inherited strategy, alpha_hat = A_hat w
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n), sumsq = Eigen::VectorXd::Zero(n);
    double err_sum = 0.0, err_sumsq = 0.0;
    for (long long t = 0; t < trials; ++t) {
        StragglerSet st = sample_iid(m, p, 7000000 + t);
        auto dec = decode_optimal_graph(g, st);
        Eigen::VectorXd alpha_hat = Eigen::VectorXd::Zero(n);
        for (int j = 0; j < m; ++j) {
            if (dec.w[j] == 0.0) continue;
            for (auto [i, val] : hat.columns[j]) alpha_hat[i] += val * dec.w[j];
        }
        Eigen::VectorXd dev = alpha_hat - Eigen::VectorXd::Ones(n);
        sum += alpha_hat;
        sumsq += alpha_hat.cwiseProduct(alpha_hat);
        double e = dev.squaredNorm() / n;
        err_sum += e;
        err_sumsq += e * e;
    }
    double worst_bias = 0.0, worst_se = 0.0;
    bool bias_ok = true;
    for (int i = 0; i < n; ++i) {
        double mu = sum[i] / trials;
        double var = sumsq[i] / trials - mu * mu;
        double se = std::sqrt(std::max(var, 0.0) / trials);
        if (std::abs(mu - 1.0) > 3 * se) bias_ok = false;
        if (std::abs(mu - 1.0) > worst_bias) {
            worst_bias = std::abs(mu - 1.0);
            worst_se = se;
        }
    }
    double mean_err = err_sum / trials;
    double se_err = std::sqrt(std::max(err_sumsq / trials - mean_err * mean_err, 0.0) /
                              trials);
    double delta = 1.0 - std::sqrt(2.0 * eps);
    double bound = 2.0 * eps / (delta * delta);
    bool ok = eps <= 0.1 && bias_ok && mean_err <= bound + 3 * se_err &&
              hat.load() <= 2 * scheme.load();
    report(10, "debias", ok,
           fmt("eps %.3e, worst bias %.1e (se %.1e)", eps, worst_bias, worst_se),
           timer.elapsed());
}

// ---- 11. cluster / simulation equivalence ------------------------------------------

void criterion_cluster_equivalence() {
    Timer timer;

    // wire round trip on 10^3 random messages
    std::mt19937_64 rng(55);
    std::normal_distribution<double> gauss;
    std::uniform_int_distribution<int> len(1, 64);
    bool wire_ok = true;
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> v(len(rng));
        for (double& x : v) x = gauss(rng) * std::pow(10.0, (t % 25) - 12);
        nlohmann::json msg{{"type", "grad"}, {"iter", t}, {"worker_id", t % 7},
                           {"g_b64", doubles_to_b64(v)}};
        auto parsed = nlohmann::json::parse(msg.dump());
        std::vector<double> back = b64_to_doubles(parsed.at("g_b64").get<std::string>());
        if (back.size() != v.size() ||
            std::memcmp(back.data(), v.data(), v.size() * sizeof(double)) != 0)
            wire_ok = false;
    }

    // 3-worker localhost cluster with a pinned slow worker vs. the simulation
    Graph g = gen_named("complete", 3);
    AssignmentScheme scheme = graph_scheme(g);
    std::string scheme_path = "/tmp/gradcode_acceptance_scheme.txt";
    save_scheme(scheme, scheme_path);

    ClusterConfig config;
    config.port = 0;
    config.m = 3;
    config.scheme_file = scheme_path;
    config.N = 60;
    config.k = 4;
    config.noise_sigma = 1.0;
    config.problem_seed = 11;
    config.n_blocks = 3;
    config.p = 1.0 / 3.0;
    config.decoder = "optimal";
    config.delay.kind = DelayModel::Kind::Pin;
    config.delay.ms = 60.0;
    config.delay.pinned = {1};
    config.iterations = 20;
    config.gamma = 0.02;
    config.seed = 33;

    PsResult result;
    std::vector<std::thread> workers;
    std::thread ps([&] {
        result = serve_ps(config, [&](int port) {
            for (int id = 0; id < 3; ++id)
                workers.emplace_back([&, id, port] { run_worker(config, id, port); });
        });
    });
    ps.join();
    for (auto& w : workers) w.join();
    std::remove(scheme_path.c_str());

    Problem pb = gen_least_squares(config.N, config.k, config.noise_sigma,
                                   config.problem_seed, config.n_blocks);
    auto pinned = [&](int) { return make_straggler_set(3, {1}, "pinned"); };
    GdTrace sim = gcod_run_with_sampler(pb, scheme, DecoderKind::OptimalGraph, config.p,
                                        constant_step(config.gamma), config.iterations,
                                        config.seed, pinned);
    double worst = 0.0;
    bool sizes_ok = sim.iters.size() == result.trace.iters.size();
    if (sizes_ok)
        for (std::size_t t = 0; t < sim.iters.size(); ++t)
            worst = std::max(worst,
                             std::abs(sim.iters[t].err_sq - result.trace.iters[t].err_sq));
    bool ok = wire_ok && sizes_ok && worst <= 1e-9 &&
              (sim.theta_final - result.theta).norm() <= 1e-9;
    report(11, "cluster/sim equivalence", ok, fmt("max iterate dev %.2e", worst),
           timer.elapsed());
}

// ---- 12. mixing bound ----------------------------------------------------------------

void criterion_mixing() {
    Timer timer;
    std::vector<Graph> graphs;
    graphs.push_back(gen_named("complete", 4));
    graphs.push_back(gen_named("complete", 5));
    for (int n = 4; n <= 7; ++n) graphs.push_back(gen_named("cycle", n));
    graphs.push_back(gen_circulant(6, {1}));
    graphs.push_back(gen_circulant(8, {1, 2}));
    graphs.push_back(gen_circulant(16, {1, 2}));
    graphs.push_back(gen_random_regular(16, 3, 7));
    graphs.push_back(gen_random_regular(12, 4, 3));

    double worst_slack = 1e18;
    bool ok = true;
    std::mt19937_64 rng(321);
    for (const Graph& g : graphs) {
        ExpanderProfile prof = spectral_profile(g);
        std::bernoulli_distribution coin(0.45);
        for (int t = 0; t < 200; ++t) {
            std::vector<int> S, T;
            for (int v = 0; v < g.n; ++v) {
                if (coin(rng)) S.push_back(v);
                if (coin(rng)) T.push_back(v);
            }
            MixingCheck mc = mixing_check(g, S, T, prof);
            worst_slack = std::min(worst_slack, mc.lhs - mc.rhs);
            if (mc.lhs < mc.rhs - 1e-9) ok = false;
        }
    }
    report(12, "mixing bound", ok, fmt("min lhs-rhs slack %.3e", worst_slack),
           timer.elapsed());
}

}  // namespace

int main() {
    criterion_oracle_equivalence();
    criterion_edge_sum();
    criterion_frc_closed_form();

    Graph reg16 = gen_random_regular(16, 3, 7);
    AssignmentScheme scheme16 = graph_scheme(reg16);
    criterion_near_optimality(scheme16, 3);
    criterion_fixed_lower_bound(scheme16, 3);
    criterion_adversarial_audit(reg16, scheme16);
    criterion_gd_improvement(scheme16);
    criterion_convergence_predictor();
    criterion_adversarial_floor();
    criterion_debias();
    criterion_cluster_equivalence();
    criterion_mixing();

    if (g_failures == 0) {
        std::printf("all 12 acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria FAILED\n", g_failures);
    return 1;
}
