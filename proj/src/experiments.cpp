#include "gradcode/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gradcode/decoding.hpp"
#include "gradcode/descent.hpp"
#include "gradcode/metrics.hpp"
#include "gradcode/stragglers.hpp"
#include "gradcode/tomlite.hpp"
#include "gradcode/util.hpp"

namespace gradcode {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "gradcode-0.1.0";

void reject_unknown_keys(const json& table, const std::set<std::string>& allowed,
                         const std::string& path) {
    for (auto it = table.begin(); it != table.end(); ++it) {
        if (!allowed.count(it.key()))
            throw std::runtime_error("config: unknown key '" + path + it.key() + "'");
    }
}

ArmConfig arm_from_json(const json& t, const std::string& path) {
    reject_unknown_keys(t,
                        {"name", "scheme", "decoder", "graph", "n", "d", "m", "offsets",
                         "file", "graph_seed"},
                        path);
    ArmConfig a;
    a.name = t.value("name", "");
    a.scheme = t.value("scheme", "graph");
    a.decoder = t.value("decoder", "optimal");
    a.graph = t.value("graph", "regular");
    a.n = t.value("n", 0);
    a.d = t.value("d", 0);
    a.m = t.value("m", 0);
    if (t.contains("offsets")) a.offsets = t.at("offsets").get<std::vector<int>>();
    a.file = t.value("file", "");
    a.graph_seed = t.value("graph_seed", 1);
    if (a.name.empty()) throw std::runtime_error("config: " + path + "name is required");
    if (a.scheme != "graph" && a.scheme != "frc" && a.scheme != "adjacency")
        throw std::runtime_error("config: " + path + "scheme must be graph|frc|adjacency");
    decoder_kind_from_string(a.decoder);  // validates
    return a;
}

}  // namespace

ExperimentConfig experiment_config_from_toml(const json& toml) {
    reject_unknown_keys(toml,
                        {"kind", "p_grid", "trials", "seed", "arm", "N", "k", "noise_sigma",
                         "iterations", "grid_lo", "grid_hi", "grid_base", "grid_scale",
                         "seeds", "multiplier", "s_max", "eps", "target_eps", "eps0"},
                        "");
    ExperimentConfig c;
    c.echo = toml;
    if (!toml.contains("kind")) throw std::runtime_error("config: missing key 'kind'");
    c.kind = toml.at("kind").get<std::string>();
    static const std::set<std::string> kinds{"error_sweep",      "covariance_sweep",
                                             "adversarial_audit", "gd_compare",
                                             "debias_demo",       "predict"};
    if (!kinds.count(c.kind))
        throw std::runtime_error("config: unknown experiment kind '" + c.kind + "'");
    if (toml.contains("p_grid")) c.p_grid = toml.at("p_grid").get<std::vector<double>>();
    for (double p : c.p_grid)
        if (!(p > 0.0 && p < 1.0))
            throw std::runtime_error("config: p_grid values must lie in (0, 1)");
    c.trials = toml.value("trials", 0LL);
    c.seed = toml.value("seed", 0);
    if (toml.contains("arm")) {
        const json& arms = toml.at("arm");
        if (!arms.is_array()) throw std::runtime_error("config: 'arm' must use [[arm]] tables");
        for (std::size_t i = 0; i < arms.size(); ++i)
            c.arms.push_back(arm_from_json(arms[i], "arm[" + std::to_string(i) + "]."));
    }
    c.N = toml.value("N", 0LL);
    c.k = toml.value("k", 0);
    c.noise_sigma = toml.value("noise_sigma", 0.0);
    c.iterations = toml.value("iterations", 0);
    c.grid_lo = toml.value("grid_lo", 0);
    c.grid_hi = toml.value("grid_hi", 20);
    c.grid_base = toml.value("grid_base", 1.3);
    c.grid_scale = toml.value("grid_scale", 1e-6);
    c.seeds = toml.value("seeds", 1);
    c.multiplier = toml.value("multiplier", 0);
    c.s_max = toml.value("s_max", 0);
    c.eps = toml.value("eps", 0.1);
    c.target_eps = toml.value("target_eps", 1e-2);
    c.eps0 = toml.value("eps0", 0.0);

    const bool needs_p = c.kind == "error_sweep" || c.kind == "covariance_sweep" ||
                         c.kind == "gd_compare" || c.kind == "debias_demo" ||
                         c.kind == "predict";
    if (needs_p && c.p_grid.empty())
        throw std::runtime_error("config: 'p_grid' must be nonempty for kind " + c.kind);
    const bool needs_trials = c.kind == "error_sweep" || c.kind == "covariance_sweep" ||
                              c.kind == "debias_demo" || c.kind == "predict";
    if (needs_trials && c.trials < 100)
        throw std::runtime_error("config: 'trials' must be at least 100");
    if (c.arms.empty()) throw std::runtime_error("config: at least one [[arm]] is required");
    if (c.kind == "adversarial_audit" && c.s_max <= 0)
        throw std::runtime_error("config: 's_max' must be positive for adversarial_audit");
    if ((c.kind == "gd_compare" || c.kind == "predict") &&
        (c.N <= 0 || c.k <= 0 || c.iterations <= 0))
        throw std::runtime_error("config: 'N', 'k' and 'iterations' are required for " + c.kind);
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    return experiment_config_from_toml(parse_toml_file(path));
}

AssignmentScheme build_arm_scheme(const ArmConfig& arm) {
    if (arm.scheme == "frc") {
        if (arm.n <= 0 || arm.m <= 0 || arm.d <= 0)
            throw std::runtime_error("arm '" + arm.name + "': frc needs n, m and d");
        return frc_scheme(arm.n, arm.m, arm.d);
    }
    Graph g;
    if (arm.graph == "regular") {
        g = gen_random_regular(arm.n, arm.d, arm.graph_seed);
    } else if (arm.graph == "circulant") {
        g = gen_circulant(arm.n, arm.offsets);
    } else if (arm.graph == "complete" || arm.graph == "cycle") {
        g = gen_named(arm.graph, arm.n);
    } else if (arm.graph == "file") {
        g = load_edge_list(arm.file);
    } else {
        throw std::runtime_error("arm '" + arm.name + "': unknown graph kind " + arm.graph);
    }
    return arm.scheme == "adjacency" ? adjacency_scheme(g) : graph_scheme(g);
}

namespace {

struct Row : std::ostringstream {
    void field(const std::string& s) {
        if (tellp() > 0) *this << ',';
        *this << s;
    }
    void field(double x) { field(format_double(x)); }
    void field(long long x) { field(std::to_string(x)); }
    void field(int x) { field(std::to_string(x)); }
};

double arm_degree(const AssignmentScheme& scheme) {
    return scheme.replication_factor();
}

// Spectral gap d - lambda2 used by the adversarial upper bound. Schemes
// without a backing graph (FRC) have no meaningful gap; callers blank out the
// adversarial column for them and the remaining bounds ignore lambda.
double arm_gap(const AssignmentScheme& scheme, double d) {
    if (scheme.graph) return spectral_profile(*scheme.graph).gap;
    return d;
}

std::string run_error_sweep(const ExperimentConfig& c, int threads) {
    std::ostringstream out;
    out << "scheme,decoder,p,trials,mean,stderr,raw_mean,c,lb_universal,lb_fixed,adv_upper\n";
    for (const auto& arm : c.arms) {
        AssignmentScheme scheme = build_arm_scheme(arm);
        DecoderKind decoder = decoder_kind_from_string(arm.decoder);
        double d = arm_degree(scheme);
        double gap = arm_gap(scheme, d);
        for (double p : c.p_grid) {
            ErrorEstimate est = mc_error(scheme, decoder, p, c.trials, c.seed, threads);
            BoundSet b = bounds(d, p, gap);
            Row row;
            row.field(arm.name);
            row.field(arm.decoder);
            row.field(p);
            row.field(est.trials);
            row.field(est.mean);
            row.field(est.stderr_);
            row.field(est.raw_mean);
            row.field(est.normalization_constant);
            row.field(b.lb_universal);
            row.field(b.lb_fixed);
            if (scheme.graph)
                row.field(b.adv_upper);
            else
                row.field(std::string());
            out << row.str() << '\n';
        }
    }
    return out.str();
}

std::string run_covariance_sweep(const ExperimentConfig& c, int threads) {
    std::ostringstream out;
    out << "scheme,decoder,p,trials,opnorm,opnorm_stderr,c,mean,lb_fixed_cov\n";
    for (const auto& arm : c.arms) {
        AssignmentScheme scheme = build_arm_scheme(arm);
        DecoderKind decoder = decoder_kind_from_string(arm.decoder);
        double d = arm_degree(scheme);
        double gap = arm_gap(scheme, d);
        for (double p : c.p_grid) {
            CovarianceEstimate cov =
                covariance_opnorm(scheme, decoder, p, c.trials, c.seed, threads);
            ErrorEstimate est = mc_error(scheme, decoder, p, c.trials, c.seed, threads);
            BoundSet b = bounds(d, p, gap);
            Row row;
            row.field(arm.name);
            row.field(arm.decoder);
            row.field(p);
            row.field(cov.trials);
            row.field(cov.value);
            row.field(cov.stderr_proxy);
            row.field(cov.normalization_constant);
            row.field(est.mean);
            row.field(b.lb_fixed_cov);
            out << row.str() << '\n';
        }
    }
    return out.str();
}

std::string run_adversarial_audit(const ExperimentConfig& c, int /*threads*/) {
    std::ostringstream out;
    out << "scheme,decoder,s,method,worst_error,worst_error_per_n,evaluated,adv_upper,members\n";
    for (const auto& arm : c.arms) {
        AssignmentScheme scheme = build_arm_scheme(arm);
        DecoderKind decoder = decoder_kind_from_string(arm.decoder);
        double d = arm_degree(scheme);
        double gap = arm_gap(scheme, d);
        auto error_of = [&](const StragglerSet& s) {
            if (decoder == DecoderKind::OptimalGraph && scheme.graph)
                return decoding_error_sq(decode_optimal_graph(*scheme.graph, s).alpha);
            if (decoder == DecoderKind::Fixed)
                return decoding_error_sq(decode_fixed_adversarial(scheme, s).alpha);
            return decoding_error_sq(decode_oracle(scheme, s));
        };
        for (int s = 1; s <= c.s_max; ++s) {
            std::string method = "exhaustive";
            AdversarialResult res;
            try {
                res = adversarial_exhaustive(scheme, s, error_of);
            } catch (const std::exception&) {
                if (!scheme.graph)
                    throw;  // greedy fallback needs a backing graph
                method = "greedy";
                res.set = adversarial_greedy(*scheme.graph, s);
                res.worst_error = error_of(res.set);
                res.evaluated = 0;
            }
            double p = static_cast<double>(s) / scheme.m;
            BoundSet b = bounds(d, p, gap);
            Row row;
            row.field(arm.name);
            row.field(arm.decoder);
            row.field(s);
            row.field(method);
            row.field(res.worst_error);
            row.field(res.worst_error / scheme.n_blocks);
            row.field(res.evaluated);
            if (scheme.graph)
                row.field(b.adv_upper);
            else
                row.field(std::string());
            std::string members;
            for (int j : res.set.members) {
                if (!members.empty()) members += ' ';
                members += std::to_string(j);
            }
            row.field("\"" + members + "\"");
            out << row.str() << '\n';
        }
    }
    return out.str();
}

std::string run_gd_compare(const ExperimentConfig& c, int /*threads*/) {
    double p = c.p_grid.front();
    std::vector<double> grid;
    for (int i = c.grid_lo; i <= c.grid_hi; ++i)
        grid.push_back(c.grid_scale * std::pow(c.grid_base, i));

    std::ostringstream out;
    out << "arm,seed,gamma,iter,err_sq,step,stragglers,alpha_err\n";

    auto emit = [&](const std::string& name, std::uint64_t run_seed, double gamma,
                    const GdTrace& trace) {
        for (std::size_t t = 0; t < trace.iters.size(); ++t) {
            const auto& it = trace.iters[t];
            Row row;
            row.field(name);
            row.field(static_cast<long long>(run_seed));
            row.field(gamma);
            row.field(static_cast<long long>(t));
            row.field(it.err_sq);
            row.field(it.step);
            row.field(it.stragglers);
            row.field(it.alpha_err_sq);
            out << row.str() << '\n';
        }
    };

    int uncoded_mult = c.multiplier;
    for (const auto& arm : c.arms) {
        AssignmentScheme scheme = build_arm_scheme(arm);
        DecoderKind decoder = decoder_kind_from_string(arm.decoder);
        if (uncoded_mult == 0)
            uncoded_mult = std::max(uncoded_mult,
                                    static_cast<int>(std::lround(arm_degree(scheme))));
        Problem problem =
            gen_least_squares(c.N, c.k, c.noise_sigma, c.seed, scheme.n_blocks);
        auto terminal = [&](double gamma) {
            GdTrace t = gcod_run(problem, scheme, decoder, p, constant_step(gamma),
                                 c.iterations, c.seed);
            return t.diverged ? std::numeric_limits<double>::infinity()
                              : t.iters.back().err_sq;
        };
        GridSearchResult gs = grid_search_step(grid, terminal);
        for (int r = 0; r < c.seeds; ++r) {
            std::uint64_t run_seed = c.seed + r;
            GdTrace trace = gcod_run(problem, scheme, decoder, p,
                                     constant_step(gs.best.gamma_scale), c.iterations,
                                     run_seed);
            emit(arm.name, run_seed, gs.best.gamma_scale, trace);
        }
    }

    // Ignore-stragglers baseline, run for multiplier-times as many iterations.
    {
        const auto& arm = c.arms.front();
        AssignmentScheme scheme = build_arm_scheme(arm);
        if (uncoded_mult <= 0) uncoded_mult = 1;
        Problem problem =
            gen_least_squares(c.N, c.k, c.noise_sigma, c.seed, scheme.n_blocks);
        auto terminal = [&](double gamma) {
            GdTrace t = uncoded_baseline(problem, p, constant_step(gamma), c.iterations,
                                         uncoded_mult, c.seed);
            return t.diverged ? std::numeric_limits<double>::infinity()
                              : t.iters.back().err_sq;
        };
        GridSearchResult gs = grid_search_step(grid, terminal);
        for (int r = 0; r < c.seeds; ++r) {
            std::uint64_t run_seed = c.seed + r;
            GdTrace trace = uncoded_baseline(problem, p, constant_step(gs.best.gamma_scale),
                                             c.iterations, uncoded_mult, run_seed);
            emit("uncoded", run_seed, gs.best.gamma_scale, trace);
        }
    }
    return out.str();
}

std::string run_debias_demo(const ExperimentConfig& c, int threads) {
    double p = c.p_grid.front();
    std::ostringstream out;
    out << "scheme,i,mean_before,stderr_before,mean_after,stderr_after\n";
    for (const auto& arm : c.arms) {
        AssignmentScheme scheme = build_arm_scheme(arm);
        DecoderKind decoder = decoder_kind_from_string(arm.decoder);
        MeanAlphaEstimate before = mean_alpha(scheme, decoder, p, c.trials, c.seed, threads);
        AssignmentScheme fixed = debias(scheme, before.mean, c.eps);
        MeanAlphaEstimate after =
            mean_alpha(fixed, DecoderKind::Oracle, p, c.trials, c.seed, threads);
        for (int i = 0; i < scheme.n_blocks; ++i) {
            Row row;
            row.field(arm.name);
            row.field(i);
            row.field(before.mean[i]);
            row.field(before.stderr_[i]);
            row.field(after.mean[i]);
            row.field(after.stderr_[i]);
            out << row.str() << '\n';
        }
    }
    return out.str();
}

std::string run_predict(const ExperimentConfig& c, int threads) {
    double p = c.p_grid.front();
    std::ostringstream out;
    out << "arm,p,r,s,mu,L,L_block,sigma2,gamma,k,gamma_adv,k_adv,floor,a\n";
    for (const auto& arm : c.arms) {
        AssignmentScheme scheme = build_arm_scheme(arm);
        DecoderKind decoder = decoder_kind_from_string(arm.decoder);
        ErrorEstimate est = mc_error(scheme, decoder, p, c.trials, c.seed, threads);
        CovarianceEstimate cov = covariance_opnorm(scheme, decoder, p, c.trials, c.seed, threads);
        Problem problem = gen_least_squares(c.N, c.k, c.noise_sigma, c.seed, scheme.n_blocks);
        ConvergenceParams params;
        params.mu = problem.mu;
        params.L = problem.L;
        params.L_block = problem.L_block;
        params.sigma2 = problem.sigma2;
        params.r = est.mean;
        params.s = cov.value;
        params.eps = c.target_eps;
        params.eps0 = c.eps0 > 0.0 ? c.eps0 : problem.theta_star.squaredNorm();
        params.n_blocks = scheme.n_blocks;
        RandomPrediction rnd = predict_random(params);

        Row row;
        row.field(arm.name);
        row.field(p);
        row.field(params.r);
        row.field(params.s);
        row.field(params.mu);
        row.field(params.L);
        row.field(params.L_block);
        row.field(params.sigma2);
        row.field(rnd.gamma);
        row.field(rnd.k);
        if (c.s_max > 0 && scheme.graph) {
            // Adversarial prediction with r = worst-case |alpha - 1|_2.
            StragglerSet worst = adversarial_greedy(*scheme.graph, c.s_max);
            double err = decoding_error_sq(decode_optimal_graph(*scheme.graph, worst).alpha);
            ConvergenceParams adv = params;
            adv.r = std::sqrt(err);
            AdversarialPrediction pred = predict_adversarial(adv, c.target_eps);
            row.field(pred.gamma);
            row.field(pred.k_max);
            row.field(pred.floor);
            row.field(pred.a);
        } else {
            row.field(std::string());
            row.field(std::string());
            row.field(std::string());
            row.field(std::string());
        }
        out << row.str() << '\n';
    }
    return out.str();
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& config, int threads) {
    ExperimentOutput out;
    if (config.kind == "error_sweep")
        out.csv = run_error_sweep(config, threads);
    else if (config.kind == "covariance_sweep")
        out.csv = run_covariance_sweep(config, threads);
    else if (config.kind == "adversarial_audit")
        out.csv = run_adversarial_audit(config, threads);
    else if (config.kind == "gd_compare")
        out.csv = run_gd_compare(config, threads);
    else if (config.kind == "debias_demo")
        out.csv = run_debias_demo(config, threads);
    else if (config.kind == "predict")
        out.csv = run_predict(config, threads);
    else
        throw std::runtime_error("run_experiment: unknown kind " + config.kind);

    json hashes = json::object();
    for (const auto& arm : config.arms)
        hashes[arm.name] = std::to_string(scheme_hash(build_arm_scheme(arm)));
    out.sidecar = json{{"version", kVersion},
                       {"kind", config.kind},
                       {"seed", config.seed},
                       {"scheme_hashes", hashes},
                       {"csv_fnv1a", std::to_string(fnv1a(out.csv))},
                       {"config", config.echo}};
    return out;
}

void write_experiment_output(const ExperimentOutput& out, const std::string& csv_path) {
    {
        std::ofstream f(csv_path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + csv_path);
        f << out.csv;
    }
    std::ofstream f(csv_path + ".json", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + csv_path + ".json");
    f << out.sidecar.dump(2) << '\n';
}

ExperimentOutput replay_from_sidecar(const std::string& sidecar_path, int threads) {
    std::ifstream f(sidecar_path);
    if (!f) throw std::runtime_error("cannot open " + sidecar_path);
    json sidecar = json::parse(f);
    ExperimentConfig config = experiment_config_from_toml(sidecar.at("config"));
    ExperimentOutput out = run_experiment(config, threads);
    std::string expect = sidecar.value("csv_fnv1a", "");
    if (!expect.empty() && expect != out.sidecar.at("csv_fnv1a").get<std::string>())
        throw std::runtime_error("replay: output differs from recorded run");
    return out;
}

}  // namespace gradcode
