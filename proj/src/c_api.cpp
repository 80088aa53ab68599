#include "gradcode.h"

#include <cstring>
#include <exception>
#include <fstream>
#include <set>
#include <string>

#include "gradcode/cluster.hpp"
#include "gradcode/decoding.hpp"
#include "gradcode/descent.hpp"
#include "gradcode/experiments.hpp"
#include "gradcode/graph.hpp"
#include "gradcode/metrics.hpp"
#include "gradcode/tomlite.hpp"
#include "gradcode/util.hpp"

namespace {

thread_local std::string g_last_error;

gc_status fail(gc_status code, const std::string& message) {
    g_last_error = message;
    return code;
}

template <typename Fn>
gc_status guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        return fail(GC_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::ios_base::failure& e) {
        return fail(GC_ERR_IO, e.what());
    } catch (const std::exception& e) {
        return fail(GC_ERR_RUNTIME, e.what());
    } catch (...) {
        return fail(GC_ERR_RUNTIME, "unknown error");
    }
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

gc_status require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
    return GC_OK;
}

}  // namespace

struct gc_graph {
    gradcode::Graph g;
};

struct gc_scheme {
    gradcode::AssignmentScheme a;
};

extern "C" {

const char* gc_last_error(void) { return g_last_error.c_str(); }

void gc_string_free(char* s) { delete[] s; }

gc_status gc_graph_random_regular(int n, int d, uint64_t seed, gc_graph** out) {
    return guarded([&] {
        require(out != nullptr, "out is null");
        *out = new gc_graph{gradcode::gen_random_regular(n, d, seed)};
        return GC_OK;
    });
}

gc_status gc_graph_circulant(int n, const int* offsets, int n_offsets, gc_graph** out) {
    return guarded([&] {
        require(out != nullptr && (offsets != nullptr || n_offsets == 0), "bad arguments");
        std::vector<int> offs(offsets, offsets + n_offsets);
        *out = new gc_graph{gradcode::gen_circulant(n, offs)};
        return GC_OK;
    });
}

gc_status gc_graph_named(const char* kind, int n, gc_graph** out) {
    return guarded([&] {
        require(kind != nullptr && out != nullptr, "bad arguments");
        *out = new gc_graph{gradcode::gen_named(kind, n)};
        return GC_OK;
    });
}

gc_status gc_graph_load(const char* path, gc_graph** out) {
    return guarded([&] {
        require(path != nullptr && out != nullptr, "bad arguments");
        *out = new gc_graph{gradcode::load_edge_list(path)};
        return GC_OK;
    });
}

gc_status gc_graph_save(const gc_graph* g, const char* path) {
    return guarded([&] {
        require(g != nullptr && path != nullptr, "bad arguments");
        gradcode::save_edge_list(g->g, path);
        return GC_OK;
    });
}

gc_status gc_graph_counts(const gc_graph* g, int* n, int* m) {
    return guarded([&] {
        require(g != nullptr, "graph is null");
        if (n) *n = g->g.n;
        if (m) *m = g->g.m();
        return GC_OK;
    });
}

gc_status gc_graph_spectral(const gc_graph* g, double* d, double* lambda2, double* gap,
                            double* lambda_abs) {
    return guarded([&] {
        require(g != nullptr, "graph is null");
        gradcode::ExpanderProfile prof = gradcode::spectral_profile(g->g);
        if (d) *d = prof.d;
        if (lambda2) *lambda2 = prof.lambda2;
        if (gap) *gap = prof.gap;
        if (lambda_abs) *lambda_abs = prof.lambda_abs;
        return GC_OK;
    });
}

void gc_graph_free(gc_graph* g) { delete g; }

gc_status gc_scheme_from_graph(const gc_graph* g, gc_scheme** out) {
    return guarded([&] {
        require(g != nullptr && out != nullptr, "bad arguments");
        *out = new gc_scheme{gradcode::graph_scheme(g->g)};
        return GC_OK;
    });
}

gc_status gc_scheme_adjacency(const gc_graph* g, gc_scheme** out) {
    return guarded([&] {
        require(g != nullptr && out != nullptr, "bad arguments");
        *out = new gc_scheme{gradcode::adjacency_scheme(g->g)};
        return GC_OK;
    });
}

gc_status gc_scheme_frc(int n_blocks, int m, int d, gc_scheme** out) {
    return guarded([&] {
        require(out != nullptr, "out is null");
        *out = new gc_scheme{gradcode::frc_scheme(n_blocks, m, d)};
        return GC_OK;
    });
}

gc_status gc_scheme_load(const char* path, gc_scheme** out) {
    return guarded([&] {
        require(path != nullptr && out != nullptr, "bad arguments");
        *out = new gc_scheme{gradcode::load_scheme(path)};
        return GC_OK;
    });
}

gc_status gc_scheme_save(const gc_scheme* a, const char* path) {
    return guarded([&] {
        require(a != nullptr && path != nullptr, "bad arguments");
        gradcode::save_scheme(a->a, path);
        return GC_OK;
    });
}

gc_status gc_scheme_counts(const gc_scheme* a, int* n_blocks, int* m) {
    return guarded([&] {
        require(a != nullptr, "scheme is null");
        if (n_blocks) *n_blocks = a->a.n_blocks;
        if (m) *m = a->a.m;
        return GC_OK;
    });
}

gc_status gc_scheme_hash(const gc_scheme* a, uint64_t* out) {
    return guarded([&] {
        require(a != nullptr && out != nullptr, "bad arguments");
        *out = gradcode::scheme_hash(a->a);
        return GC_OK;
    });
}

void gc_scheme_free(gc_scheme* a) { delete a; }

gc_status gc_decode_json(const gc_scheme* a, const char* decoder, const int* stragglers,
                         int n_stragglers, double p, char** json_out) {
    return guarded([&] {
        require(a != nullptr && decoder != nullptr && json_out != nullptr &&
                    (stragglers != nullptr || n_stragglers == 0),
                "bad arguments");
        std::vector<int> members(stragglers, stragglers + n_stragglers);
        gradcode::StragglerSet s =
            gradcode::make_straggler_set(a->a.m, std::move(members), "api");
        gradcode::DecoderKind kind = gradcode::decoder_kind_from_string(decoder);
        gradcode::Decoding dec;
        if (kind == gradcode::DecoderKind::OptimalGraph) {
            if (!a->a.graph)
                throw std::invalid_argument("optimal decoder needs a graph-backed scheme");
            dec = gradcode::decode_optimal_graph(*a->a.graph, s);
        } else if (kind == gradcode::DecoderKind::Fixed) {
            dec = gradcode::decode_fixed(a->a, s, p);
        } else {
            dec.alpha = gradcode::decode_oracle(a->a, s);
            dec.w.assign(a->a.m, 0.0);  // oracle reports alpha only
        }
        *json_out = dup_string(dec.to_json(s));
        return GC_OK;
    });
}

gc_status gc_bounds(double d, double p, double lambda, double* lb_universal,
                    double* lb_fixed, double* adv_upper, double* lb_fixed_cov) {
    return guarded([&] {
        gradcode::BoundSet b = gradcode::bounds(d, p, lambda);
        if (lb_universal) *lb_universal = b.lb_universal;
        if (lb_fixed) *lb_fixed = b.lb_fixed;
        if (adv_upper) *adv_upper = b.adv_upper;
        if (lb_fixed_cov) *lb_fixed_cov = b.lb_fixed_cov;
        return GC_OK;
    });
}

gc_status gc_mc_error(const gc_scheme* a, const char* decoder, double p, long long trials,
                      uint64_t seed, int threads, double* mean, double* stderr_out,
                      double* raw_mean, double* norm_const) {
    return guarded([&] {
        require(a != nullptr && decoder != nullptr, "bad arguments");
        gradcode::ErrorEstimate est = gradcode::mc_error(
            a->a, gradcode::decoder_kind_from_string(decoder), p, trials, seed, threads);
        if (mean) *mean = est.mean;
        if (stderr_out) *stderr_out = est.stderr_;
        if (raw_mean) *raw_mean = est.raw_mean;
        if (norm_const) *norm_const = est.normalization_constant;
        return GC_OK;
    });
}

namespace {

gc_status run_experiment_kind(const char* config_path, const char* out_csv_path,
                              const char* required_kind, uint64_t seed_override,
                              bool has_seed_override, int threads) {
    require(config_path != nullptr && out_csv_path != nullptr, "bad arguments");
    nlohmann::json toml = gradcode::parse_toml_file(config_path);
    if (has_seed_override) toml["seed"] = seed_override;
    gradcode::ExperimentConfig config = gradcode::experiment_config_from_toml(toml);
    if (required_kind != nullptr && config.kind != required_kind)
        throw std::invalid_argument(std::string("config kind must be ") + required_kind +
                                    ", got " + config.kind);
    gradcode::ExperimentOutput out = gradcode::run_experiment(config, threads);
    gradcode::write_experiment_output(out, out_csv_path);
    return GC_OK;
}

}  // namespace

gc_status gc_run_experiment_file(const char* config_path, const char* out_csv_path,
                                 uint64_t seed_override, int has_seed_override,
                                 int threads) {
    return guarded([&] {
        return run_experiment_kind(config_path, out_csv_path, nullptr, seed_override,
                                   has_seed_override != 0, threads);
    });
}

gc_status gc_replay(const char* sidecar_path, const char* out_csv_path, int threads) {
    return guarded([&] {
        require(sidecar_path != nullptr && out_csv_path != nullptr, "bad arguments");
        gradcode::ExperimentOutput out = gradcode::replay_from_sidecar(sidecar_path, threads);
        gradcode::write_experiment_output(out, out_csv_path);
        return GC_OK;
    });
}

gc_status gc_gd_sim_file(const char* config_path, const char* out_csv_path,
                         uint64_t seed_override, int has_seed_override, int threads) {
    (void)threads;  // the descent loop is sequential by design
    return guarded([&] {
        require(config_path != nullptr && out_csv_path != nullptr, "bad arguments");
        nlohmann::json toml = gradcode::parse_toml_file(config_path);
        static const std::set<std::string> allowed{
            "scheme", "decoder", "graph", "n",          "d",    "m",
            "offsets", "file",   "graph_seed", "N",     "k",    "noise_sigma",
            "iterations", "gamma", "p",       "seed"};
        for (auto it = toml.begin(); it != toml.end(); ++it)
            if (!allowed.count(it.key()))
                throw std::runtime_error("config: unknown key '" + it.key() + "'");
        gradcode::ArmConfig arm;
        arm.name = "gd_sim";
        arm.scheme = toml.value("scheme", "graph");
        arm.decoder = toml.value("decoder", "optimal");
        arm.graph = toml.value("graph", "regular");
        arm.n = toml.value("n", 0);
        arm.d = toml.value("d", 0);
        arm.m = toml.value("m", 0);
        if (toml.contains("offsets"))
            arm.offsets = toml.at("offsets").get<std::vector<int>>();
        arm.file = toml.value("file", "");
        arm.graph_seed = toml.value("graph_seed", 1);
        gradcode::AssignmentScheme scheme = gradcode::build_arm_scheme(arm);

        uint64_t seed = has_seed_override ? seed_override : toml.value("seed", 0);
        double p = toml.at("p").get<double>();
        double gamma = toml.at("gamma").get<double>();
        int iterations = toml.at("iterations").get<int>();
        gradcode::Problem problem = gradcode::gen_least_squares(
            toml.at("N").get<long long>(), toml.at("k").get<int>(),
            toml.value("noise_sigma", 0.0), seed, scheme.n_blocks);
        gradcode::GdTrace trace = gradcode::gcod_run(
            problem, scheme, gradcode::decoder_kind_from_string(arm.decoder), p,
            gradcode::constant_step(gamma), iterations, seed);

        std::ofstream csv(out_csv_path, std::ios::binary);
        if (!csv) throw std::runtime_error(std::string("cannot write ") + out_csv_path);
        csv << trace.to_csv();
        nlohmann::json sidecar{{"version", "gradcode-0.1.0"},
                               {"kind", "gd_sim"},
                               {"seed", seed},
                               {"diverged", trace.diverged},
                               {"scheme_hash", std::to_string(gradcode::scheme_hash(scheme))},
                               {"config", toml}};
        std::ofstream side(std::string(out_csv_path) + ".json", std::ios::binary);
        side << sidecar.dump(2) << '\n';
        return GC_OK;
    });
}

gc_status gc_predict_file(const char* config_path, const char* out_csv_path, int threads) {
    return guarded([&] {
        return run_experiment_kind(config_path, out_csv_path, "predict", 0, false, threads);
    });
}

gc_status gc_debias_file(const char* config_path, const char* out_csv_path, int threads) {
    return guarded([&] {
        return run_experiment_kind(config_path, out_csv_path, "debias_demo", 0, false,
                                   threads);
    });
}

gc_status gc_cluster_ps(const char* config_path, const char* out_csv_path) {
    return guarded([&] {
        require(config_path != nullptr, "config path is null");
        gradcode::ClusterConfig config = gradcode::load_cluster_config(config_path);
        gradcode::PsResult result = gradcode::serve_ps(config);
        if (out_csv_path != nullptr) {
            std::ofstream csv(out_csv_path, std::ios::binary);
            if (!csv) throw std::runtime_error(std::string("cannot write ") + out_csv_path);
            csv << result.trace.to_csv();
        }
        return GC_OK;
    });
}

gc_status gc_cluster_worker(const char* config_path, int worker_id) {
    return guarded([&] {
        require(config_path != nullptr, "config path is null");
        gradcode::ClusterConfig config = gradcode::load_cluster_config(config_path);
        gradcode::run_worker(config, worker_id);
        return GC_OK;
    });
}

}  // extern "C"
