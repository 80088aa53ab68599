// Command-line front end. Everything goes through the C API in gradcode.h.
#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "gradcode.h"

namespace {

int die(gc_status status) {
    if (status == GC_OK) return 0;
    std::fprintf(stderr, "error: %s\n", gc_last_error());
    return static_cast<int>(status);
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::string item;
    for (char c : s + ",") {
        if (c == ',' || c == ' ') {
            if (!item.empty()) out.push_back(std::stoi(item));
            item.clear();
        } else {
            item.push_back(c);
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gradcode: graph-based gradient coding workbench"};
    app.require_subcommand(1);

    std::string config, out, scheme_file, graph_file;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* c = cmd->add_option("--config", config, "TOML config file");
        if (needs_config) c->required();
        cmd->add_option("--out", out, "output path");
        cmd->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
            seed_set = true;
        });
        cmd->add_option("--threads", threads,
                        "worker threads (GRADCODE_THREADS overrides)");
    };

    // gen-graph
    auto* gen = app.add_subcommand("gen-graph", "generate a graph and save its edge list");
    std::string kind = "regular";
    int n = 0, d = 0;
    std::string offsets_str;
    gen->add_option("--kind", kind, "regular|circulant|complete|cycle")->required();
    gen->add_option("--n", n, "vertex count")->required();
    gen->add_option("--d", d, "degree (regular)");
    gen->add_option("--offsets", offsets_str, "circulant offsets, comma separated");
    add_common(gen, false);
    gen->callback([&] {
        gc_graph* g = nullptr;
        gc_status st;
        if (kind == "regular") {
            st = gc_graph_random_regular(n, d, seed, &g);
        } else if (kind == "circulant") {
            auto offs = parse_int_list(offsets_str);
            st = gc_graph_circulant(n, offs.data(), static_cast<int>(offs.size()), &g);
        } else {
            st = gc_graph_named(kind.c_str(), n, &g);
        }
        if (st != GC_OK) std::exit(die(st));
        double dd = 0, l2 = 0, gap = 0, labs = 0;
        gc_graph_spectral(g, &dd, &l2, &gap, &labs);
        int gn = 0, gm = 0;
        gc_graph_counts(g, &gn, &gm);
        std::printf("n=%d m=%d d=%g lambda2=%.6g gap=%.6g lambda_abs=%.6g\n", gn, gm, dd,
                    l2, gap, labs);
        if (!out.empty()) st = gc_graph_save(g, out.c_str());
        gc_graph_free(g);
        std::exit(die(st));
    });

    // scheme
    auto* sch = app.add_subcommand("scheme", "build an assignment scheme and save it");
    std::string scheme_kind = "graph";
    int frc_m = 0;
    sch->add_option("--kind", scheme_kind, "graph|frc|adjacency")->required();
    sch->add_option("--graph", graph_file, "edge-list file (graph/adjacency)");
    sch->add_option("--n", n, "block count (frc)");
    sch->add_option("--m", frc_m, "machine count (frc)");
    sch->add_option("--d", d, "replication factor (frc)");
    add_common(sch, false);
    sch->callback([&] {
        gc_scheme* a = nullptr;
        gc_status st;
        if (scheme_kind == "frc") {
            st = gc_scheme_frc(n, frc_m, d, &a);
        } else {
            gc_graph* g = nullptr;
            st = gc_graph_load(graph_file.c_str(), &g);
            if (st != GC_OK) std::exit(die(st));
            st = scheme_kind == "adjacency" ? gc_scheme_adjacency(g, &a)
                                            : gc_scheme_from_graph(g, &a);
            gc_graph_free(g);
        }
        if (st != GC_OK) std::exit(die(st));
        uint64_t hash = 0;
        int bn = 0, bm = 0;
        gc_scheme_hash(a, &hash);
        gc_scheme_counts(a, &bn, &bm);
        std::printf("n=%d m=%d hash=%llu\n", bn, bm,
                    static_cast<unsigned long long>(hash));
        if (!out.empty()) st = gc_scheme_save(a, out.c_str());
        gc_scheme_free(a);
        std::exit(die(st));
    });

    // decode
    auto* dec = app.add_subcommand("decode", "decode one straggler set, print JSON");
    std::string decoder = "optimal", stragglers_str;
    double p = 0.0;
    dec->add_option("--scheme", scheme_file, "scheme file")->required();
    dec->add_option("--decoder", decoder, "optimal|oracle|fixed");
    dec->add_option("--stragglers", stragglers_str, "comma-separated machine indices");
    dec->add_option("--p", p, "straggler probability (fixed decoder)");
    add_common(dec, false);
    dec->callback([&] {
        gc_scheme* a = nullptr;
        gc_status st = gc_scheme_load(scheme_file.c_str(), &a);
        if (st != GC_OK) std::exit(die(st));
        auto members = parse_int_list(stragglers_str);
        char* json = nullptr;
        st = gc_decode_json(a, decoder.c_str(), members.data(),
                            static_cast<int>(members.size()), p, &json);
        gc_scheme_free(a);
        if (st != GC_OK) std::exit(die(st));
        if (out.empty()) {
            std::printf("%s\n", json);
        } else {
            FILE* f = std::fopen(out.c_str(), "wb");
            if (!f) {
                std::fprintf(stderr, "error: cannot write %s\n", out.c_str());
                std::exit(2);
            }
            std::fprintf(f, "%s\n", json);
            std::fclose(f);
        }
        gc_string_free(json);
        std::exit(0);
    });

    // config-driven experiment subcommands
    auto add_experiment = [&](const char* name, const char* help) {
        auto* cmd = app.add_subcommand(name, help);
        add_common(cmd, true);
        return cmd;
    };
    auto run_config_experiment = [&] {
        if (out.empty()) {
            std::fprintf(stderr, "error: --out is required\n");
            std::exit(1);
        }
        std::exit(die(gc_run_experiment_file(config.c_str(), out.c_str(), seed,
                                             seed_set ? 1 : 0, threads)));
    };
    add_experiment("error-sweep", "Monte Carlo decoding-error sweep")
        ->callback(run_config_experiment);
    add_experiment("cov-sweep", "covariance operator-norm sweep")
        ->callback(run_config_experiment);
    add_experiment("adv-audit", "adversarial straggler audit")
        ->callback(run_config_experiment);

    add_experiment("gd-sim", "coded gradient descent simulation")->callback([&] {
        if (out.empty()) {
            std::fprintf(stderr, "error: --out is required\n");
            std::exit(1);
        }
        std::exit(die(gc_gd_sim_file(config.c_str(), out.c_str(), seed, seed_set ? 1 : 0,
                                     threads)));
    });

    add_experiment("predict", "convergence predictions")->callback([&] {
        if (out.empty()) {
            std::fprintf(stderr, "error: --out is required\n");
            std::exit(1);
        }
        std::exit(die(gc_predict_file(config.c_str(), out.c_str(), threads)));
    });

    add_experiment("debias", "debias a biased scheme and report mean alpha")->callback([&] {
        if (out.empty()) {
            std::fprintf(stderr, "error: --out is required\n");
            std::exit(1);
        }
        std::exit(die(gc_debias_file(config.c_str(), out.c_str(), threads)));
    });

    auto* replay = app.add_subcommand("replay", "re-run an experiment from its sidecar");
    std::string sidecar;
    replay->add_option("--sidecar", sidecar, "sidecar JSON path")->required();
    add_common(replay, false);
    replay->callback([&] {
        if (out.empty()) {
            std::fprintf(stderr, "error: --out is required\n");
            std::exit(1);
        }
        std::exit(die(gc_replay(sidecar.c_str(), out.c_str(), threads)));
    });

    add_experiment("gd-cluster-ps", "run the parameter server")->callback([&] {
        std::exit(die(gc_cluster_ps(config.c_str(), out.empty() ? nullptr : out.c_str())));
    });

    auto* worker = app.add_subcommand("gd-cluster-worker", "run one worker");
    int worker_id = -1;
    worker->add_option("--id", worker_id, "worker id")->required();
    add_common(worker, true);
    worker->callback(
        [&] { std::exit(die(gc_cluster_worker(config.c_str(), worker_id))); });

    CLI11_PARSE(app, argc, argv);
    return 0;
}
