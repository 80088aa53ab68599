#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "gradcode/experiments.hpp"
#include "gradcode/tomlite.hpp"

using namespace gradcode;

namespace {

nlohmann::json base_config() {
    return parse_toml(
        "kind = \"error_sweep\"\n"
        "p_grid = [0.2]\n"
        "trials = 400\n"
        "seed = 7\n"
        "[[arm]]\n"
        "name = \"c6\"\n"
        "scheme = \"graph\"\n"
        "graph = \"circulant\"\n"
        "n = 6\n"
        "offsets = [1]\n"
        "decoder = \"optimal\"\n"
        "[[arm]]\n"
        "name = \"frc\"\n"
        "scheme = \"frc\"\n"
        "n = 8\n"
        "m = 8\n"
        "d = 2\n"
        "decoder = \"oracle\"\n");
}

}  // namespace

TEST_CASE("config validation") {
    auto good = base_config();
    ExperimentConfig c = experiment_config_from_toml(good);
    CHECK(c.kind == "error_sweep");
    CHECK(c.arms.size() == 2);

    auto unknown = base_config();
    unknown["zorp"] = 1;
    CHECK_THROWS_WITH_AS(experiment_config_from_toml(unknown),
                         "config: unknown key 'zorp'", std::runtime_error);

    auto bad_arm = base_config();
    bad_arm["arm"][0]["flavor"] = "salt";
    CHECK_THROWS(experiment_config_from_toml(bad_arm));

    auto no_p = base_config();
    no_p.erase("p_grid");
    CHECK_THROWS(experiment_config_from_toml(no_p));

    auto bad_p = base_config();
    bad_p["p_grid"] = {0.2, 1.5};
    CHECK_THROWS(experiment_config_from_toml(bad_p));

    auto few = base_config();
    few["trials"] = 50;
    CHECK_THROWS(experiment_config_from_toml(few));

    auto bad_kind = base_config();
    bad_kind["kind"] = "mystery";
    CHECK_THROWS(experiment_config_from_toml(bad_kind));
}

TEST_CASE("error sweep output shape and determinism") {
    ExperimentConfig c = experiment_config_from_toml(base_config());
    ExperimentOutput out = run_experiment(c, 2);
    CHECK(out.csv.rfind(
              "scheme,decoder,p,trials,mean,stderr,raw_mean,c,lb_universal,lb_fixed,"
              "adv_upper\n",
              0) == 0);
    CHECK(std::count(out.csv.begin(), out.csv.end(), '\n') == 3);  // header + 2 rows

    ExperimentOutput again = run_experiment(c, 4);
    CHECK(again.csv == out.csv);  // worker-count independent, byte identical
    CHECK(out.sidecar["csv_fnv1a"] == again.sidecar["csv_fnv1a"]);
}

TEST_CASE("replay reproduces the recorded run") {
    ExperimentConfig c = experiment_config_from_toml(base_config());
    ExperimentOutput out = run_experiment(c, 2);
    std::string csv_path = "/tmp/gradcode_test_exp.csv";
    write_experiment_output(out, csv_path);

    ExperimentOutput back = replay_from_sidecar(csv_path + ".json", 2);
    CHECK(back.csv == out.csv);

    std::remove(csv_path.c_str());
    std::remove((csv_path + ".json").c_str());
}

TEST_CASE("adversarial audit experiment") {
    auto doc = parse_toml(
        "kind = \"adversarial_audit\"\n"
        "s_max = 3\n"
        "seed = 1\n"
        "[[arm]]\n"
        "name = \"k4\"\n"
        "graph = \"complete\"\n"
        "n = 4\n"
        "decoder = \"optimal\"\n");
    ExperimentOutput out = run_experiment(experiment_config_from_toml(doc), 1);
    CHECK(out.csv.rfind("scheme,decoder,s,method,", 0) == 0);
    CHECK(std::count(out.csv.begin(), out.csv.end(), '\n') == 4);
    CHECK(out.csv.find("exhaustive") != std::string::npos);
}

TEST_CASE("gd compare experiment includes the uncoded baseline") {
    auto doc = parse_toml(
        "kind = \"gd_compare\"\n"
        "p_grid = [0.2]\n"
        "seed = 3\n"
        "N = 64\n"
        "k = 4\n"
        "noise_sigma = 1.0\n"
        "iterations = 5\n"
        "seeds = 2\n"
        "grid_lo = 18\n"
        "grid_hi = 22\n"
        "[[arm]]\n"
        "name = \"reg\"\n"
        "graph = \"regular\"\n"
        "n = 8\n"
        "d = 3\n"
        "graph_seed = 2\n"
        "decoder = \"optimal\"\n");
    ExperimentOutput out = run_experiment(experiment_config_from_toml(doc), 1);
    CHECK(out.csv.rfind("arm,seed,gamma,iter,", 0) == 0);
    CHECK(out.csv.find("\nreg,") != std::string::npos);
    CHECK(out.csv.find("\nuncoded,") != std::string::npos);
    // header + coded traces (6 rows each) + uncoded traces (d-times iterations)
    CHECK(std::count(out.csv.begin(), out.csv.end(), '\n') == 1 + 2 * 6 + 2 * 16);
}

TEST_CASE("debias demo and predict run end to end") {
    auto doc = parse_toml(
        "kind = \"debias_demo\"\n"
        "p_grid = [0.2]\n"
        "trials = 500\n"
        "eps = 0.12\n"
        "seed = 5\n"
        "[[arm]]\n"
        "name = \"reg\"\n"
        "graph = \"regular\"\n"
        "n = 8\n"
        "d = 3\n"
        "graph_seed = 4\n"
        "decoder = \"optimal\"\n");
    ExperimentOutput demo = run_experiment(experiment_config_from_toml(doc), 2);
    CHECK(std::count(demo.csv.begin(), demo.csv.end(), '\n') == 9);  // header + 8 blocks

    auto pred = parse_toml(
        "kind = \"predict\"\n"
        "p_grid = [0.2]\n"
        "trials = 2000\n"
        "seed = 5\n"
        "N = 64\n"
        "k = 4\n"
        "iterations = 10\n"
        "target_eps = 0.01\n"
        "s_max = 2\n"
        "[[arm]]\n"
        "name = \"c8\"\n"
        "graph = \"circulant\"\n"
        "n = 8\n"
        "offsets = [1, 2]\n"
        "decoder = \"optimal\"\n");
    ExperimentOutput out = run_experiment(experiment_config_from_toml(pred), 2);
    CHECK(out.csv.rfind("arm,p,r,s,mu,L,L_block,sigma2,gamma,k,", 0) == 0);
    CHECK(std::count(out.csv.begin(), out.csv.end(), '\n') == 2);
}
