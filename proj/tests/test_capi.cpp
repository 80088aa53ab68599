#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "gradcode.h"

TEST_CASE("c api graph lifecycle and errors") {
    gc_graph* g = nullptr;
    REQUIRE(gc_graph_random_regular(16, 3, 7, &g) == GC_OK);
    int n = 0, m = 0;
    CHECK(gc_graph_counts(g, &n, &m) == GC_OK);
    CHECK(n == 16);
    CHECK(m == 24);

    std::string path = "/tmp/gradcode_test_capi_graph.txt";
    CHECK(gc_graph_save(g, path.c_str()) == GC_OK);
    gc_graph* back = nullptr;
    CHECK(gc_graph_load(path.c_str(), &back) == GC_OK);
    int n2 = 0, m2 = 0;
    gc_graph_counts(back, &n2, &m2);
    CHECK(n2 == 16);
    CHECK(m2 == 24);
    gc_graph_free(back);
    gc_graph_free(g);
    std::remove(path.c_str());

    // parity violation surfaces as an error code plus message
    gc_graph* bad = nullptr;
    CHECK(gc_graph_random_regular(5, 3, 1, &bad) != GC_OK);
    CHECK(std::strlen(gc_last_error()) > 0);
}

TEST_CASE("c api spectral and bounds") {
    gc_graph* k4 = nullptr;
    REQUIRE(gc_graph_named("complete", 4, &k4) == GC_OK);
    double d = 0, l2 = 0, gap = 0, labs = 0;
    CHECK(gc_graph_spectral(k4, &d, &l2, &gap, &labs) == GC_OK);
    CHECK(d == doctest::Approx(3.0));
    CHECK(l2 == doctest::Approx(-1.0));
    CHECK(gap == doctest::Approx(4.0));
    gc_graph_free(k4);

    double lbu = 0, lbf = 0, adv = 0, lbc = 0;
    CHECK(gc_bounds(3, 0.2, 1.0, &lbu, &lbf, &adv, &lbc) == GC_OK);
    CHECK(lbf == doctest::Approx(0.2 / 2.4));
    CHECK(gc_bounds(3, 1.2, 1.0, &lbu, &lbf, &adv, &lbc) != GC_OK);
}

TEST_CASE("c api decode json") {
    gc_graph* tri = nullptr;
    REQUIRE(gc_graph_named("complete", 3, &tri) == GC_OK);
    gc_scheme* a = nullptr;
    REQUIRE(gc_scheme_from_graph(tri, &a) == GC_OK);
    gc_graph_free(tri);

    int stragglers[] = {2};
    char* json_text = nullptr;
    REQUIRE(gc_decode_json(a, "optimal", stragglers, 1, 0.0, &json_text) == GC_OK);
    auto doc = nlohmann::json::parse(json_text);
    CHECK(doc["stragglers"] == nlohmann::json::array({2}));
    CHECK(doc["alpha"][0].get<double>() == doctest::Approx(4.0 / 3.0));
    CHECK(doc["alpha"][1].get<double>() == doctest::Approx(2.0 / 3.0));
    gc_string_free(json_text);

    uint64_t hash = 0;
    CHECK(gc_scheme_hash(a, &hash) == GC_OK);
    CHECK(hash != 0);
    gc_scheme_free(a);
}

TEST_CASE("c api monte carlo determinism") {
    gc_scheme* frc = nullptr;
    REQUIRE(gc_scheme_frc(8, 8, 2, &frc) == GC_OK);
    double mean1 = 0, se1 = 0, raw1 = 0, c1 = 0;
    double mean2 = 0, se2 = 0, raw2 = 0, c2 = 0;
    CHECK(gc_mc_error(frc, "oracle", 0.2, 2000, 9, 1, &mean1, &se1, &raw1, &c1) == GC_OK);
    CHECK(gc_mc_error(frc, "oracle", 0.2, 2000, 9, 4, &mean2, &se2, &raw2, &c2) == GC_OK);
    CHECK(mean1 == mean2);
    CHECK(raw1 == raw2);
    gc_scheme_free(frc);
}

TEST_CASE("c api experiment file runner") {
    std::string cfg = "/tmp/gradcode_test_capi_cfg.toml";
    {
        std::ofstream f(cfg);
        f << "kind = \"error_sweep\"\n"
             "p_grid = [0.2]\n"
             "trials = 300\n"
             "seed = 4\n"
             "[[arm]]\n"
             "name = \"c6\"\n"
             "graph = \"circulant\"\n"
             "n = 6\n"
             "offsets = [1]\n"
             "decoder = \"fixed\"\n";
    }
    std::string out = "/tmp/gradcode_test_capi_out.csv";
    REQUIRE(gc_run_experiment_file(cfg.c_str(), out.c_str(), 0, 0, 2) == GC_OK);
    std::ifstream csv(out);
    std::string header;
    std::getline(csv, header);
    CHECK(header.rfind("scheme,decoder,p,", 0) == 0);
    std::ifstream side(out + ".json");
    CHECK(side.good());

    // replay through the api
    std::string out2 = "/tmp/gradcode_test_capi_out2.csv";
    REQUIRE(gc_replay((out + ".json").c_str(), out2.c_str(), 2) == GC_OK);
    std::ifstream a(out), b(out2);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);

    std::remove(cfg.c_str());
    std::remove(out.c_str());
    std::remove((out + ".json").c_str());
    std::remove(out2.c_str());
    std::remove((out2 + ".json").c_str());
}
