#include <doctest.h>

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "gradcode/assignment.hpp"
#include "gradcode/graph.hpp"

using namespace gradcode;

namespace {

std::vector<Graph> fixtures() {
    std::vector<Graph> out;
    out.push_back(gen_named("complete", 3));  // triangle
    out.push_back(gen_named("cycle", 4));
    out.push_back(gen_named("cycle", 5));
    out.push_back(gen_circulant(6, {1}));
    out.push_back(gen_named("complete", 4));
    out.push_back(gen_named("complete", 5));
    out.push_back(gen_random_regular(16, 3, 7));
    out.push_back(gen_circulant(8, {1, 2}));
    return out;
}

std::string tmp_path(const char* name) {
    return std::string("/tmp/gradcode_test_") + name;
}

}  // namespace

TEST_CASE("random regular generator") {
    Graph g = gen_random_regular(16, 3, 7);
    CHECK(g.n == 16);
    CHECK(g.m() == 24);
    for (int deg : g.degree) CHECK(deg == 3);
    CHECK_FALSE(g.vertex_transitive);

    // same seed, same edge list
    Graph h = gen_random_regular(16, 3, 7);
    CHECK(g.edges == h.edges);

    // only simple 3-regular graph on 4 vertices is K4
    Graph k4 = gen_random_regular(4, 3, 123);
    CHECK(k4.m() == 6);
    std::set<std::pair<int, int>> es(k4.edges.begin(), k4.edges.end());
    CHECK(es.size() == 6);

    CHECK_THROWS(gen_random_regular(5, 3, 1));  // nd odd
    CHECK_THROWS(gen_random_regular(3, 3, 1));  // d >= n
}

TEST_CASE("circulant generator") {
    Graph c6 = gen_circulant(6, {1});
    CHECK(c6.m() == 6);
    CHECK(c6.regular_degree() == 2);
    CHECK(c6.vertex_transitive);

    Graph k5 = gen_circulant(5, {1, 2});
    CHECK(k5.m() == 10);
    CHECK(k5.regular_degree() == 4);

    Graph g = gen_circulant(8, {1, 2});
    CHECK(g.m() == 16);
    CHECK(g.regular_degree() == 4);

    // offset n/2 contributes degree 1
    Graph h = gen_circulant(8, {1, 4});
    CHECK(h.regular_degree() == 3);
    CHECK(h.m() == 12);

    CHECK_THROWS(gen_circulant(6, {1, 1}));
    CHECK_THROWS(gen_circulant(6, {4}));
    CHECK_THROWS(gen_circulant(6, {}));
}

TEST_CASE("named generators") {
    Graph k4 = gen_named("complete", 4);
    CHECK(k4.m() == 6);
    CHECK(k4.regular_degree() == 3);
    Graph c4 = gen_named("cycle", 4);
    CHECK(c4.m() == 4);
    CHECK(c4.regular_degree() == 2);
    CHECK_THROWS(gen_named("cycle", 2));
    CHECK_THROWS(gen_named("torus", 4));
}

TEST_CASE("edge list io") {
    Graph path = parse_edge_list_text("4 3 vt=0\n0 1\n1 2\n2 3\n");
    CHECK(path.n == 4);
    CHECK(path.m() == 3);
    CHECK(path.edges[1] == std::make_pair(1, 2));
    CHECK_FALSE(path.vertex_transitive);

    CHECK_THROWS(parse_edge_list_text("3 1 vt=0\n2 2\n"));  // self loop
    CHECK_THROWS(parse_edge_list_text("3 1 vt=0\n0 5\n"));  // out of range

    std::string p = tmp_path("graph.txt");
    Graph g = gen_circulant(6, {1});
    save_edge_list(g, p);
    Graph back = load_edge_list(p);
    CHECK(edge_list_text(back) == edge_list_text(g));
    CHECK(back.vertex_transitive);

    // round trip is byte stable
    save_edge_list(back, p);
    std::ifstream in(p);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text == edge_list_text(g));
    std::remove(p.c_str());
}

TEST_CASE("spectral profile on knowns") {
    ExpanderProfile k4 = spectral_profile(gen_named("complete", 4));
    CHECK(k4.lambda2 == doctest::Approx(-1.0).epsilon(1e-8));
    CHECK(k4.gap == doctest::Approx(4.0).epsilon(1e-8));

    ExpanderProfile c4 = spectral_profile(gen_named("cycle", 4));
    CHECK(c4.lambda2 == doctest::Approx(0.0).epsilon(1e-8));
    CHECK(c4.gap == doctest::Approx(2.0).epsilon(1e-8));

    ExpanderProfile c6 = spectral_profile(gen_circulant(6, {1}));
    CHECK(c6.lambda2 == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(c6.gap == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(c6.lambda_abs == doctest::Approx(2.0).epsilon(1e-8));  // bipartite

    for (int n = 3; n <= 64; ++n) {
        ExpanderProfile p = spectral_profile(gen_named("complete", n));
        CHECK(std::abs(p.gap - n) < 1e-8);
    }
}

TEST_CASE("sigma2 matches the assignment matrix second singular value") {
    for (const Graph& g : fixtures()) {
        if (g.n > 64 || !is_connected(g)) continue;
        ExpanderProfile prof = spectral_profile(g);
        CHECK(std::abs(prof.sigma2_assignment * prof.sigma2_assignment -
                       (prof.d + prof.lambda2)) < 1e-8);
        Eigen::MatrixXd A = graph_scheme(g).dense();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
        double s2 = svd.singularValues()(1);
        CHECK(std::abs(prof.sigma2_assignment - s2) < 1e-6);
    }
}

TEST_CASE("mixing bound examples") {
    Graph k4 = gen_named("complete", 4);
    MixingCheck mc = mixing_check(k4, {0}, {1, 2, 3});
    CHECK(mc.lhs == doctest::Approx(3.0));
    CHECK(mc.lhs >= mc.rhs - 1e-9);

    MixingCheck empty = mixing_check(k4, {}, {1});
    CHECK(empty.lhs == 0.0);
    CHECK(empty.rhs <= 0.0);

    // C6 independent set: zero edges, bound must not exceed zero
    Graph c6 = gen_circulant(6, {1});
    MixingCheck ind = mixing_check(c6, {0, 2, 4}, {0, 2, 4});
    CHECK(ind.lhs == 0.0);
    CHECK(ind.rhs <= 1e-9);
}

TEST_CASE("mixing bound holds on random set pairs") {
    std::mt19937_64 rng(99);
    for (const Graph& g : fixtures()) {
        ExpanderProfile prof = spectral_profile(g);
        std::bernoulli_distribution coin(0.4);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<int> S, T;
            for (int v = 0; v < g.n; ++v) {
                if (coin(rng)) S.push_back(v);
                if (coin(rng)) T.push_back(v);
            }
            MixingCheck mc = mixing_check(g, S, T, prof);
            CHECK(mc.lhs >= mc.rhs - 1e-9);
        }
        if (g.n <= 10) {
            for (int u = 0; u < g.n; ++u)
                for (int v = 0; v < g.n; ++v) {
                    MixingCheck mc = mixing_check(g, {u}, {v}, prof);
                    CHECK(mc.lhs >= mc.rhs - 1e-9);
                }
        }
    }
}
