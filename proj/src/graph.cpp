#include "gradcode/graph.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gradcode/util.hpp"

namespace gradcode {

namespace {

void recompute_degrees(Graph& g) {
    g.degree.assign(g.n, 0);
    for (auto [u, v] : g.edges) {
        if (u == v) throw std::runtime_error("self-loop in graph");
        if (u < 0 || u >= g.n || v < 0 || v >= g.n)
            throw std::runtime_error("edge endpoint out of range");
        g.degree[u]++;
        g.degree[v]++;
    }
}

}  // namespace

bool Graph::is_regular() const { return regular_degree() >= 0; }

int Graph::regular_degree() const {
    if (n == 0 || degree.empty()) return -1;
    int d = degree[0];
    for (int x : degree)
        if (x != d) return -1;
    return d;
}

std::vector<std::vector<int>> Graph::incidence() const {
    std::vector<std::vector<int>> inc(n);
    for (int j = 0; j < m(); ++j) {
        inc[edges[j].first].push_back(j);
        inc[edges[j].second].push_back(j);
    }
    return inc;
}

Graph gen_random_regular(int n, int d, std::uint64_t seed) {
    if (d < 1) throw std::runtime_error("gen_random_regular: d must be >= 1");
    if (d >= n) throw std::runtime_error("gen_random_regular: need d < n");
    if ((static_cast<long long>(n) * d) % 2 != 0)
        throw std::runtime_error("gen_random_regular: n*d must be even");

    const long long budget = 10LL * n * d;
    auto rng = make_rng(seed, /*stream=*/0xC0FF);
    std::vector<int> stubs;
    stubs.reserve(static_cast<std::size_t>(n) * d);
    for (long long attempt = 0; attempt < budget; ++attempt) {
        stubs.clear();
        for (int v = 0; v < n; ++v)
            for (int k = 0; k < d; ++k) stubs.push_back(v);
        for (std::size_t i = stubs.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> dist(0, i - 1);
            std::swap(stubs[i - 1], stubs[dist(rng)]);
        }
        Graph g;
        g.n = n;
        g.vertex_transitive = false;
        std::set<std::pair<int, int>> seen;
        bool ok = true;
        for (std::size_t i = 0; i + 1 < stubs.size(); i += 2) {
            int u = stubs[i], v = stubs[i + 1];
            if (u == v) { ok = false; break; }
            auto key = std::minmax(u, v);
            if (!seen.insert({key.first, key.second}).second) { ok = false; break; }
            g.edges.emplace_back(u, v);
        }
        if (!ok) continue;
        recompute_degrees(g);
        return g;
    }
    throw std::runtime_error("gen_random_regular: rejection budget of " +
                             std::to_string(budget) + " attempts exhausted");
}

Graph gen_circulant(int n, const std::vector<int>& offsets) {
    if (offsets.empty()) throw std::runtime_error("gen_circulant: offsets empty");
    std::set<int> seen;
    for (int o : offsets) {
        if (o < 1 || o > n / 2)
            throw std::runtime_error("gen_circulant: offset " + std::to_string(o) +
                                     " out of range [1, n/2]");
        if (!seen.insert(o).second)
            throw std::runtime_error("gen_circulant: duplicate offset " + std::to_string(o));
    }
    Graph g;
    g.n = n;
    g.vertex_transitive = true;
    for (int o : offsets) {
        if (2 * o == n) {
            for (int i = 0; i < n / 2; ++i) g.edges.emplace_back(i, i + o);
        } else {
            for (int i = 0; i < n; ++i) g.edges.emplace_back(i, (i + o) % n);
        }
    }
    recompute_degrees(g);
    return g;
}

Graph gen_named(const std::string& kind, int n) {
    if (n < 3) throw std::runtime_error("gen_named: need n >= 3");
    Graph g;
    g.n = n;
    g.vertex_transitive = true;
    if (kind == "complete") {
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v) g.edges.emplace_back(u, v);
    } else if (kind == "cycle") {
        for (int i = 0; i < n; ++i) g.edges.emplace_back(i, (i + 1) % n);
    } else {
        throw std::runtime_error("gen_named: unknown kind '" + kind + "'");
    }
    recompute_degrees(g);
    return g;
}

std::string edge_list_text(const Graph& g) {
    std::ostringstream out;
    out << g.n << ' ' << g.m() << " vt=" << (g.vertex_transitive ? 1 : 0) << '\n';
    for (auto [u, v] : g.edges) out << u << ' ' << v << '\n';
    return out.str();
}

Graph parse_edge_list_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("edge list: empty file");
    Graph g;
    int m = 0;
    {
        std::istringstream head(line);
        std::string vt;
        if (!(head >> g.n >> m >> vt) || vt.rfind("vt=", 0) != 0 ||
            (vt != "vt=0" && vt != "vt=1"))
            throw std::runtime_error("edge list: bad header at line 1");
        g.vertex_transitive = (vt == "vt=1");
    }
    int lineno = 1;
    for (int j = 0; j < m; ++j) {
        if (!std::getline(in, line))
            throw std::runtime_error("edge list: unexpected EOF at line " +
                                     std::to_string(lineno + 1));
        ++lineno;
        std::istringstream row(line);
        int u, v;
        if (!(row >> u >> v))
            throw std::runtime_error("edge list: parse error at line " +
                                     std::to_string(lineno));
        if (u == v)
            throw std::runtime_error("edge list: self-loop at line " + std::to_string(lineno));
        if (u < 0 || u >= g.n || v < 0 || v >= g.n)
            throw std::runtime_error("edge list: vertex out of range at line " +
                                     std::to_string(lineno));
        g.edges.emplace_back(u, v);
    }
    recompute_degrees(g);
    return g;
}

Graph load_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_edge_list_text(buf.str());
}

void save_edge_list(const Graph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << edge_list_text(g);
}

bool is_connected(const Graph& g) {
    if (g.n == 0) return true;
    std::vector<std::vector<int>> adj(g.n);
    for (auto [u, v] : g.edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    std::vector<char> seen(g.n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int visited = 1;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int v : adj[u])
            if (!seen[v]) {
                seen[v] = 1;
                ++visited;
                stack.push_back(v);
            }
    }
    return visited == g.n;
}

namespace {

// Power iteration for the extreme eigenvalue of the adjacency matrix on the
// subspace orthogonal to the all-ones vector (valid for regular graphs).
// Shift by +dI so the spectrum is nonnegative and the top of the deflated
// spectrum is d + lambda2.
double deflated_top_shifted(const Graph& g, int d, double tol, int max_iter,
                            double* residual_out) {
    const int n = g.n;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    auto rng = make_rng(12345, 0xE16E);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < n; ++i) v[i] = gauss(rng);
    auto deflate = [&](Eigen::VectorXd& x) { x.array() -= x.mean(); };
    deflate(v);
    v.normalize();
    double value = 0.0;
    Eigen::VectorXd w(n);
    for (int it = 0; it < max_iter; ++it) {
        w.setZero();
        for (auto [a, b] : g.edges) {
            w[a] += v[b];
            w[b] += v[a];
        }
        w += static_cast<double>(d) * v;
        deflate(w);
        double norm = w.norm();
        if (norm == 0.0) { value = 0.0; break; }
        w /= norm;
        double next = norm;  // Rayleigh quotient approximation via norm growth
        if (std::abs(next - value) < tol) {
            value = next;
            v = w;
            break;
        }
        value = next;
        v = w;
    }
    // residual |(A + dI)v - value*v|
    w.setZero();
    for (auto [a, b] : g.edges) {
        w[a] += v[b];
        w[b] += v[a];
    }
    w += static_cast<double>(d) * v;
    deflate(w);
    double residual = (w - value * v).norm();
    if (residual_out) *residual_out = residual;
    return value;
}

}  // namespace

ExpanderProfile spectral_profile(const Graph& g) {
    int d = g.regular_degree();
    if (d < 0) throw std::runtime_error("spectral_profile: graph is not regular");
    if (!is_connected(g)) throw std::runtime_error("spectral_profile: graph is disconnected");
    ExpanderProfile prof;
    prof.d = d;
    if (g.n <= 4096) {
        Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(g.n, g.n);
        for (auto [u, v] : g.edges) {
            adj(u, v) += 1.0;
            adj(v, u) += 1.0;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(adj);
        if (solver.info() != Eigen::Success)
            throw std::runtime_error("spectral_profile: eigensolver failed");
        const auto& ev = solver.eigenvalues();  // ascending
        prof.lambda2 = ev[g.n - 2];
        prof.lambda_abs = std::max(std::abs(ev[0]), std::abs(ev[g.n - 2]));
    } else {
        double residual = 0.0;
        double shifted = deflated_top_shifted(g, d, 1e-10, 20000, &residual);
        if (residual > 1e-6)
            throw std::runtime_error("spectral_profile: power iteration residual " +
                                     std::to_string(residual));
        prof.lambda2 = shifted - d;
        // The most negative eigenvalue is not tracked at this scale; |lambda_n| <= d
        // always, so use d as a safe value for the one-sided mixing bound.
        prof.lambda_abs = static_cast<double>(d);
    }
    prof.gap = d - prof.lambda2;
    prof.sigma2_assignment = std::sqrt(2.0 * d - prof.gap);
    return prof;
}

MixingCheck mixing_check(const Graph& g, const std::vector<int>& S,
                         const std::vector<int>& T, const ExpanderProfile& profile) {
    std::vector<char> inS(g.n, 0), inT(g.n, 0);
    for (int v : S) inS.at(v) = 1;
    for (int v : T) inT.at(v) = 1;
    double lhs = 0.0;
    for (auto [u, v] : g.edges) {
        if (inS[u] && inT[v]) lhs += 1.0;
        if (inS[v] && inT[u]) lhs += 1.0;
    }
    const double n = g.n;
    const double s = static_cast<double>(S.size());
    const double t = static_cast<double>(T.size());
    const double d = profile.d;
    double rhs = d * s * t / n -
                 profile.lambda_abs * std::sqrt(s * t * (1.0 - s / n) * (1.0 - t / n));
    return {lhs, rhs};
}

MixingCheck mixing_check(const Graph& g, const std::vector<int>& S,
                         const std::vector<int>& T) {
    return mixing_check(g, S, T, spectral_profile(g));
}

}  // namespace gradcode
