#include "gradcode/decoding.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "gradcode/util.hpp"

namespace gradcode {

std::string ComponentInfo::tag() const {
    switch (kind) {
        case Kind::NonBipartite:
            return "non_bipartite";
        case Kind::Bipartite:
            return "bipartite(" + std::to_string(left_size) + "," +
                   std::to_string(right_size) + ")";
        case Kind::Isolated:
            return "isolated";
    }
    return "?";
}

double decoding_error_sq(const std::vector<double>& alpha) {
    double total = 0.0;
    for (double a : alpha) total += (a - 1.0) * (a - 1.0);
    return total;
}

std::string Decoding::to_json(const StragglerSet& s) const {
    std::ostringstream out;
    out << "{\"stragglers\": [";
    for (std::size_t i = 0; i < s.members.size(); ++i)
        out << (i ? ", " : "") << s.members[i];
    out << "], \"w\": [";
    for (std::size_t i = 0; i < w.size(); ++i)
        out << (i ? ", " : "") << format_double(w[i]);
    out << "], \"alpha\": [";
    for (std::size_t i = 0; i < alpha.size(); ++i)
        out << (i ? ", " : "") << format_double(alpha[i]);
    out << "], \"components\": [";
    for (std::size_t i = 0; i < components.size(); ++i)
        out << (i ? ", " : "") << '"' << components[i].tag() << '"';
    out << "]}";
    return out.str();
}

Decoding decode_optimal_graph(const Graph& g, const StragglerSet& s) {
    const int n = g.n;
    const int m = g.m();
    if (s.m != m) throw std::runtime_error("decode_optimal_graph: straggler set size mismatch");

    Decoding dec;
    dec.w.assign(m, 0.0);
    dec.alpha.assign(n, 0.0);
    long long& work = dec.work_counter;

    std::vector<char> straggles(m, 0);
    for (int j : s.members) straggles[j] = 1;

    // Adjacency over surviving edges only.
    std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, edge id)
    for (int j = 0; j < m; ++j) {
        if (straggles[j]) continue;
        auto [u, v] = g.edges[j];
        adj[u].emplace_back(v, j);
        adj[v].emplace_back(u, j);
        ++work;
    }

    std::vector<int> color(n, -1);      // 2-coloring within component
    std::vector<int> comp_of(n, -1);
    std::vector<int> parent_edge(n, -1);
    std::vector<int> parent(n, -1);
    std::vector<int> order;             // BFS order per component
    order.reserve(n);

    for (int root = 0; root < n; ++root) {
        if (comp_of[root] >= 0) continue;
        ++work;
        if (adj[root].empty()) {
            comp_of[root] = static_cast<int>(dec.components.size());
            ComponentInfo info;
            info.kind = ComponentInfo::Kind::Isolated;
            info.size = 1;
            dec.components.push_back(info);
            dec.alpha[root] = 0.0;
            continue;
        }

        const int comp_id = static_cast<int>(dec.components.size());
        order.clear();
        color[root] = 0;
        comp_of[root] = comp_id;
        parent[root] = -1;
        parent_edge[root] = -1;
        order.push_back(root);
        int odd_edge = -1;  // non-tree edge joining same-colored endpoints
        int side_count[2] = {1, 0};
        std::size_t head = 0;
        while (head < order.size()) {
            int u = order[head++];
            ++work;
            for (auto [v, e] : adj[u]) {
                ++work;
                if (comp_of[v] < 0) {
                    comp_of[v] = comp_id;
                    color[v] = 1 - color[u];
                    ++side_count[color[v]];
                    parent[v] = u;
                    parent_edge[v] = e;
                    order.push_back(v);
                } else if (e != parent_edge[u] && color[v] == color[u] && odd_edge < 0) {
                    odd_edge = e;
                }
            }
        }

        ComponentInfo info;
        info.size = static_cast<int>(order.size());
        if (odd_edge >= 0) {
            info.kind = ComponentInfo::Kind::NonBipartite;
            for (int v : order) dec.alpha[v] = 1.0;
        } else {
            info.kind = ComponentInfo::Kind::Bipartite;
            int big = side_count[0] >= side_count[1] ? 0 : 1;
            info.left_size = side_count[big];
            info.right_size = side_count[1 - big];
            // t = (|L| - |R|) / (|L| + |R|); numerator and denominator are
            // small integers, so every alpha in the component shares one
            // exactly-rounded value and alpha_u + alpha_v == 2 bit-exactly.
            double t = static_cast<double>(info.left_size - info.right_size) /
                       static_cast<double>(info.left_size + info.right_size);
            for (int v : order) dec.alpha[v] = color[v] == big ? 1.0 - t : 1.0 + t;
        }
        dec.components.push_back(info);

        // Edge weights: leaf-upward back-substitution over the BFS tree.
        // A non-tree odd edge, if present, carries the free parameter x; the
        // root residual is linear in x, so two sweeps pin it down.
        auto sweep = [&](double x, bool commit) -> double {
            std::vector<double> incident(order.size(), 0.0);
            static thread_local std::vector<int> order_pos;
            if (static_cast<int>(order_pos.size()) < n) order_pos.assign(n, -1);
            for (std::size_t i = 0; i < order.size(); ++i) order_pos[order[i]] = static_cast<int>(i);
            if (odd_edge >= 0 && x != 0.0) {
                auto [a, b] = g.edges[odd_edge];
                incident[order_pos[a]] += x;
                incident[order_pos[b]] += x;
            }
            std::vector<double> tree_w(order.size(), 0.0);
            for (std::size_t i = order.size(); i-- > 1;) {
                int v = order[i];
                ++work;
                double wv = dec.alpha[v] - incident[i];
                tree_w[i] = wv;
                incident[order_pos[parent[v]]] += wv;
            }
            double residual = dec.alpha[order[0]] - incident[0];
            if (commit) {
                for (std::size_t i = 1; i < order.size(); ++i)
                    dec.w[parent_edge[order[i]]] = tree_w[i];
                if (odd_edge >= 0) dec.w[odd_edge] = x;
            }
            return residual;
        };

        if (odd_edge < 0) {
            sweep(0.0, true);
        } else {
            double r0 = sweep(0.0, false);
            double r1 = sweep(1.0, false);
            double x = (r1 == r0) ? 0.0 : r0 / (r0 - r1);
            sweep(x, true);
        }
    }
    return dec;
}

std::vector<double> decode_oracle(const AssignmentScheme& a, const StragglerSet& s) {
    if (a.n_blocks > 2048) throw std::runtime_error("decode_oracle: n exceeds dense budget");
    if (s.m != a.m) throw std::runtime_error("decode_oracle: straggler set size mismatch");
    std::vector<char> straggles(a.m, 0);
    for (int j : s.members) straggles[j] = 1;
    std::vector<int> surviving;
    for (int j = 0; j < a.m; ++j)
        if (!straggles[j]) surviving.push_back(j);
    std::vector<double> alpha(a.n_blocks, 0.0);
    if (surviving.empty()) return alpha;

    Eigen::MatrixXd ap = Eigen::MatrixXd::Zero(a.n_blocks, surviving.size());
    for (std::size_t c = 0; c < surviving.size(); ++c)
        for (auto [i, val] : a.columns[surviving[c]]) ap(i, static_cast<int>(c)) += val;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ap, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    double cutoff = sv.size() ? 1e-10 * sv[0] : 0.0;
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv[i] > cutoff) ++rank;
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(a.n_blocks);
    Eigen::MatrixXd u = svd.matrixU().leftCols(rank);
    Eigen::VectorXd proj = u * (u.transpose() * ones);
    for (int i = 0; i < a.n_blocks; ++i) alpha[i] = proj[i];
    return alpha;
}

namespace {
Decoding fixed_like(const AssignmentScheme& a, const StragglerSet& s, double w_off) {
    Decoding dec;
    dec.w.assign(a.m, w_off);
    for (int j : s.members) dec.w[j] = 0.0;
    dec.alpha.assign(a.n_blocks, 0.0);
    for (int j = 0; j < a.m; ++j) {
        if (dec.w[j] == 0.0) continue;
        for (auto [i, val] : a.columns[j]) dec.alpha[i] += val * dec.w[j];
    }
    return dec;
}
}  // namespace

Decoding decode_fixed(const AssignmentScheme& a, const StragglerSet& s, double p) {
    if (!(p < 1.0)) throw std::runtime_error("decode_fixed: need p < 1");
    double d = a.replication_factor();
    return fixed_like(a, s, 1.0 / (d * (1.0 - p)));
}

Decoding decode_fixed_adversarial(const AssignmentScheme& a, const StragglerSet& s) {
    int alive = a.m - static_cast<int>(s.members.size());
    if (alive <= 0) throw std::runtime_error("decode_fixed_adversarial: all machines straggle");
    double d = a.replication_factor();
    return fixed_like(a, s, static_cast<double>(a.m) / (d * alive));
}

}  // namespace gradcode
