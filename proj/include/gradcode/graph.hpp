#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace gradcode {

/// Simple undirected graph. Vertices are data blocks, edges are machines;
/// edge order is canonical (construction order) so that machine j is edges[j].
struct Graph {
    int n = 0;
    std::vector<std::pair<int, int>> edges;
    std::vector<int> degree;
    bool vertex_transitive = false;

    int m() const { return static_cast<int>(edges.size()); }
    bool is_regular() const;
    int regular_degree() const;  // -1 if not regular
    std::vector<std::vector<int>> incidence() const;  // vertex -> incident edge ids
};

struct ExpanderProfile {
    int d = 0;
    double lambda2 = 0.0;      // second-largest adjacency eigenvalue (signed)
    double gap = 0.0;          // d - lambda2
    double sigma2_assignment = 0.0;  // sqrt(2d - gap) = sqrt(d + lambda2)
    double lambda_abs = 0.0;   // max_{i>=2} |lambda_i|, used by the mixing bound
};

Graph gen_random_regular(int n, int d, std::uint64_t seed);
Graph gen_circulant(int n, const std::vector<int>& offsets);
Graph gen_named(const std::string& kind, int n);  // "complete" or "cycle"

Graph load_edge_list(const std::string& path);
void save_edge_list(const Graph& g, const std::string& path);
std::string edge_list_text(const Graph& g);
Graph parse_edge_list_text(const std::string& text);

ExpanderProfile spectral_profile(const Graph& g);

struct MixingCheck {
    double lhs = 0.0;  // directed edge count between S and T
    double rhs = 0.0;  // expander mixing lower bound
};
MixingCheck mixing_check(const Graph& g, const std::vector<int>& S,
                         const std::vector<int>& T);
MixingCheck mixing_check(const Graph& g, const std::vector<int>& S,
                         const std::vector<int>& T, const ExpanderProfile& profile);

bool is_connected(const Graph& g);

}  // namespace gradcode
