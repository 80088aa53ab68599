#pragma once

#include <string>
#include <vector>

#include "gradcode/assignment.hpp"
#include "gradcode/graph.hpp"
#include "gradcode/stragglers.hpp"

namespace gradcode {

struct ComponentInfo {
    enum class Kind { NonBipartite, Bipartite, Isolated };
    Kind kind = Kind::Isolated;
    int size = 0;
    int left_size = 0;   // bipartite only, left >= right
    int right_size = 0;  // bipartite only

    std::string tag() const;
};

struct Decoding {
    std::vector<double> w;      // length m, zero on stragglers
    std::vector<double> alpha;  // length n, alpha = A w
    std::vector<ComponentInfo> components;
    long long work_counter = 0;  // vertex/edge visits, for the O(n+m) contract

    std::string to_json(const StragglerSet& s) const;
};

/// Linear-time optimal decoder for graph schemes: BFS components + two
/// coloring, DFS spanning-tree back-substitution for the edge weights.
Decoding decode_optimal_graph(const Graph& g, const StragglerSet& s);

/// Projection of the all-ones vector onto the surviving column space via an
/// SVD pseudoinverse. Works for any scheme, dense, n <= 2048.
std::vector<double> decode_oracle(const AssignmentScheme& a, const StragglerSet& s);

/// Fixed decoding w_j = 1 / (d (1 - p)) off the straggler set.
Decoding decode_fixed(const AssignmentScheme& a, const StragglerSet& s, double p);

/// Fixed adversarial decoding w_j = m / (d (m - |S|)) off the straggler set.
Decoding decode_fixed_adversarial(const AssignmentScheme& a, const StragglerSet& s);

double decoding_error_sq(const std::vector<double>& alpha);  // |alpha - 1|_2^2

}  // namespace gradcode
