#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gradcode/graph.hpp"

namespace gradcode {

/// Blocks-to-machines assignment, stored column-sparse (one entry list per
/// machine). Row i / column j nonzero means machine j holds block i.
struct AssignmentScheme {
    int n_blocks = 0;
    int m = 0;
    std::string kind;  // graph | frc | adjacency | uncoded | debias-wrapped
    std::vector<std::vector<std::pair<int, double>>> columns;
    std::optional<Graph> graph;  // backing graph for graph/adjacency kinds
    bool vertex_transitive = false;

    double replication_factor() const;  // nnz / n_blocks
    int load() const;                   // max nonzeros per column
    long long nnz() const;
    Eigen::MatrixXd dense() const;
    std::vector<double> row_sums() const;
};

AssignmentScheme graph_scheme(const Graph& g);
AssignmentScheme frc_scheme(int n_blocks, int m, int d);
AssignmentScheme adjacency_scheme(const Graph& g);

AssignmentScheme debias(const AssignmentScheme& a, const std::vector<double>& mean_alpha,
                        double eps);

struct BlockPartition {
    long long N = 0;
    int n_blocks = 0;
    std::vector<std::pair<long long, long long>> ranges;  // [begin, end)
};
BlockPartition partition_blocks(long long N, int n_blocks);

std::string scheme_text(const AssignmentScheme& a);
AssignmentScheme parse_scheme_text(const std::string& text);
void save_scheme(const AssignmentScheme& a, const std::string& path);
AssignmentScheme load_scheme(const std::string& path);
std::uint64_t scheme_hash(const AssignmentScheme& a);

}  // namespace gradcode
