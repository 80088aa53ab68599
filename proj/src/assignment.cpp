#include "gradcode/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gradcode/util.hpp"

namespace gradcode {

double AssignmentScheme::replication_factor() const {
    return n_blocks == 0 ? 0.0 : static_cast<double>(nnz()) / n_blocks;
}

int AssignmentScheme::load() const {
    std::size_t best = 0;
    for (const auto& col : columns) best = std::max(best, col.size());
    return static_cast<int>(best);
}

long long AssignmentScheme::nnz() const {
    long long total = 0;
    for (const auto& col : columns) total += static_cast<long long>(col.size());
    return total;
}

Eigen::MatrixXd AssignmentScheme::dense() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_blocks, m);
    for (int j = 0; j < m; ++j)
        for (auto [i, val] : columns[j]) a(i, j) += val;
    return a;
}

std::vector<double> AssignmentScheme::row_sums() const {
    std::vector<double> sums(n_blocks, 0.0);
    for (const auto& col : columns)
        for (auto [i, val] : col) sums[i] += val;
    return sums;
}

AssignmentScheme graph_scheme(const Graph& g) {
    AssignmentScheme a;
    a.n_blocks = g.n;
    a.m = g.m();
    a.kind = "graph";
    a.graph = g;
    a.vertex_transitive = g.vertex_transitive;
    a.columns.resize(a.m);
    for (int j = 0; j < a.m; ++j) {
        a.columns[j] = {{g.edges[j].first, 1.0}, {g.edges[j].second, 1.0}};
        std::sort(a.columns[j].begin(), a.columns[j].end());
    }
    return a;
}

AssignmentScheme frc_scheme(int n_blocks, int m, int d) {
    if (d < 1 || m < 1 || n_blocks < 1) throw std::runtime_error("frc_scheme: bad sizes");
    if (m % d != 0) throw std::runtime_error("frc_scheme: m must be divisible by d");
    int groups = m / d;
    if (n_blocks % groups != 0)
        throw std::runtime_error("frc_scheme: n_blocks must be divisible by m/d");
    int blocks_per_group = n_blocks / groups;
    AssignmentScheme a;
    a.n_blocks = n_blocks;
    a.m = m;
    a.kind = "frc";
    a.vertex_transitive = false;
    a.columns.resize(m);
    for (int j = 0; j < m; ++j) {
        int group = j / d;
        for (int b = 0; b < blocks_per_group; ++b)
            a.columns[j].emplace_back(group * blocks_per_group + b, 1.0);
    }
    return a;
}

AssignmentScheme adjacency_scheme(const Graph& g) {
    if (!g.is_regular()) throw std::runtime_error("adjacency_scheme: graph not regular");
    AssignmentScheme a;
    a.n_blocks = g.n;
    a.m = g.n;  // machine per vertex
    a.kind = "adjacency";
    a.graph = g;
    a.vertex_transitive = g.vertex_transitive;
    a.columns.resize(g.n);
    for (auto [u, v] : g.edges) {
        a.columns[u].emplace_back(v, 1.0);
        a.columns[v].emplace_back(u, 1.0);
    }
    for (auto& col : a.columns) std::sort(col.begin(), col.end());
    return a;
}

AssignmentScheme debias(const AssignmentScheme& a, const std::vector<double>& mean_alpha,
                        double eps) {
    const int N = a.n_blocks;
    if (static_cast<int>(mean_alpha.size()) != N)
        throw std::runtime_error("debias: mean_alpha size mismatch");
    if (!(eps >= 0.0 && eps < 0.5)) throw std::runtime_error("debias: need eps in [0, 1/2)");
    const double delta = 1.0 - std::sqrt(2.0 * eps);
    std::vector<int> kept;
    for (int i = 0; i < N; ++i)
        if (mean_alpha[i] >= delta) kept.push_back(i);
    if (2 * static_cast<int>(kept.size()) < N)
        throw std::runtime_error("debias: kept set has " + std::to_string(kept.size()) +
                                 " rows, fewer than N/2 = " + std::to_string(N / 2.0));
    for (int i : kept)
        if (!(mean_alpha[i] > 0.0))
            throw std::runtime_error("debias: nonpositive mean_alpha on kept row");

    // Rows of the output: the |S| rescaled kept rows, then the first N - |S|
    // of them repeated, so the row count is unchanged.
    const int s = static_cast<int>(kept.size());
    const int t = N - s;
    AssignmentScheme out;
    out.n_blocks = N;
    out.m = a.m;
    out.kind = "debias-wrapped";
    out.vertex_transitive = false;
    out.columns.resize(a.m);
    std::vector<int> new_row_of(N, -1);  // original kept row -> new primary row
    for (int r = 0; r < s; ++r) new_row_of[kept[r]] = r;
    for (int j = 0; j < a.m; ++j) {
        for (auto [i, val] : a.columns[j]) {
            int r = new_row_of[i];
            if (r < 0) continue;  // dropped row
            double scaled = val / mean_alpha[i];
            out.columns[j].emplace_back(r, scaled);
            if (r < t) out.columns[j].emplace_back(s + r, scaled);
        }
        std::sort(out.columns[j].begin(), out.columns[j].end());
    }
    return out;
}

BlockPartition partition_blocks(long long N, int n_blocks) {
    if (n_blocks < 1) throw std::runtime_error("partition_blocks: n_blocks must be >= 1");
    if (N % n_blocks != 0)
        throw std::runtime_error("partition_blocks: N not divisible by n_blocks");
    BlockPartition p;
    p.N = N;
    p.n_blocks = n_blocks;
    long long size = N / n_blocks;
    for (int b = 0; b < n_blocks; ++b) p.ranges.emplace_back(b * size, (b + 1) * size);
    return p;
}

std::string scheme_text(const AssignmentScheme& a) {
    std::ostringstream out;
    out << a.n_blocks << ' ' << a.m << ' ' << a.kind << ' '
        << format_double(a.replication_factor()) << ' ' << (a.vertex_transitive ? 1 : 0)
        << '\n';
    for (int j = 0; j < a.m; ++j) {
        out << j << ':';
        for (auto [i, val] : a.columns[j]) out << " (" << i << ',' << format_double(val) << ')';
        out << '\n';
    }
    return out.str();
}

AssignmentScheme parse_scheme_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("scheme: empty file");
    AssignmentScheme a;
    {
        std::istringstream head(line);
        double d;
        int vt;
        if (!(head >> a.n_blocks >> a.m >> a.kind >> d >> vt))
            throw std::runtime_error("scheme: bad header");
        a.vertex_transitive = vt != 0;
    }
    a.columns.resize(a.m);
    for (int j = 0; j < a.m; ++j) {
        if (!std::getline(in, line)) throw std::runtime_error("scheme: unexpected EOF");
        std::istringstream row(line);
        int col;
        char c;
        if (!(row >> col >> c) || c != ':' || col != j)
            throw std::runtime_error("scheme: bad column line " + std::to_string(j));
        char open, comma, close;
        int i;
        double val;
        while (row >> open >> i >> comma >> val >> close) {
            if (open != '(' || comma != ',' || close != ')')
                throw std::runtime_error("scheme: bad entry in column " + std::to_string(j));
            a.columns[j].emplace_back(i, val);
        }
    }
    if (a.kind == "graph") {
        // graph columns are edge endpoints, so the backing graph is recoverable
        Graph g;
        g.n = a.n_blocks;
        g.vertex_transitive = a.vertex_transitive;
        g.degree.assign(g.n, 0);
        for (const auto& col : a.columns) {
            if (col.size() != 2 || col[0].second != 1.0 || col[1].second != 1.0)
                throw std::runtime_error("scheme: graph kind with non-edge column");
            g.edges.emplace_back(col[0].first, col[1].first);
            g.degree[col[0].first]++;
            g.degree[col[1].first]++;
        }
        a.graph = std::move(g);
    }
    return a;
}

void save_scheme(const AssignmentScheme& a, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << scheme_text(a);
}

AssignmentScheme load_scheme(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scheme_text(buf.str());
}

std::uint64_t scheme_hash(const AssignmentScheme& a) { return fnv1a(scheme_text(a)); }

}  // namespace gradcode
