#include "gradcode/stragglers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "gradcode/decoding.hpp"
#include "gradcode/util.hpp"

namespace gradcode {

bool StragglerSet::contains(int j) const {
    return std::binary_search(members.begin(), members.end(), j);
}

std::string StragglerSet::to_json() const {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < members.size(); ++i) out << (i ? ", " : "") << members[i];
    out << ']';
    return out.str();
}

StragglerSet make_straggler_set(int m, std::vector<int> members, std::string provenance) {
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    for (int j : members)
        if (j < 0 || j >= m) throw std::runtime_error("straggler index out of range");
    return {m, std::move(members), std::move(provenance)};
}

StragglerSet straggler_set_from_json(const std::string& json_text) {
    std::vector<int> members;
    std::istringstream in(json_text);
    char c;
    if (!(in >> c) || c != '[') throw std::runtime_error("straggler set: expected '['");
    int v;
    while (in >> v) {
        members.push_back(v);
        in >> c;
        if (c == ']') break;
        if (c != ',') throw std::runtime_error("straggler set: expected ','");
    }
    int m = members.empty() ? 0 : *std::max_element(members.begin(), members.end()) + 1;
    return make_straggler_set(m, std::move(members), "replayed");
}

StragglerSet sample_iid(int m, double p, std::uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::runtime_error("sample_iid: p out of [0,1]");
    auto rng = make_rng(seed, 0x51D);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<int> members;
    for (int j = 0; j < m; ++j)
        if (unif(rng) < p) members.push_back(j);
    return {m, std::move(members), "iid(" + format_double(p) + ")"};
}

StragglerSet sample_fixed_count(int m, int s, std::uint64_t seed) {
    if (s < 0 || s > m) throw std::runtime_error("sample_fixed_count: need 0 <= s <= m");
    auto rng = make_rng(seed, 0xF1C);
    std::vector<int> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < s; ++i) {
        std::uniform_int_distribution<int> dist(i, m - 1);
        std::swap(idx[i], idx[dist(rng)]);
    }
    std::vector<int> members(idx.begin(), idx.begin() + s);
    std::sort(members.begin(), members.end());
    return {m, std::move(members), "fixed_count(" + std::to_string(s) + ")"};
}

namespace {

long long subsets_up_to(int m, int s) {
    long long total = 0;
    long long binom = 1;  // C(m, 0)
    for (int k = 0; k <= s; ++k) {
        total += binom;
        if (total > 20'000'000) return total;
        binom = binom * (m - k) / (k + 1);
    }
    return total;
}

}  // namespace

AdversarialResult adversarial_exhaustive(const AssignmentScheme& scheme, int s,
                                         const DecoderErrorFn& decoder_error) {
    const int m = scheme.m;
    if (s < 0 || s > m) throw std::runtime_error("adversarial_exhaustive: bad s");
    if (subsets_up_to(m, s) > 10'000'000)
        throw std::runtime_error(
            "adversarial_exhaustive: subset budget of 1e7 exceeded; use adversarial_greedy");

    AdversarialResult best;
    best.set = make_straggler_set(m, {}, "adversarial(exhaustive)");
    best.worst_error = decoder_error(best.set);
    best.evaluated = 1;

    std::vector<int> comb;
    for (int k = 1; k <= s; ++k) {
        comb.resize(k);
        std::iota(comb.begin(), comb.end(), 0);
        for (;;) {
            StragglerSet set{m, comb, "adversarial(exhaustive)"};
            double err = decoder_error(set);
            ++best.evaluated;
            // strict improvement keeps the lexicographically smallest maximizer,
            // since enumeration is in lexicographic order within each size and
            // sizes are scanned smallest first
            if (err > best.worst_error + 1e-15) {
                best.worst_error = err;
                best.set = set;
            }
            int i = k - 1;
            while (i >= 0 && comb[i] == m - k + i) --i;
            if (i < 0) break;
            ++comb[i];
            for (int j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
        }
    }
    return best;
}

StragglerSet adversarial_greedy(const Graph& g, int s) {
    const int m = g.m();
    if (s < 0 || s > m) throw std::runtime_error("adversarial_greedy: bad s");
    const int d = g.regular_degree();
    auto inc = g.incidence();

    std::vector<char> chosen(m, 0);
    int used = 0;
    if (d > 0) {
        int isolatable = s / d;
        int isolated = 0;
        for (int v = 0; v < g.n && isolated < isolatable; ++v) {
            bool free_vertex = true;
            for (int e : inc[v])
                if (chosen[e]) { free_vertex = false; break; }
            if (!free_vertex || static_cast<int>(inc[v].size()) != d) continue;
            for (int e : inc[v]) chosen[e] = 1;
            used += d;
            ++isolated;
        }
    }
    for (int e = 0; e < m && used < s; ++e)
        if (!chosen[e]) {
            chosen[e] = 1;
            ++used;
        }

    auto error_of = [&](const std::vector<char>& mask) {
        std::vector<int> members;
        for (int e = 0; e < m; ++e)
            if (mask[e]) members.push_back(e);
        StragglerSet set{m, std::move(members), "adversarial(greedy)"};
        return decoding_error_sq(decode_optimal_graph(g, set).alpha);
    };

    double current = error_of(chosen);
    for (int pass = 0; pass < 50; ++pass) {
        bool improved = false;
        for (int out = 0; out < m; ++out) {
            if (!chosen[out]) continue;
            for (int in = 0; in < m; ++in) {
                if (chosen[in]) continue;
                chosen[out] = 0;
                chosen[in] = 1;
                double candidate = error_of(chosen);
                if (candidate > current + 1e-12) {
                    current = candidate;
                    improved = true;
                    break;
                }
                chosen[out] = 1;
                chosen[in] = 0;
            }
            if (improved) break;
        }
        if (!improved) break;
    }

    std::vector<int> members;
    for (int e = 0; e < m; ++e)
        if (chosen[e]) members.push_back(e);
    return {m, std::move(members), "adversarial(greedy)"};
}

}  // namespace gradcode
