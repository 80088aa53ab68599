#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gradcode/assignment.hpp"
#include "gradcode/graph.hpp"

namespace gradcode {

struct StragglerSet {
    int m = 0;
    std::vector<int> members;  // sorted, deduplicated
    std::string provenance;    // e.g. "iid(0.2)", "fixed_count(4)", "adversarial(exhaustive)"

    bool contains(int j) const;
    std::string to_json() const;
};

StragglerSet make_straggler_set(int m, std::vector<int> members, std::string provenance);
StragglerSet straggler_set_from_json(const std::string& json_text);

StragglerSet sample_iid(int m, double p, std::uint64_t seed);
StragglerSet sample_fixed_count(int m, int s, std::uint64_t seed);

/// Error functional for adversarial search: |alpha - 1|_2^2 under some decoder.
using DecoderErrorFn = std::function<double(const StragglerSet&)>;

struct AdversarialResult {
    StragglerSet set;
    double worst_error = 0.0;
    long long evaluated = 0;
};

/// Exact maximizer over all subsets of size <= s. Throws if the enumeration
/// budget (1e7 subsets) would be exceeded.
AdversarialResult adversarial_exhaustive(const AssignmentScheme& scheme, int s,
                                         const DecoderErrorFn& decoder_error);

/// Isolation greedy plus hill-climb refinement, graph schemes only.
StragglerSet adversarial_greedy(const Graph& g, int s);

}  // namespace gradcode
