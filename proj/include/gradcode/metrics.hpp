#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gradcode/assignment.hpp"
#include "gradcode/decoding.hpp"

namespace gradcode {

enum class DecoderKind { OptimalGraph, Oracle, Fixed };
DecoderKind decoder_kind_from_string(const std::string& name);
std::string decoder_kind_name(DecoderKind kind);

struct ErrorEstimate {
    double mean = 0.0;      // normalized (1/n) E |alpha/c - 1|^2
    double stderr_ = 0.0;
    long long trials = 0;
    double normalization_constant = 1.0;  // c = |E[alpha]|_2 / |1|_2
    double raw_mean = 0.0;  // (1/n) E |alpha - 1|^2
    double raw_stderr = 0.0;
};

struct BoundSet {
    double lb_universal = 0.0;   // p^d / (1 - p^d)
    double lb_fixed = 0.0;       // p / (d (1 - p))
    double adv_upper = 0.0;      // ((2d - lambda) / (2d)) * p / (1 - p)
    double lb_fixed_cov = 0.0;   // 2p / (d (1 - p))
};

BoundSet bounds(double d, double p, double lambda);

ErrorEstimate mc_error(const AssignmentScheme& scheme, DecoderKind decoder, double p,
                       long long trials, std::uint64_t seed, int threads = 0);

struct CovarianceEstimate {
    double value = 0.0;
    double stderr_proxy = 0.0;  // half-sample split discrepancy
    long long trials = 0;
    double normalization_constant = 1.0;
};

CovarianceEstimate covariance_opnorm(const AssignmentScheme& scheme, DecoderKind decoder,
                                     double p, long long trials, std::uint64_t seed,
                                     int threads = 0);

struct MeanAlphaEstimate {
    std::vector<double> mean;
    std::vector<double> stderr_;
    long long trials = 0;
};

MeanAlphaEstimate mean_alpha(const AssignmentScheme& scheme, DecoderKind decoder, double p,
                             long long trials, std::uint64_t seed, int threads = 0);

/// One decode under the chosen decoder; alpha only.
std::vector<double> decode_alpha(const AssignmentScheme& scheme, DecoderKind decoder,
                                 const StragglerSet& s, double p);

}  // namespace gradcode
