#include "gradcode/metrics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "gradcode/stragglers.hpp"
#include "gradcode/util.hpp"

namespace gradcode {

DecoderKind decoder_kind_from_string(const std::string& name) {
    if (name == "optimal_graph" || name == "optimal") return DecoderKind::OptimalGraph;
    if (name == "oracle") return DecoderKind::Oracle;
    if (name == "fixed") return DecoderKind::Fixed;
    throw std::runtime_error("unknown decoder '" + name + "'");
}

std::string decoder_kind_name(DecoderKind kind) {
    switch (kind) {
        case DecoderKind::OptimalGraph: return "optimal_graph";
        case DecoderKind::Oracle: return "oracle";
        case DecoderKind::Fixed: return "fixed";
    }
    return "?";
}

BoundSet bounds(double d, double p, double lambda) {
    if (!(p > 0.0 && p < 1.0)) throw std::runtime_error("bounds: need p in (0,1)");
    if (!(lambda > 0.0 && lambda <= 2.0 * d))
        throw std::runtime_error("bounds: need lambda in (0, 2d]");
    BoundSet b;
    double pd = std::pow(p, d);
    b.lb_universal = pd / (1.0 - pd);
    b.lb_fixed = p / (d * (1.0 - p));
    b.adv_upper = (2.0 * d - lambda) / (2.0 * d) * p / (1.0 - p);
    b.lb_fixed_cov = 2.0 * p / (d * (1.0 - p));
    return b;
}

std::vector<double> decode_alpha(const AssignmentScheme& scheme, DecoderKind decoder,
                                 const StragglerSet& s, double p) {
    switch (decoder) {
        case DecoderKind::OptimalGraph:
            if (!scheme.graph || scheme.kind != "graph")
                throw std::runtime_error("optimal_graph decoder needs a graph scheme");
            return decode_optimal_graph(*scheme.graph, s).alpha;
        case DecoderKind::Oracle:
            return decode_oracle(scheme, s);
        case DecoderKind::Fixed:
            return decode_fixed(scheme, s, p).alpha;
    }
    throw std::runtime_error("bad decoder");
}

namespace {

constexpr std::int64_t kBlock = 512;

// Pass-1 estimate of E[alpha]; independent seed stream from pass 2.
std::vector<double> estimate_mean_alpha(const AssignmentScheme& scheme, DecoderKind decoder,
                                        double p, long long trials, std::uint64_t seed,
                                        std::uint64_t stream, int threads,
                                        std::vector<double>* second_moment = nullptr) {
    const int n = scheme.n_blocks;
    const std::int64_t nblocks = block_count(trials, kBlock);
    std::vector<std::vector<double>> sums(nblocks), sqsums;
    if (second_moment) sqsums.resize(nblocks);
    parallel_blocks(
        trials, kBlock,
        [&](std::int64_t b, std::int64_t begin, std::int64_t end) {
            std::vector<double> acc(n, 0.0), sq(n, 0.0);
            for (std::int64_t t = begin; t < end; ++t) {
                std::seed_seq seq{seed, stream, static_cast<std::uint64_t>(t)};
                std::mt19937_64 rng(seq);
                std::uniform_real_distribution<double> unif(0.0, 1.0);
                std::vector<int> members;
                for (int j = 0; j < scheme.m; ++j)
                    if (unif(rng) < p) members.push_back(j);
                StragglerSet s{scheme.m, std::move(members), "iid"};
                auto alpha = decode_alpha(scheme, decoder, s, p);
                for (int i = 0; i < n; ++i) {
                    acc[i] += alpha[i];
                    sq[i] += alpha[i] * alpha[i];
                }
            }
            sums[b] = std::move(acc);
            if (second_moment) sqsums[b] = std::move(sq);
        },
        threads);
    std::vector<double> mean(n, 0.0);
    for (const auto& blockSum : sums)
        for (int i = 0; i < n; ++i) mean[i] += blockSum[i];
    for (int i = 0; i < n; ++i) mean[i] /= static_cast<double>(trials);
    if (second_moment) {
        second_moment->assign(n, 0.0);
        for (const auto& blockSq : sqsums)
            for (int i = 0; i < n; ++i) (*second_moment)[i] += blockSq[i];
        for (int i = 0; i < n; ++i) (*second_moment)[i] /= static_cast<double>(trials);
    }
    return mean;
}

}  // namespace

ErrorEstimate mc_error(const AssignmentScheme& scheme, DecoderKind decoder, double p,
                       long long trials, std::uint64_t seed, int threads) {
    if (trials < 100) throw std::runtime_error("mc_error: need trials >= 100");
    const int n = scheme.n_blocks;
    ErrorEstimate est;
    est.trials = trials;

    if (p == 0.0) {
        StragglerSet none{scheme.m, {}, "iid(0)"};
        auto alpha = decode_alpha(scheme, decoder, none, p);
        double c2 = 0.0;
        for (double a : alpha) c2 += a * a;
        est.normalization_constant = std::sqrt(c2 / n);
        est.raw_mean = decoding_error_sq(alpha) / n;
        double e = 0.0;
        for (double a : alpha) {
            double dlt = a / est.normalization_constant - 1.0;
            e += dlt * dlt;
        }
        est.mean = e / n;
        return est;
    }

    auto meanAlpha = estimate_mean_alpha(scheme, decoder, p, trials, seed, /*stream=*/1, threads);
    double norm2 = 0.0;
    for (double v : meanAlpha) norm2 += v * v;
    double c = std::sqrt(norm2 / n);  // |E[alpha]|_2 / |1|_2
    if (c <= 1e-6)
        throw std::runtime_error("mc_error: degenerate normalization (c <= 1e-6)");
    est.normalization_constant = c;

    // Pass 2: fresh seeds, per-trial errors summed in trial order.
    const std::int64_t nblocks = block_count(trials, kBlock);
    std::vector<double> blk_norm(nblocks, 0.0), blk_norm2(nblocks, 0.0);
    std::vector<double> blk_raw(nblocks, 0.0), blk_raw2(nblocks, 0.0);
    parallel_blocks(
        trials, kBlock,
        [&](std::int64_t b, std::int64_t begin, std::int64_t end) {
            double sn = 0.0, sn2 = 0.0, sr = 0.0, sr2 = 0.0;
            for (std::int64_t t = begin; t < end; ++t) {
                std::seed_seq seq{seed, std::uint64_t{2}, static_cast<std::uint64_t>(t)};
                std::mt19937_64 rng(seq);
                std::uniform_real_distribution<double> unif(0.0, 1.0);
                std::vector<int> members;
                for (int j = 0; j < scheme.m; ++j)
                    if (unif(rng) < p) members.push_back(j);
                StragglerSet s{scheme.m, std::move(members), "iid"};
                auto alpha = decode_alpha(scheme, decoder, s, p);
                double en = 0.0, er = 0.0;
                for (double a : alpha) {
                    double dn = a / c - 1.0;
                    double dr = a - 1.0;
                    en += dn * dn;
                    er += dr * dr;
                }
                en /= n;
                er /= n;
                sn += en;
                sn2 += en * en;
                sr += er;
                sr2 += er * er;
            }
            blk_norm[b] = sn;
            blk_norm2[b] = sn2;
            blk_raw[b] = sr;
            blk_raw2[b] = sr2;
        },
        threads);
    double sum_n = 0.0, sum_n2 = 0.0, sum_r = 0.0, sum_r2 = 0.0;
    for (std::int64_t b = 0; b < nblocks; ++b) {
        sum_n += blk_norm[b];
        sum_n2 += blk_norm2[b];
        sum_r += blk_raw[b];
        sum_r2 += blk_raw2[b];
    }
    const double tN = static_cast<double>(trials);
    est.mean = sum_n / tN;
    est.raw_mean = sum_r / tN;
    double var_n = std::max(0.0, sum_n2 / tN - est.mean * est.mean);
    double var_r = std::max(0.0, sum_r2 / tN - est.raw_mean * est.raw_mean);
    est.stderr_ = std::sqrt(var_n / tN);
    est.raw_stderr = std::sqrt(var_r / tN);
    return est;
}

namespace {

double opnorm_symmetric(const Eigen::MatrixXd& mat, double tol = 1e-8) {
    const int n = static_cast<int>(mat.rows());
    if (n == 0) return 0.0;
    auto rng = make_rng(777, 0x0B);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = gauss(rng);
    v.normalize();
    double value = 0.0;
    for (int it = 0; it < 10000; ++it) {
        Eigen::VectorXd w = mat * v;
        double norm = w.norm();
        if (norm == 0.0) return 0.0;
        w /= norm;
        if (std::abs(norm - value) < tol * std::max(1.0, norm)) return norm;
        value = norm;
        v = w;
    }
    return value;
}

}  // namespace

CovarianceEstimate covariance_opnorm(const AssignmentScheme& scheme, DecoderKind decoder,
                                     double p, long long trials, std::uint64_t seed,
                                     int threads) {
    const int n = scheme.n_blocks;
    if (n > 4096) throw std::runtime_error("covariance_opnorm: n exceeds memory budget");
    if (trials < 1000) throw std::runtime_error("covariance_opnorm: need trials >= 1000");
    CovarianceEstimate est;
    est.trials = trials;
    if (p == 0.0) return est;

    auto meanAlpha = estimate_mean_alpha(scheme, decoder, p, trials, seed, /*stream=*/1, threads);
    double norm2 = 0.0;
    for (double v : meanAlpha) norm2 += v * v;
    double c = std::sqrt(norm2 / n);
    if (c <= 1e-6)
        throw std::runtime_error("covariance_opnorm: degenerate normalization");
    est.normalization_constant = c;

    const std::int64_t nblocks = block_count(trials, kBlock);
    std::vector<Eigen::MatrixXd> accums(nblocks);
    parallel_blocks(
        trials, kBlock,
        [&](std::int64_t b, std::int64_t begin, std::int64_t end) {
            Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
            Eigen::VectorXd dev(n);
            for (std::int64_t t = begin; t < end; ++t) {
                std::seed_seq seq{seed, std::uint64_t{2}, static_cast<std::uint64_t>(t)};
                std::mt19937_64 rng(seq);
                std::uniform_real_distribution<double> unif(0.0, 1.0);
                std::vector<int> members;
                for (int j = 0; j < scheme.m; ++j)
                    if (unif(rng) < p) members.push_back(j);
                StragglerSet s{scheme.m, std::move(members), "iid"};
                auto alpha = decode_alpha(scheme, decoder, s, p);
                for (int i = 0; i < n; ++i) dev[i] = alpha[i] / c - 1.0;
                acc.noalias() += dev * dev.transpose();
            }
            accums[b] = std::move(acc);
        },
        threads);

    Eigen::MatrixXd first = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(n, n);
    const std::int64_t half = nblocks / 2;
    long long first_trials = 0;
    for (std::int64_t b = 0; b < nblocks; ++b) {
        if (b < half) {
            first += accums[b];
            first_trials += std::min<long long>(kBlock, trials - b * kBlock);
        } else {
            second += accums[b];
        }
    }
    long long second_trials = trials - first_trials;
    Eigen::MatrixXd total = (first + second) / static_cast<double>(trials);
    est.value = opnorm_symmetric(total);
    if (first_trials > 0 && second_trials > 0) {
        double v1 = opnorm_symmetric(first / static_cast<double>(first_trials));
        double v2 = opnorm_symmetric(second / static_cast<double>(second_trials));
        est.stderr_proxy = std::abs(v1 - v2) / 2.0;
    }
    return est;
}

MeanAlphaEstimate mean_alpha(const AssignmentScheme& scheme, DecoderKind decoder, double p,
                             long long trials, std::uint64_t seed, int threads) {
    if (trials < 100) throw std::runtime_error("mean_alpha: need trials >= 100");
    const int n = scheme.n_blocks;
    MeanAlphaEstimate est;
    est.trials = trials;
    std::vector<double> second;
    est.mean = estimate_mean_alpha(scheme, decoder, p, trials, seed, /*stream=*/3, threads,
                                   &second);
    est.stderr_.resize(n);
    for (int i = 0; i < n; ++i) {
        double var = std::max(0.0, second[i] - est.mean[i] * est.mean[i]);
        est.stderr_[i] = std::sqrt(var / static_cast<double>(trials));
    }
    return est;
}

}  // namespace gradcode
