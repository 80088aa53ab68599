#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gradcode {

// RNG seeded from a (seed, stream, index) triple so that results are
// reproducible and independent of how trials are spread across threads.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0,
                                std::uint64_t index = 0) {
    std::seed_seq seq{seed, stream, index};
    return std::mt19937_64(seq);
}

int thread_count_from_env(int requested = 0);

// Runs body(block_index) over fixed-size blocks of [0, count) on a pool of
// workers. Blocks are a static partition, so per-block results can be reduced
// in block order afterwards and the outcome never depends on the pool size.
void parallel_blocks(std::int64_t count, std::int64_t block_size,
                     const std::function<void(std::int64_t block, std::int64_t begin,
                                              std::int64_t end)>& body,
                     int threads = 0);

inline std::int64_t block_count(std::int64_t count, std::int64_t block_size) {
    return (count + block_size - 1) / block_size;
}

std::string base64_encode(const void* data, std::size_t len);
std::vector<std::uint8_t> base64_decode(const std::string& text);

std::string doubles_to_b64(const std::vector<double>& v);
std::vector<double> b64_to_doubles(const std::string& text);

// FNV-1a, used to fingerprint schemes/configs in sidecars and handshakes.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string format_double(double x);

}  // namespace gradcode
