#include "gradcode/util.hpp"

#include <atomic>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>

namespace gradcode {

int thread_count_from_env(int requested) {
    if (const char* env = std::getenv("GRADCODE_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    return static_cast<int>(hw > 8 ? 8 : hw);
}

void parallel_blocks(std::int64_t count, std::int64_t block_size,
                     const std::function<void(std::int64_t, std::int64_t, std::int64_t)>& body,
                     int threads) {
    if (count <= 0) return;
    const std::int64_t nblocks = block_count(count, block_size);
    int nthreads = thread_count_from_env(threads);
    if (nthreads > nblocks) nthreads = static_cast<int>(nblocks);
    if (nthreads <= 1) {
        for (std::int64_t b = 0; b < nblocks; ++b) {
            std::int64_t begin = b * block_size;
            std::int64_t end = begin + block_size < count ? begin + block_size : count;
            body(b, begin, end);
        }
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex dummy;  // guards error capture
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                std::int64_t b = next.fetch_add(1);
                if (b >= nblocks) return;
                std::int64_t begin = b * block_size;
                std::int64_t end = begin + block_size < count ? begin + block_size : count;
                try {
                    body(b, begin, end);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(dummy);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

namespace {
const char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}
}  // namespace

std::string base64_encode(const void* data, std::size_t len) {
    const auto* bytes = static_cast<const std::uint8_t*>(data);
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= len; i += 3) {
        std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back(kB64Alphabet[v & 63]);
    }
    if (i + 1 == len) {
        std::uint32_t v = bytes[i] << 16;
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back('=');
        out.push_back('=');
    } else if (i + 2 == len) {
        std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    std::uint32_t acc = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        int v = b64_value(c);
        if (v < 0) throw std::runtime_error("invalid base64 character");
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
        }
    }
    return out;
}

std::string doubles_to_b64(const std::vector<double>& v) {
    return base64_encode(v.data(), v.size() * sizeof(double));
}

std::vector<double> b64_to_doubles(const std::string& text) {
    std::vector<std::uint8_t> bytes = base64_decode(text);
    if (bytes.size() % sizeof(double) != 0)
        throw std::runtime_error("base64 payload is not a multiple of 8 bytes");
    std::vector<double> out(bytes.size() / sizeof(double));
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

std::string format_double(double x) {
    char buf[32];
    int n = std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf, buf + n);
}

}  // namespace gradcode
