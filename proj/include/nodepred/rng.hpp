#pragma once

// Deterministic random utilities.  Every randomized routine in the library
// takes an explicit 64-bit seed and derives an independent stream from it, so
// results never depend on call order, global state, or thread scheduling.

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace nodepred {

// splitmix64 finalizer; good avalanche, cheap, and stable across platforms.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Derive a child seed from a parent seed and one or more stream labels.
// mix_seed(seed, a, b) != mix_seed(seed, b, a) by construction.
inline std::uint64_t mix_seed(std::uint64_t seed) { return splitmix64(seed); }

template <class... Rest>
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t part, Rest... rest) {
    return mix_seed(splitmix64(seed ^ splitmix64(part)), rest...);
}

// Thin wrapper over std::mt19937_64 with unbiased, implementation-independent
// draws (std::uniform_int_distribution is not portable across standard
// libraries, so the mapping from raw bits to ranges is done by hand).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [lo, hi], both inclusive.  Lemire rejection method.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
        const std::uint64_t range =
            static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
        if (range == 0) return static_cast<std::int64_t>(next_u64());  // full 64-bit range
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * range;
        auto lo_part = static_cast<std::uint64_t>(m);
        if (lo_part < range) {
            const std::uint64_t threshold = (0 - range) % range;
            while (lo_part < threshold) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * range;
                lo_part = static_cast<std::uint64_t>(m);
            }
        }
        return lo + static_cast<std::int64_t>(m >> 64);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform_real() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Fisher-Yates shuffle using this stream.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(
                uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct elements drawn uniformly from pool, in draw order.
    template <class T>
    std::vector<T> sample_without_replacement(std::span<const T> pool, std::size_t k) {
        if (k > pool.size())
            throw std::invalid_argument("sample_without_replacement: k exceeds pool size");
        std::vector<T> work(pool.begin(), pool.end());
        std::vector<T> out;
        out.reserve(k);
        std::size_t remaining = work.size();
        for (std::size_t i = 0; i < k; ++i) {
            const auto j = static_cast<std::size_t>(
                uniform_int(0, static_cast<std::int64_t>(remaining) - 1));
            out.push_back(work[j]);
            work[j] = work[remaining - 1];
            --remaining;
        }
        return out;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace nodepred
