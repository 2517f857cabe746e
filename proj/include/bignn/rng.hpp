#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace bignn {

namespace detail {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

// Deterministic random stream keyed by (master_seed, purpose, replication).
// Streams with distinct keys are statistically independent; equal keys
// reproduce the exact same sequence regardless of thread schedule, because
// the key is derived by counter-based mixing, never by consuming another
// stream's state.
class RngStream {
public:
    RngStream(uint64_t master_seed, std::string_view purpose, uint64_t replication = 0)
        : key_(derive_key(master_seed, purpose, replication)), engine_(key_) {}

    // Derives an independent child stream. Forking does not advance this
    // stream's state.
    RngStream fork(std::string_view purpose, uint64_t index = 0) const {
        return RngStream(key_, purpose, index);
    }

    uint64_t seed_key() const { return key_; }

    uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer on [lo, hi] inclusive, unbiased by rejection.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<int64_t>(engine_());  // full 64-bit range
        const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return lo + static_cast<int64_t>(x % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller; the spare value is discarded so the
    // consumed-uniform count per call is fixed.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    // First m entries of a uniform random permutation of {0, ..., n-1}.
    std::vector<int> sample_without_replacement(int n, int m) {
        std::vector<int> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        if (m > n) m = n;
        for (int i = 0; i < m; ++i) {
            const int j = static_cast<int>(uniform_int(i, n - 1));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(m);
        return pool;
    }

private:
    static uint64_t derive_key(uint64_t master, std::string_view purpose, uint64_t replication) {
        uint64_t state = master;
        state ^= detail::splitmix64(state) ^ detail::fnv1a64(purpose);
        state ^= detail::splitmix64(state) + 0x632be59bd9b4e019ULL * (replication + 1);
        return detail::splitmix64(state);
    }

    uint64_t key_;
    std::mt19937_64 engine_;
};

}  // namespace bignn
