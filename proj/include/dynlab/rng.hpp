#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

// Deterministic seeded randomness. Every stochastic routine takes an explicit
// seed and derives named substreams from it; nothing reads entropy from the
// environment.

namespace dynlab {

inline uint64_t splitmix64(uint64_t& s) {
    uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// xoshiro256** seeded through splitmix64
class Rng {
  public:
    explicit Rng(uint64_t seed) {
        uint64_t s = seed;
        for (auto& w : st_) w = splitmix64(s);
    }

    uint64_t next_u64() {
        uint64_t result = rotl(st_[1] * 5, 7) * 9;
        uint64_t t = st_[1] << 17;
        st_[2] ^= st_[0];
        st_[3] ^= st_[1];
        st_[1] ^= st_[2];
        st_[0] ^= st_[3];
        st_[2] ^= t;
        st_[3] = rotl(st_[3], 45);
        return result;
    }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // substream derivation: deterministic, order-independent
    Rng substream(std::string_view name, uint64_t index = 0) const {
        uint64_t h = fnv1a(name) ^ (0x9e3779b97f4a7c15ULL * (index + 1));
        uint64_t mix = st_[0] ^ rotl(st_[2], 13) ^ h;
        return Rng(mix);
    }

    // uniform point in the unit ball of R^d (rejection; d <= 7 here)
    std::vector<double> unit_ball(int d) {
        std::vector<double> p(d);
        while (true) {
            double r2 = 0;
            for (int i = 0; i < d; ++i) {
                p[i] = uniform(-1.0, 1.0);
                r2 += p[i] * p[i];
            }
            if (r2 <= 1.0) return p;
        }
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t st_[4];
};

} // namespace dynlab
