#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace cisr {

// Splittable counter-style generator built on the SplitMix64 finalizer.
// Every stochastic operation in the library takes one of these (or a raw
// 64-bit seed); nothing draws from ambient global state. Streams derived
// with fork() are independent of the parent's future output, which keeps
// multi-student runs reproducible regardless of scheduling.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(mix(seed ^ 0x8f1bbcdcbfa53e0bULL)) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    // Derives an independent stream keyed by `stream`; does not advance *this.
    Rng fork(std::uint64_t stream) const {
        Rng child(0);
        child.state_ = mix(state_ ^ mix(stream + 0x632be59bd9b4e019ULL));
        return child;
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Lemire multiply-shift; deterministic, the
    // O(n / 2^64) bias is irrelevant at simulation scale.
    std::size_t next_index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normal via Box-Muller. Consumes exactly two uniforms per call
    // (no cached spare, so call sequences stay reproducible).
    double next_normal() {
        double u1 = 0.0;
        do {
            u1 = next_double();
        } while (u1 == 0.0);
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Samples an index from an (approximately) normalized weight row by CDF
    // walk. Falls back to the last positive-mass entry when rounding leaves
    // the draw past the accumulated total.
    std::size_t sample_row(const double* w, std::size_t n) {
        const double u = next_double();
        double acc = 0.0;
        std::size_t last_pos = 0;
        bool seen = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (w[i] > 0.0) {
                last_pos = i;
                seen = true;
            }
            acc += w[i];
            if (u < acc) return i;
        }
        return seen ? last_pos : n - 1;
    }

    std::size_t sample_row(const std::vector<double>& w) { return sample_row(w.data(), w.size()); }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
};

// Stable per-index seed derivation for worker pools: child i of `master` is
// the same no matter how many siblings run or in which order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return Rng(master).fork(index).next_u64();
}

}  // namespace cisr
