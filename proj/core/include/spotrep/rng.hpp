#pragma once

#include "spotrep/errors.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace spotrep {

/// Deterministic random source keyed by a 64-bit seed plus a named stream.
/// Every consumer owns its own stream (augmentation, k-means seeding,
/// parameter init, synthesis), so adding draws in one place never perturbs
/// another. Identical (seed, stream) pairs replay identical sequences
/// across runs.
///
/// The generator is splitmix64 over a state derived from the seed and an
/// FNV-1a hash of the stream label; no standard-library distributions are
/// used so the byte stream is fully pinned by this file.
class SeededRng {
public:
    SeededRng(std::uint64_t seed, std::string stream)
        : seed_(seed), stream_(std::move(stream)) {
        std::uint64_t h = 1469598103934665603ULL; // FNV-1a offset basis
        for (unsigned char ch : stream_) {
            h ^= ch;
            h *= 1099511628211ULL;
        }
        state_ = mix(seed_ ^ h);
    }

    std::uint64_t seed() const noexcept { return seed_; }
    const std::string& stream() const noexcept { return stream_; }

    /// Child generator on stream "parent/suffix"; independent of this one.
    SeededRng fork(std::string_view suffix) const {
        return SeededRng(seed_, stream_ + "/" + std::string(suffix));
    }

    std::uint64_t nextU64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    double nextUniform01() { return static_cast<double>(nextU64() >> 11) * 0x1.0p-53; }

    double nextUniform(double lo, double hi) { return lo + (hi - lo) * nextUniform01(); }

    /// Unbiased integer in [0, n) via rejection.
    std::uint64_t nextBelow(std::uint64_t n) {
        if (n == 0) throw ParamError("nextBelow: n must be positive");
        const std::uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            const std::uint64_t x = nextU64();
            if (x >= threshold) return x % n;
        }
    }

    /// Standard normal via Box-Muller (one value per call; two uniforms drawn).
    double nextNormal() {
        const double u1 = 1.0 - nextUniform01(); // (0, 1]
        const double u2 = nextUniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    /// Poisson count by Knuth's product method, chunked so large rates do
    /// not underflow exp(-rate).
    std::uint64_t nextPoisson(double rate) {
        if (!(rate >= 0.0)) throw ParamError("nextPoisson: rate must be nonnegative");
        std::uint64_t total = 0;
        while (rate > 30.0) {
            total += poissonKnuth(30.0);
            rate -= 30.0;
        }
        return total + poissonKnuth(rate);
    }

    /// Index drawn proportionally to nonnegative weights; a zero total falls
    /// back to a uniform pick.
    std::size_t nextIndexWeighted(std::span<const double> weights) {
        if (weights.empty()) throw ParamError("nextIndexWeighted: empty weights");
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) return static_cast<std::size_t>(nextBelow(weights.size()));
        double u = nextUniform01() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            u -= weights[i];
            if (u < 0.0) return i;
        }
        return weights.size() - 1;
    }

private:
    static constexpr double kPi = 3.14159265358979323846;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t poissonKnuth(double rate) {
        const double limit = std::exp(-rate);
        std::uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= nextUniform01();
        } while (p > limit);
        return k - 1;
    }

    std::uint64_t seed_;
    std::string stream_;
    std::uint64_t state_;
};

} // namespace spotrep
