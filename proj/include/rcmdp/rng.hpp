#pragma once

#include <cstdint>
#include <stdexcept>

#include <Eigen/Dense>

namespace rcmdp {

/// What a random stream is consumed for. Part of the stream key, so changing
/// the sample layout of one estimator never shifts the draws of another.
enum class StreamPurpose : std::uint64_t {
    Instance = 1,
    Trajectory = 2,
    ValueEstimate = 3,
    QEstimate = 4,
    GEstimate = 5,
    Sweep = 6,
    Oracle = 7,
};

/**
 * Counter-based pseudo-random stream keyed by (seed, purpose, k, t, replicate).
 *
 * Streams derived from the same key produce the same sequence regardless of
 * how many other streams were consumed in between, so replicates can be
 * evaluated in any order (or in parallel) without changing a single draw.
 * All primitives are hand-rolled on top of splitmix64 to keep outputs
 * identical across standard libraries.
 */
class RngStream {
  public:
    explicit RngStream(std::uint64_t state) : state_(state) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform draw in [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform draw in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in {0, ..., n-1}.
    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
        return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
    }

    /// Samples an index from an unnormalized nonnegative weight vector by CDF scan.
    int categorical(const Eigen::Ref<const Eigen::VectorXd>& weights) {
        const double total = weights.sum();
        double u = uniform01() * total;
        for (int i = 0; i < weights.size(); ++i) {
            u -= weights(i);
            if (u < 0.0) return i;
        }
        return static_cast<int>(weights.size()) - 1;
    }

  private:
    std::uint64_t state_;
};

inline std::uint64_t mix_key(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    return h ^ (h >> 27);
}

/// Derives an independent stream for (seed, purpose, k, t, replicate).
inline RngStream make_stream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t k = 0,
                             std::uint64_t t = 0, std::uint64_t replicate = 0) {
    std::uint64_t h = 0x8a5cd789635d2dffULL;
    h = mix_key(h, seed);
    h = mix_key(h, static_cast<std::uint64_t>(purpose));
    h = mix_key(h, k);
    h = mix_key(h, t);
    h = mix_key(h, replicate);
    return RngStream(h);
}

}  // namespace rcmdp
