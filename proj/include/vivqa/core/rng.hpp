#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace vivqa {

/// Counter-based random stream. The n-th draw is a pure function of
/// (seed, n), so sequences are identical on every platform. Conversions to
/// reals are done here rather than through <random> distributions, whose
/// output is implementation-defined.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed = 0) : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller (one value per call, no caching).
    double normal();
    bool bernoulli(double p) { return uniform() < p; }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    /// Independent substream keyed by a label. Does not advance this stream.
    RngStream split(std::string_view label) const;
    RngStream split(std::uint64_t key) const;

    /// Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

  private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace vivqa
