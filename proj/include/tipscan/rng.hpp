#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace tipscan {

/// Portable seeded generator.
///
/// Only the raw 64-bit output of std::mt19937_64 is used; that engine is fully
/// specified by the standard. Uniform integers use rejection sampling and normals
/// use Box-Muller, so sequences are identical across standard libraries (the
/// std distributions are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n);

    /// Uniform double in [0, 1) with 53 bits of resolution.
    double uniform01();

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal deviate.
    double normal();

    /// Fisher-Yates shuffle, iterating from the back.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_index(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Identity permutation of size n, shuffled with Rng(seed).
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

/// Per-stage seed: splitmix64(seed ^ fnv1a64(stage)). Lets every stage draw from
/// one global seed without correlated streams.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace tipscan
