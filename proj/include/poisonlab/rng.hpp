#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace poisonlab {

/// Mixes a base seed with a stream tag so that sub-generators are
/// statistically independent but fully reproducible.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Seeded generator wrapping mt19937_64. Distribution transforms are done
// by hand so that byte-identical streams do not depend on the standard
// library's unspecified algorithms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform on the open interval (0, 1); safe under log().
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; the second draw of each pair is cached.
    double gaussian();

    /// Unbiased integer in [0, bound) by rejection.
    std::uint64_t uniform_int(std::uint64_t bound);

    /// Fisher-Yates shuffle driven by uniform_int.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace poisonlab
