#pragma once

// Platform-stable random streams. std::mt19937_64 has a fully specified
// output sequence, but the standard distributions do not, so the conversions
// to doubles and bounded integers are done here.

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace requal {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    /// Independent stream for one query: mixes the run seed with the query
    /// index, so stream i never depends on how many draws stream j consumed.
    static Rng stream(std::uint64_t run_seed, std::uint64_t index) {
        return Rng(splitmix64(run_seed) ^ index);
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0,1).
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo,hi].
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, bound) by rejection; bound > 0.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = engine_();
            if (r >= threshold) return r % bound;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace requal
