#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace dustat {

/// SplitMix64 finalizer. Used to derive independent child seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed for the index-th child stream of `seed` (replications, trees, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// Random source with platform-independent output. std::mt19937_64 has a fully
// specified output sequence; the std:: distributions do not, so the variate
// transforms below are implemented here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [0, bound), rejection sampled (no modulo bias).
    std::uint64_t below(std::uint64_t bound);

    /// Standard normal (Marsaglia polar method).
    double normal();

    double normal(double mean, double sd) { return mean + sd * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Fisher-Yates shuffle, last element first.
    template <class T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

    template <class T>
    void shuffle(std::vector<T>& values) {
        shuffle(std::span<T>(values));
    }

private:
    std::mt19937_64 engine_;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace dustat
