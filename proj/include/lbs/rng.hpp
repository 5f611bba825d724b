#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lbs {

// Deterministic random stream. All draws go through explicit conversions of
// mt19937_64 output words so that a given seed produces the same sequence on
// every platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0,1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform in (0,1]; safe as a log argument.
    double uniform_open() { return 1.0 - uniform(); }

    // Exponential with the given rate parameter (rate > 0).
    double exponential(double rate) { return -std::log(uniform_open()) / rate; }

    // Uniform in [lo, hi).
    double uniform_in(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::mt19937_64 gen_;
};

} // namespace lbs
