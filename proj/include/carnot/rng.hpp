#pragma once

#include <cstdint>
#include <random>

namespace carnot {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed), seed_(seed) {}

    double uniform(double a = -1.0, double b = 1.0) { return a + (b - a) * unit_(gen_); }
    double normal() { return normal_(gen_); }
    int index(int n) { return static_cast<int>(gen_() % static_cast<std::uint64_t>(n)); }
    bool coin() { return (gen_() & 1u) != 0; }
    std::uint64_t next() { return gen_(); }

    // Independent sub-stream for parallel batch k.
    Rng split(std::uint64_t k) const
    {
        std::seed_seq seq{static_cast<std::uint32_t>(seed_ >> 32), static_cast<std::uint32_t>(seed_),
                          static_cast<std::uint32_t>(k >> 32), static_cast<std::uint32_t>(k)};
        Rng r(seed_ ^ (k * 0x9e3779b97f4a7c15ULL));
        r.gen_.seed(seq);
        return r;
    }

private:
    std::mt19937_64 gen_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uint64_t seed_;
};

} // namespace carnot
