#pragma once

#include <cstdint>
#include <vector>

#include "oodkit/matrix.hpp"

namespace oodkit {

// Counter-based generator: the output stream is a pure function of
// (seed, counter), so any draw can be reproduced and split() substreams
// stay independent of how much the parent has consumed.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t counter = 0)
        : seed_(seed), counter_(counter) {}

    std::uint64_t next_u64();
    std::uint64_t bounded(std::uint64_t n);  // uniform in [0, n), unbiased

    double uniform();                        // [0, 1)
    double uniform(double lo, double hi);
    double normal();                         // standard normal, Box-Muller

    void fill_normal(RealMatrix& m);
    void fill_uniform(RealMatrix& m, double lo, double hi);
    std::vector<std::size_t> permutation(std::size_t n);

    // Independent substream keyed by `stream`; deterministic in (seed, stream).
    Rng split(std::uint64_t stream) const;

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

}  // namespace oodkit
