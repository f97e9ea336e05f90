#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace eegrecon {

// Deterministic splitmix64 generator. One 64-bit word of state, so streams
// are cheap to fork and checkpoints stay trivial. Not cryptographic.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64();

    // uniform in [0, 1) with 53 random mantissa bits
    double uniform();
    // uniform in [lo, hi)
    double uniform(double lo, double hi);
    // unbiased integer in [0, n), n > 0
    std::uint64_t uniform_index(std::uint64_t n);
    // standard normal via Box-Muller (two uniforms per draw, no cached spare)
    double normal();
    double normal(double mean, double sd);
    // Poisson via Knuth multiplication, adequate for small lambda
    std::uint64_t poisson(double lambda);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // independent stream keyed by a label; derivation is pure in (state, tag)
    SeededRng derive(std::string_view tag) const;

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_{0};
};

// FNV-1a, used for stream derivation tags
std::uint64_t hash64(std::string_view s);

} // namespace eegrecon
