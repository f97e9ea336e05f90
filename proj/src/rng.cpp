#include "eegrecon/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace eegrecon {

std::uint64_t SeededRng::next_u64() {
    // splitmix64 (Steele, Lea, Flood 2014)
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double SeededRng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

std::uint64_t SeededRng::uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be > 0");
    // rejection sampling to avoid modulo bias
    std::uint64_t limit = ~0ULL - (~0ULL % n);
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double SeededRng::normal() {
    // Box-Muller; u1 kept away from 0 so the log is finite
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double SeededRng::normal(double mean, double sd) {
    return mean + sd * normal();
}

std::uint64_t SeededRng::poisson(double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("poisson: lambda must be >= 0");
    if (lambda == 0.0) return 0;
    double l = std::exp(-lambda);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= uniform();
    } while (p > l);
    return k - 1;
}

SeededRng SeededRng::derive(std::string_view tag) const {
    SeededRng mixer(state_ ^ hash64(tag));
    return SeededRng(mixer.next_u64());
}

std::uint64_t hash64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace eegrecon
