#pragma once

#include "eegrecon/recording.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace eegrecon {

inline constexpr std::array<const char*, 4> kBandNames = {"delta", "theta",
                                                          "alpha", "beta"};

// Synthetic EEG: one representative sinusoid per canonical band with a slow
// shared amplitude envelope, per-channel 1/f noise, and injected spike
// artifacts. Band phases are random per channel; envelopes are shared across
// channels so neighboring channels carry usable information about each other.
struct SyntheticSpec {
    double fs_hz{100.0};
    double duration_s{60.0};
    std::vector<std::string> channels; // empty -> full default montage
    std::array<double, 4> band_amp_uv{8.0, 6.0, 10.0, 4.0};  // delta..beta
    std::array<double, 4> band_freq_hz{2.0, 6.0, 10.0, 20.0}; // representative
    double envelope_depth{0.3};       // in [0, 1)
    double pink_uv{3.0};              // 1/f noise std per channel
    double spike_rate_per_min{0.0};   // expected events per channel
    double spike_multiplier{8.0};     // amplitude in units of channel std
    std::uint64_t seed{1};
};

struct SpikeEvent {
    std::string channel;
    Eigen::Index sample{0};
    double amplitude_uv{0.0};
};

struct SyntheticResult {
    Recording recording;
    std::array<double, 4> band_amp_uv{}; // ground truth echo
    std::vector<SpikeEvent> spikes;
};

SyntheticResult generate_synthetic(const SyntheticSpec& spec);

} // namespace eegrecon
