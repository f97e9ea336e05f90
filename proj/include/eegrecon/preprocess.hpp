#pragma once

#include "eegrecon/dsp.hpp"
#include "eegrecon/layers.hpp"
#include "eegrecon/recording.hpp"
#include "eegrecon/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace eegrecon {

enum class WindowLabel : std::uint8_t { clean, noisy };
enum class PerturbMode { amplitude, additive_mean };
enum class ReferenceMode { latest, ema };

struct PreprocessSettings {
    int filter_order{6};
    double band_lo_hz{0.5};
    double band_hi_hz{40.0};
    double window_s{2.56};
    double stride_s{0.1};
    double stratify_z{3.5};
    PerturbMode perturb_mode{PerturbMode::amplitude};
    double perturb_frac{0.1};
};

struct WindowSet {
    std::string subject;
    std::string source;
    double fs_hz{0.0};
    std::vector<std::string> labels;
    Eigen::Index window_len{0};
    Eigen::Index stride{0};
    std::vector<Mat> windows; // each (C, window_len)
    std::vector<WindowLabel> window_labels;
    std::vector<Eigen::Index> origin; // start sample in the recording
    Vec global_mean;                  // per channel, filtered recording
    Vec global_sd;
    Mat win_mean; // (B, C)
    Mat win_sd;   // (B, C)

    Eigen::Index count() const { return static_cast<Eigen::Index>(windows.size()); }
    Eigen::Index channel_index(const std::string& label) const;
    void refresh_stats(Eigen::Index b); // recompute win_mean/win_sd row b
};

// zero-phase bandpass over every channel; fs below 100 Hz is outside the
// validity region
Recording preprocess_recording(const Recording& rec, const PreprocessSettings& s);

// slides windows over an already-filtered recording; window and stride
// seconds must land on integer sample counts. Windows stay un-recentered
// and unlabeled here.
WindowSet segment_recording(const Recording& filtered, const PreprocessSettings& s,
                            const std::string& subject);

// shifts every window/channel mean onto the global channel mean; in train
// mode also applies the +-frac jitter (multiplicative about the recentered
// mean, or an additive mean shift of frac * global sd)
void recenter_perturb(WindowSet& ws, Mode mode, const PreprocessSettings& s,
                      SeededRng* rng);

// clean = all samples within z * global sd of the global mean on every
// channel; a window with a zero-variance channel is never clean. Zero
// global sd on any channel is a data error.
void stratify_windows(WindowSet& ws, double z);

struct ReferenceStats {
    Vec mean; // per window
    Vec sd;
};

// Scaling reference for one channel: clean windows use their own stats;
// noisy windows reuse the most recent clean stats (latest) or an
// exponential average over the clean windows seen so far (ema).
ReferenceStats track_reference(const WindowSet& ws, const std::string& channel,
                               ReferenceMode mode = ReferenceMode::latest,
                               double alpha = 0.3);

// directory with manifest.json plus windows.bin (f64, [window][channel][t])
void save_windowset(const WindowSet& ws, const std::string& dir);
WindowSet load_windowset(const std::string& dir);

} // namespace eegrecon
