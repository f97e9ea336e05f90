#pragma once

#include "eegrecon/fft.hpp"

#include <Eigen/Dense>

namespace eegrecon {

// one second-order section, direct form II transposed, denominator monic
struct BiquadSection {
    double b0{0.0}, b1{0.0}, b2{0.0};
    double a1{0.0}, a2{0.0};
};

struct BiquadCascade {
    double fs_hz{0.0};
    std::vector<BiquadSection> sections;
};

// Butterworth bandpass of total order 2/4/6/8 (order/2 prototype poles,
// each mapped to one biquad by the lowpass-to-bandpass transform plus
// bilinear transform). Each section is gain-normalized at the digital
// center frequency, zeros sit at z = +1 and z = -1.
BiquadCascade design_butterworth_bandpass(int order, double f_lo_hz,
                                          double f_hi_hz, double fs_hz);

// |H(f)| of the cascade evaluated on the unit circle
double cascade_gain(const BiquadCascade& c, double f_hz);

// single forward pass with steady-state initial conditions scaled by the
// first input sample of each section
Vec filter_forward(const BiquadCascade& c, const Vec& x);

// forward-backward pass with odd-reflection padding; zero phase, squared
// magnitude response
Vec filter_zero_phase(const BiquadCascade& c, const Vec& x);

struct Psd {
    Vec freq_hz;
    Vec power; // density, units^2 per Hz, one-sided
};

// Welch with periodic Hann segments, mean over segments, no detrending
Psd welch_psd(const Vec& x, double fs_hz, Eigen::Index nperseg = 128,
              double overlap = 0.5);

// magnitude spectrogram, rows = frames, cols = one-sided bins, periodic Hann
Mat stft_magnitude(const Vec& x, Eigen::Index win = 64, Eigen::Index hop = 16);

// trapezoid integral of the PSD between lo and hi with interpolated edges
double integrate_psd(const Psd& psd, double lo_hz, double hi_hz);

// delta/theta/alpha/beta fractions of total 0.5-30 Hz power; sums to 1
Eigen::Vector4d relative_band_power(const Vec& x, double fs_hz);

// sqrt(var(diff x) / var(x)); population variances
double hjorth_mobility(const Vec& x);

// Shannon entropy (nats) of a 64-bin amplitude histogram over mean +- 4 sd
double entropy_temporal(const Vec& x);

// Shannon entropy (nats) of the normalized Welch PSD
double entropy_spectral(const Vec& x, double fs_hz);

// normalized histogram over [lo, hi]; out-of-range samples clip into the
// edge bins; degenerate range puts all mass in bin 0
Vec estimate_pdf(const Vec& x, Eigen::Index bins, double lo, double hi);

} // namespace eegrecon
