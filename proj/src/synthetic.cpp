#include "eegrecon/synthetic.hpp"

#include "eegrecon/errors.hpp"
#include "eegrecon/fft.hpp"
#include "eegrecon/montage.hpp"
#include "eegrecon/rng.hpp"

#include <cmath>
#include <numbers>

namespace eegrecon {

namespace {

Eigen::Index next_pow2(Eigen::Index n) {
    Eigen::Index m = 1;
    while (m < n) m <<= 1;
    return m;
}

// 1/f amplitude shaping of a random Hermitian spectrum, unit std
Vec pink_noise(Eigen::Index n, SeededRng& rng) {
    const Eigen::Index m = next_pow2(n);
    CVec spec = CVec::Zero(m);
    for (Eigen::Index k = 1; k <= m / 2; ++k) {
        double amp = 1.0 / std::sqrt(static_cast<double>(k));
        double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        spec[k] = std::polar(amp, phase);
        if (k < m / 2) spec[m - k] = std::conj(spec[k]);
    }
    spec[m / 2] = std::complex<double>(spec[m / 2].real(), 0.0);
    Vec x = idft_real(spec).head(n);
    double mean = x.mean();
    double sd = std::sqrt((x.array() - mean).square().mean());
    if (sd > 0.0) x = (x.array() - mean) / sd;
    return x;
}

void validate(const SyntheticSpec& spec) {
    if (!(spec.fs_hz > 0.0)) throw ConfigError("synthetic: fs must be > 0");
    if (!(spec.duration_s > 0.0)) throw ConfigError("synthetic: duration must be > 0");
    for (double a : spec.band_amp_uv)
        if (a < 0.0) throw ConfigError("synthetic: band amplitude must be >= 0");
    for (double f : spec.band_freq_hz)
        if (!(f > 0.0) || f >= spec.fs_hz / 2.0)
            throw ConfigError("synthetic: band frequency outside (0, fs/2)");
    if (spec.envelope_depth < 0.0 || spec.envelope_depth >= 1.0)
        throw ConfigError("synthetic: envelope depth must be in [0, 1)");
    if (spec.pink_uv < 0.0) throw ConfigError("synthetic: pink amplitude must be >= 0");
    if (spec.spike_rate_per_min < 0.0)
        throw ConfigError("synthetic: spike rate must be >= 0");
}

} // namespace

SyntheticResult generate_synthetic(const SyntheticSpec& spec) {
    validate(spec);
    SyntheticResult result;
    result.band_amp_uv = spec.band_amp_uv;

    std::vector<std::string> channels = spec.channels;
    if (channels.empty()) {
        for (const auto& e : default_montage().electrodes) channels.push_back(e.label);
    }
    const Eigen::Index c = static_cast<Eigen::Index>(channels.size());
    const Eigen::Index n =
        static_cast<Eigen::Index>(std::llround(spec.duration_s * spec.fs_hz));
    if (n < 1) throw ConfigError("synthetic: zero-length recording");

    Recording& rec = result.recording;
    rec.fs_hz = spec.fs_hz;
    rec.labels = channels;
    rec.data = Eigen::MatrixXd::Zero(c, n);

    SeededRng root(spec.seed);
    SeededRng band_rng = root.derive("bands");
    SeededRng phase_rng = root.derive("phases");
    SeededRng pink_rng = root.derive("pink");
    SeededRng spike_rng = root.derive("spikes");

    // shared slow envelopes, one modulator per band
    std::array<double, 4> mod_freq{}, mod_phase{};
    for (int b = 0; b < 4; ++b) {
        mod_freq[b] = band_rng.uniform(0.15, 0.4);
        mod_phase[b] = band_rng.uniform(0.0, 2.0 * std::numbers::pi);
    }

    const double two_pi = 2.0 * std::numbers::pi;
    for (Eigen::Index ch = 0; ch < c; ++ch) {
        std::array<double, 4> phase{};
        for (int b = 0; b < 4; ++b)
            phase[b] = phase_rng.uniform(0.0, two_pi);
        for (Eigen::Index t = 0; t < n; ++t) {
            double ts = static_cast<double>(t) / spec.fs_hz;
            double v = 0.0;
            for (int b = 0; b < 4; ++b) {
                if (spec.band_amp_uv[b] == 0.0) continue;
                double env = 1.0 + spec.envelope_depth *
                                       std::sin(two_pi * mod_freq[b] * ts + mod_phase[b]);
                v += spec.band_amp_uv[b] * env * std::sin(two_pi * spec.band_freq_hz[b] * ts + phase[b]);
            }
            rec.data(ch, t) = v;
        }
        if (spec.pink_uv > 0.0)
            rec.data.row(ch) += spec.pink_uv * pink_noise(n, pink_rng).transpose();
    }

    if (spec.spike_rate_per_min > 0.0) {
        const Eigen::Index width =
            std::max<Eigen::Index>(2, static_cast<Eigen::Index>(std::llround(0.1 * spec.fs_hz)));
        for (Eigen::Index ch = 0; ch < c; ++ch) {
            double lambda = spec.spike_rate_per_min * spec.duration_s / 60.0;
            std::uint64_t events = spike_rng.poisson(lambda);
            double mean = rec.data.row(ch).mean();
            double sd = std::sqrt((rec.data.row(ch).array() - mean).square().mean());
            for (std::uint64_t e = 0; e < events; ++e) {
                if (n <= width) break;
                Eigen::Index pos = static_cast<Eigen::Index>(
                    spike_rng.uniform_index(static_cast<std::uint64_t>(n - width)));
                double sign = spike_rng.uniform() < 0.5 ? -1.0 : 1.0;
                double amp = sign * spec.spike_multiplier * sd;
                for (Eigen::Index k = 0; k < width; ++k) {
                    double w = 0.5 * (1.0 - std::cos(two_pi * static_cast<double>(k) /
                                                     static_cast<double>(width)));
                    rec.data(ch, pos + k) += amp * w;
                }
                result.spikes.push_back({channels[static_cast<std::size_t>(ch)], pos, amp});
            }
        }
    }
    return result;
}

} // namespace eegrecon
