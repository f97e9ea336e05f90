#include "eegrecon/dsp.hpp"

#include "eegrecon/errors.hpp"

#include <cmath>
#include <complex>
#include <numbers>

namespace eegrecon {

namespace {

using cd = std::complex<double>;

cd section_response(const BiquadSection& s, double theta) {
    cd z = std::polar(1.0, theta);
    cd z2 = z * z;
    return (s.b0 * z2 + s.b1 * z + s.b2) / (z2 + s.a1 * z + s.a2);
}

Vec hann_periodic(Eigen::Index n) {
    Vec w(n);
    for (Eigen::Index i = 0; i < n; ++i)
        w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(n)));
    return w;
}

// steady-state DF2T state per unit constant input
void section_zi(const BiquadSection& s, double& zi1, double& zi2) {
    double g = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    zi1 = g - s.b0;
    zi2 = s.b2 - s.a2 * g;
}

Vec run_section(const BiquadSection& s, const Vec& x) {
    double zi1 = 0.0, zi2 = 0.0;
    section_zi(s, zi1, zi2);
    double s1 = zi1 * x[0];
    double s2 = zi2 * x[0];
    Vec y(x.size());
    for (Eigen::Index n = 0; n < x.size(); ++n) {
        double yn = s.b0 * x[n] + s1;
        s1 = s.b1 * x[n] - s.a1 * yn + s2;
        s2 = s.b2 * x[n] - s.a2 * yn;
        y[n] = yn;
    }
    return y;
}

} // namespace

BiquadCascade design_butterworth_bandpass(int order, double f_lo_hz,
                                          double f_hi_hz, double fs_hz) {
    if (order != 2 && order != 4 && order != 6 && order != 8)
        throw ConfigError("butterworth: order must be 2, 4, 6 or 8");
    if (!(fs_hz > 0.0)) throw ConfigError("butterworth: fs must be > 0");
    if (!(0.0 < f_lo_hz && f_lo_hz < f_hi_hz && f_hi_hz < fs_hz / 2.0))
        throw ConfigError("butterworth: need 0 < f_lo < f_hi < fs/2");

    const int n = order / 2; // analog lowpass prototype order
    const double fs2 = 2.0 * fs_hz;
    const double wl = fs2 * std::tan(std::numbers::pi * f_lo_hz / fs_hz);
    const double wh = fs2 * std::tan(std::numbers::pi * f_hi_hz / fs_hz);
    const double w0 = std::sqrt(wl * wh);
    const double bw = wh - wl;

    // bandpass pole pairs from each prototype pole
    std::vector<std::pair<cd, cd>> pole_pairs;
    for (int k = 0; k < n; ++k) {
        double ang = std::numbers::pi * (2.0 * k + n + 1.0) / (2.0 * n);
        cd p(std::cos(ang), std::sin(ang));
        if (p.imag() < 0.0) continue; // conjugates handled when grouping
        cd pb = p * bw;
        cd disc = std::sqrt(pb * pb - 4.0 * w0 * w0);
        cd s1 = (pb + disc) / 2.0;
        cd s2 = (pb - disc) / 2.0;
        if (std::abs(p.imag()) < 1e-12) {
            // real prototype pole: its two bandpass roots share one section
            pole_pairs.emplace_back(s1, s2);
        } else {
            // complex pair: each root pairs with its own conjugate
            pole_pairs.emplace_back(s1, std::conj(s1));
            pole_pairs.emplace_back(s2, std::conj(s2));
        }
    }

    BiquadCascade c;
    c.fs_hz = fs_hz;
    const double fc_dig = fs_hz / std::numbers::pi * std::atan(w0 / fs2);
    const double theta_c = 2.0 * std::numbers::pi * fc_dig / fs_hz;
    for (auto& [s1, s2] : pole_pairs) {
        cd z1 = (1.0 + s1 / fs2) / (1.0 - s1 / fs2);
        cd z2 = (1.0 + s2 / fs2) / (1.0 - s2 / fs2);
        BiquadSection sec;
        sec.a1 = -(z1 + z2).real();
        sec.a2 = (z1 * z2).real();
        sec.b0 = 1.0;
        sec.b1 = 0.0;
        sec.b2 = -1.0;
        double raw = std::abs(section_response(sec, theta_c));
        if (!(raw > 0.0)) throw NumericError("butterworth: degenerate section gain");
        sec.b0 /= raw;
        sec.b2 /= raw;
        if (std::abs(z1) >= 1.0 || std::abs(z2) >= 1.0)
            throw NumericError("butterworth: unstable pole");
        c.sections.push_back(sec);
    }
    return c;
}

double cascade_gain(const BiquadCascade& c, double f_hz) {
    double theta = 2.0 * std::numbers::pi * f_hz / c.fs_hz;
    double g = 1.0;
    for (const auto& s : c.sections) g *= std::abs(section_response(s, theta));
    return g;
}

Vec filter_forward(const BiquadCascade& c, const Vec& x) {
    if (x.size() < 1) throw DataError("filter: empty input");
    Vec y = x;
    for (const auto& s : c.sections) y = run_section(s, y);
    return y;
}

Vec filter_zero_phase(const BiquadCascade& c, const Vec& x) {
    const Eigen::Index order = static_cast<Eigen::Index>(2 * c.sections.size());
    if (x.size() <= 3 * order)
        throw DataError("filter: input shorter than 3x filter order");
    const Eigen::Index pad = 3 * (order + 1);

    Vec ext(x.size() + 2 * pad);
    for (Eigen::Index i = 0; i < pad; ++i)
        ext[i] = 2.0 * x[0] - x[pad - i];
    ext.segment(pad, x.size()) = x;
    for (Eigen::Index i = 0; i < pad; ++i)
        ext[pad + x.size() + i] = 2.0 * x[x.size() - 1] - x[x.size() - 2 - i];

    Vec fwd = filter_forward(c, ext);
    Vec rev = fwd.reverse();
    Vec bwd = filter_forward(c, rev);
    Vec out = bwd.reverse();
    return out.segment(pad, x.size());
}

Psd welch_psd(const Vec& x, double fs_hz, Eigen::Index nperseg, double overlap) {
    if (nperseg < 2) throw ConfigError("welch: nperseg must be >= 2");
    if (!(overlap >= 0.0 && overlap < 1.0))
        throw ConfigError("welch: overlap must be in [0, 1)");
    if (x.size() < nperseg) throw DataError("welch: input shorter than nperseg");
    const Eigen::Index hop =
        std::max<Eigen::Index>(1, nperseg - static_cast<Eigen::Index>(
                                               std::floor(overlap * static_cast<double>(nperseg))));
    const Eigen::Index frames = (x.size() - nperseg) / hop + 1;
    const Vec w = hann_periodic(nperseg);
    const double u = w.squaredNorm(); // sum w^2
    const Eigen::Index bins = onesided_bins(nperseg);

    Psd out;
    out.freq_hz.resize(bins);
    for (Eigen::Index k = 0; k < bins; ++k)
        out.freq_hz[k] = fs_hz * static_cast<double>(k) / static_cast<double>(nperseg);
    out.power = Vec::Zero(bins);
    for (Eigen::Index f = 0; f < frames; ++f) {
        Vec seg = x.segment(f * hop, nperseg).cwiseProduct(w);
        CVec spec = dft(seg);
        for (Eigen::Index k = 0; k < bins; ++k)
            out.power[k] += std::norm(spec[k]);
    }
    out.power /= static_cast<double>(frames) * fs_hz * u;
    for (Eigen::Index k = 1; k < bins; ++k) {
        bool nyquist = (nperseg % 2 == 0) && (k == bins - 1);
        if (!nyquist) out.power[k] *= 2.0;
    }
    return out;
}

Mat stft_magnitude(const Vec& x, Eigen::Index win, Eigen::Index hop) {
    if (win < 2 || hop < 1) throw ConfigError("stft: invalid window/hop");
    if (x.size() < win) throw DataError("stft: input shorter than window");
    const Eigen::Index frames = (x.size() - win) / hop + 1;
    const Eigen::Index bins = onesided_bins(win);
    const Vec w = hann_periodic(win);
    Mat s(frames, bins);
    for (Eigen::Index f = 0; f < frames; ++f) {
        Vec seg = x.segment(f * hop, win).cwiseProduct(w);
        CVec spec = dft(seg);
        for (Eigen::Index k = 0; k < bins; ++k) s(f, k) = std::abs(spec[k]);
    }
    return s;
}

double integrate_psd(const Psd& psd, double lo_hz, double hi_hz) {
    const Eigen::Index n = psd.freq_hz.size();
    if (n < 2) throw DataError("integrate_psd: need at least 2 bins");
    lo_hz = std::max(lo_hz, psd.freq_hz[0]);
    hi_hz = std::min(hi_hz, psd.freq_hz[n - 1]);
    if (!(hi_hz > lo_hz)) return 0.0;
    auto value_at = [&](double f) {
        Eigen::Index j = 1;
        while (j < n - 1 && psd.freq_hz[j] < f) ++j;
        double f0 = psd.freq_hz[j - 1], f1 = psd.freq_hz[j];
        double t = (f - f0) / (f1 - f0);
        return psd.power[j - 1] + t * (psd.power[j] - psd.power[j - 1]);
    };
    // trapezoid over interior grid points plus interpolated end segments
    double total = 0.0;
    double prev_f = lo_hz;
    double prev_v = value_at(lo_hz);
    for (Eigen::Index k = 0; k < n; ++k) {
        if (psd.freq_hz[k] <= lo_hz) continue;
        if (psd.freq_hz[k] >= hi_hz) break;
        total += 0.5 * (prev_v + psd.power[k]) * (psd.freq_hz[k] - prev_f);
        prev_f = psd.freq_hz[k];
        prev_v = psd.power[k];
    }
    total += 0.5 * (prev_v + value_at(hi_hz)) * (hi_hz - prev_f);
    return total;
}

Eigen::Vector4d relative_band_power(const Vec& x, double fs_hz) {
    const Eigen::Index nperseg = std::min<Eigen::Index>(128, x.size());
    Psd psd = welch_psd(x, fs_hz, nperseg);
    const double edges[5] = {0.5, 4.0, 8.0, 12.0, 30.0};
    double total = integrate_psd(psd, edges[0], edges[4]);
    if (!(total > 0.0))
        throw NumericError("relative_band_power: zero total power in 0.5-30 Hz");
    Eigen::Vector4d out;
    for (int b = 0; b < 4; ++b)
        out[b] = integrate_psd(psd, edges[b], edges[b + 1]) / total;
    return out;
}

double hjorth_mobility(const Vec& x) {
    if (x.size() < 2) throw DataError("hjorth_mobility: need at least 2 samples");
    double mean = x.mean();
    double var = (x.array() - mean).square().mean();
    if (!(var > 0.0)) return 0.0;  // degenerate constant signal
    Vec d = x.tail(x.size() - 1) - x.head(x.size() - 1);
    double dmean = d.mean();
    double dvar = (d.array() - dmean).square().mean();
    return std::sqrt(dvar / var);
}

double entropy_temporal(const Vec& x) {
    if (x.size() < 1) throw DataError("entropy_temporal: empty input");
    double mean = x.mean();
    double sd = std::sqrt((x.array() - mean).square().mean());
    Vec p = estimate_pdf(x, 64, mean - 4.0 * sd, mean + 4.0 * sd);
    double h = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
    return h;
}

double entropy_spectral(const Vec& x, double fs_hz) {
    const Eigen::Index nperseg = std::min<Eigen::Index>(128, x.size());
    Psd psd = welch_psd(x, fs_hz, nperseg);
    double total = psd.power.sum();
    if (!(total > 0.0)) throw NumericError("entropy_spectral: zero total mass");
    double h = 0.0;
    for (Eigen::Index k = 0; k < psd.power.size(); ++k) {
        double p = psd.power[k] / total;
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

Vec estimate_pdf(const Vec& x, Eigen::Index bins, double lo, double hi) {
    if (bins < 1) throw ConfigError("estimate_pdf: bins must be >= 1");
    if (x.size() < 1) throw DataError("estimate_pdf: empty input");
    Vec p = Vec::Zero(bins);
    if (!(hi > lo)) {
        p[0] = 1.0;
        return p;
    }
    const double width = (hi - lo) / static_cast<double>(bins);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        auto b = static_cast<Eigen::Index>(std::floor((x[i] - lo) / width));
        b = std::clamp<Eigen::Index>(b, 0, bins - 1);
        p[b] += 1.0;
    }
    p /= static_cast<double>(x.size());
    return p;
}

} // namespace eegrecon
