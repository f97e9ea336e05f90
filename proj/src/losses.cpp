#include "eegrecon/losses.hpp"

#include "eegrecon/errors.hpp"
#include "eegrecon/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <utility>

namespace eegrecon {

namespace {

void check_same(const Vec& x, const Vec& x_hat, const char* what) {
    if (x.size() != x_hat.size() || x.size() < 2)
        throw DataError(std::string(what) + ": signals must share length >= 2");
}

// assemble a conjugate-symmetric spectrum from one-sided coefficients c_k so
// that n * idft_real(C)[t] = sum_k Re(c_k exp(i 2 pi k t / n))
Vec onesided_chain_to_time(const CVec& c, Eigen::Index n) {
    CVec full = CVec::Zero(n);
    const Eigen::Index bins = c.size();
    full[0] = c[0];
    for (Eigen::Index k = 1; k < bins; ++k) {
        const bool nyquist = (n % 2 == 0) && (k == n / 2);
        if (nyquist) {
            full[k] = c[k];
        } else {
            full[k] = 0.5 * c[k];
            full[n - k] = 0.5 * std::conj(c[k]);
        }
    }
    Vec t = idft_real(full);
    return t * static_cast<double>(n);
}

// population variance and its gradient
double pop_var(const Vec& x, Vec* grad) {
    const double mean = x.mean();
    const double v = (x.array() - mean).square().mean();
    if (grad) *grad = (2.0 / static_cast<double>(x.size())) * (x.array() - mean).matrix();
    return v;
}

// Hjorth mobility with gradient support; returns 0 with zero gradient on
// degenerate variance
double mobility_value(const Vec& x, Vec* grad) {
    const Eigen::Index n = x.size();
    Vec dv_dx;
    const double v = pop_var(x, grad ? &dv_dx : nullptr);
    Vec d = x.tail(n - 1) - x.head(n - 1);
    Vec dvd_dd;
    const double vd = pop_var(d, grad ? &dvd_dd : nullptr);
    if (!(v > 0.0) || !(vd > 0.0)) {
        if (grad) *grad = Vec::Zero(n);
        return 0.0;
    }
    const double mob = std::sqrt(vd / v);
    if (grad) {
        Vec dvd_dx = Vec::Zero(n);
        dvd_dx.head(n - 1) -= dvd_dd;
        dvd_dx.tail(n - 1) += dvd_dd;
        *grad = (1.0 / (2.0 * mob)) * (dvd_dx * v - vd * dv_dx) / (v * v);
    }
    return mob;
}

} // namespace

double wrap_phase(double d) {
    const double two_pi = 2.0 * std::numbers::pi;
    return d - two_pi * std::ceil(d / two_pi - 0.5);
}

double temporal_mse(const Vec& x, const Vec& x_hat, Vec* grad) {
    check_same(x, x_hat, "temporal_mse");
    Vec diff = x_hat - x;
    if (grad) *grad = (2.0 / static_cast<double>(x.size())) * diff;
    return diff.squaredNorm() / static_cast<double>(x.size());
}

double magnitude_mse(const Vec& x, const Vec& x_hat, Vec* grad) {
    check_same(x, x_hat, "magnitude_mse");
    const Eigen::Index n = x.size();
    const Eigen::Index bins = onesided_bins(n);
    CVec sx = dft(x);
    CVec sh = dft(x_hat);
    const double nn = static_cast<double>(n);
    double loss = 0.0;
    CVec chain = CVec::Zero(bins);
    for (Eigen::Index k = 0; k < bins; ++k) {
        const double m = std::abs(sx[k]) / nn;
        const double mh = std::abs(sh[k]) / nn;
        const double diff = mh - m;
        loss += diff * diff;
        if (grad && std::abs(sh[k]) > 0.0) {
            // d|X_k|/dx_t = Re(X_k exp(i 2 pi k t / n)) / |X_k|
            chain[k] = (2.0 * diff / (static_cast<double>(bins) * nn)) * sh[k] /
                       std::abs(sh[k]);
        }
    }
    loss /= static_cast<double>(bins);
    if (grad) *grad = onesided_chain_to_time(chain, n);
    return loss;
}

double phase_mse(const Vec& x, const Vec& x_hat, Vec* grad) {
    check_same(x, x_hat, "phase_mse");
    const Eigen::Index n = x.size();
    const Eigen::Index bins = onesided_bins(n);
    CVec sx = dft(x);
    CVec sh = dft(x_hat);
    double wsum = 0.0;
    for (Eigen::Index k = 0; k < bins; ++k) wsum += std::abs(sx[k]);
    if (!(wsum > 0.0)) {
        if (grad) *grad = Vec::Zero(n);
        return 0.0;
    }
    double loss = 0.0;
    CVec chain = CVec::Zero(bins);
    for (Eigen::Index k = 0; k < bins; ++k) {
        const double w = std::abs(sx[k]) / wsum;
        if (w == 0.0) continue;
        const double ph = std::abs(sh[k]) == 0.0 ? 0.0 : std::arg(sh[k]);
        const double px = std::abs(sx[k]) == 0.0 ? 0.0 : std::arg(sx[k]);
        const double d = wrap_phase(ph - px);
        loss += w * d * d;
        if (grad && std::abs(sh[k]) > 0.0) {
            // d(arg X_k)/dx_t = -Im(X_k exp(i 2 pi k t / n)) / |X_k|^2
            const std::complex<double> i_unit(0.0, 1.0);
            chain[k] = 2.0 * w * d * i_unit * sh[k] / std::norm(sh[k]);
        }
    }
    if (grad) *grad = onesided_chain_to_time(chain, n);
    return loss;
}

double mobility_loss(const Vec& x, const Vec& x_hat, Vec* grad) {
    check_same(x, x_hat, "mobility_loss");
    const double mx = mobility_value(x, nullptr);
    Vec dmh;
    const double mh = mobility_value(x_hat, grad ? &dmh : nullptr);
    const double diff = mx - mh;
    if (grad) *grad = (-2.0 * diff) * dmh;
    return diff * diff;
}

double kld_latent(const Mat& mu, const Mat& logvar, Mat* d_mu, Mat* d_logvar) {
    if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols() || mu.size() == 0)
        throw DataError("kld_latent: mu/logvar shape mismatch");
    const double m = static_cast<double>(mu.size());
    const double kld =
        0.5 * (mu.array().square() + logvar.array().exp() - 1.0 - logvar.array())
                  .sum() /
        m;
    if (d_mu) *d_mu = (mu.array() / m).matrix();
    if (d_logvar) *d_logvar = (0.5 * (logvar.array().exp() - 1.0) / m).matrix();
    return kld;
}

double swd_distance(const Mat& a, const Mat& b, Eigen::Index projections,
                    SeededRng& rng, Mat* d_a) {
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() < 1)
        throw DataError("swd_distance: sample sets must share shape");
    if (projections < 1) throw ConfigError("swd_distance: projections must be >= 1");
    const Eigen::Index s = a.rows();
    const Eigen::Index d = a.cols();
    if (d_a) *d_a = Mat::Zero(s, d);

    double total = 0.0;
    std::vector<Eigen::Index> ia(static_cast<std::size_t>(s));
    std::vector<Eigen::Index> ib(static_cast<std::size_t>(s));
    for (Eigen::Index p = 0; p < projections; ++p) {
        Vec theta(d);
        double norm = 0.0;
        do {
            for (Eigen::Index j = 0; j < d; ++j) theta[j] = rng.normal();
            norm = theta.norm();
        } while (!(norm > 0.0));
        theta /= norm;

        Vec pa = a * theta;
        Vec pb = b * theta;
        std::iota(ia.begin(), ia.end(), 0);
        std::iota(ib.begin(), ib.end(), 0);
        std::sort(ia.begin(), ia.end(),
                  [&](Eigen::Index l, Eigen::Index r) { return pa[l] < pa[r]; });
        std::sort(ib.begin(), ib.end(),
                  [&](Eigen::Index l, Eigen::Index r) { return pb[l] < pb[r]; });
        double acc = 0.0;
        for (Eigen::Index i = 0; i < s; ++i) {
            const double diff = pa[ia[static_cast<std::size_t>(i)]] -
                                pb[ib[static_cast<std::size_t>(i)]];
            acc += diff * diff;
            if (d_a) {
                const double g = 2.0 * diff /
                                 (static_cast<double>(s) * static_cast<double>(projections));
                d_a->row(ia[static_cast<std::size_t>(i)]) += g * theta.transpose();
            }
        }
        total += acc / static_cast<double>(s);
    }
    return total / static_cast<double>(projections);
}

double swd_latent(const Mat& latents, Eigen::Index projections, SeededRng& rng,
                  Mat* d_latents) {
    Mat ref(latents.rows(), latents.cols());
    for (Eigen::Index j = 0; j < ref.cols(); ++j)
        for (Eigen::Index i = 0; i < ref.rows(); ++i) ref(i, j) = rng.normal();
    return swd_distance(latents, ref, projections, rng, d_latents);
}

double uncertainty_weight(double loss, double s, double* d_loss, double* d_s) {
    const double e = std::exp(-s);
    if (d_loss) *d_loss = e;
    if (d_s) *d_s = 1.0 - e * loss;
    return e * loss + s;
}

TotalLoss total_loss(const LossBreakdown& means, const LossWeights& weights) {
    const std::pair<const char*, double> parts[] = {
        {"mse", means.mse},           {"magnitude", means.magnitude},
        {"phase", means.phase},       {"mobility", means.mobility},
        {"latent", means.latent},     {"s_mse", weights.s_mse},
        {"s_mag", weights.s_mag}};
    for (const auto& [name, v] : parts)
        if (!std::isfinite(v))
            throw NumericError(std::string("total_loss: non-finite component ") + name);
    TotalLoss out;
    out.breakdown = means;
    double d_mse_w = 0.0, d_s1 = 0.0, d_mag_w = 0.0, d_s2 = 0.0;
    const double mse_w = uncertainty_weight(means.mse, weights.s_mse, &d_mse_w, &d_s1);
    const double mag_w = uncertainty_weight(means.magnitude, weights.s_mag, &d_mag_w, &d_s2);
    const double p1 = mse_w + mag_w;
    const double p2 = means.mobility + 1.0;
    const double p3 = means.phase + 1.0;
    out.breakdown.total = p1 * p2 * p3 + means.latent;
    out.d_mse = d_mse_w * p2 * p3;
    out.d_mag = d_mag_w * p2 * p3;
    out.d_mobility = p1 * p3;
    out.d_phase = p1 * p2;
    out.d_latent = 1.0;
    out.d_s_mse = d_s1 * p2 * p3;
    out.d_s_mag = d_s2 * p2 * p3;
    return out;
}

} // namespace eegrecon
