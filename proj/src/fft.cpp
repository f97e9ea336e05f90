#include "eegrecon/fft.hpp"

#include <numbers>

namespace eegrecon {

namespace {

bool is_pow2(Eigen::Index n) { return n > 0 && (n & (n - 1)) == 0; }

// iterative radix-2 Cooley-Tukey, in place, decimation in time
void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * std::numbers::pi / static_cast<double>(len);
        if (!inverse) ang = -ang;
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

} // namespace

CVec dft(const Vec& x) {
    const Eigen::Index n = x.size();
    CVec X(n);
    if (n == 0) return X;
    if (is_pow2(n)) {
        std::vector<std::complex<double>> a(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = x[i];
        fft_pow2(a, false);
        for (Eigen::Index i = 0; i < n; ++i) X[i] = a[static_cast<std::size_t>(i)];
        return X;
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (Eigen::Index t = 0; t < n; ++t) {
            double ang = -2.0 * std::numbers::pi * static_cast<double>(k) *
                         static_cast<double>(t) / static_cast<double>(n);
            acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        X[k] = acc;
    }
    return X;
}

Vec idft_real(const CVec& X) {
    const Eigen::Index n = X.size();
    Vec x(n);
    if (n == 0) return x;
    if (is_pow2(n)) {
        std::vector<std::complex<double>> a(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = X[i];
        fft_pow2(a, true);
        for (Eigen::Index i = 0; i < n; ++i)
            x[i] = a[static_cast<std::size_t>(i)].real() / static_cast<double>(n);
        return x;
    }
    for (Eigen::Index t = 0; t < n; ++t) {
        std::complex<double> acc(0.0, 0.0);
        for (Eigen::Index k = 0; k < n; ++k) {
            double ang = 2.0 * std::numbers::pi * static_cast<double>(k) *
                         static_cast<double>(t) / static_cast<double>(n);
            acc += X[k] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        x[t] = acc.real() / static_cast<double>(n);
    }
    return x;
}

Vec dft_magnitude(const Vec& x) {
    CVec X = dft(x);
    const Eigen::Index m = onesided_bins(x.size());
    Vec mag(m);
    for (Eigen::Index k = 0; k < m; ++k) mag[k] = std::abs(X[k]);
    return mag;
}

Vec dft_phase(const Vec& x) {
    CVec X = dft(x);
    const Eigen::Index m = onesided_bins(x.size());
    Vec ph(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        ph[k] = (std::abs(X[k]) == 0.0) ? 0.0 : std::arg(X[k]);
    }
    return ph;
}

} // namespace eegrecon
