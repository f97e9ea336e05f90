#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace eegrecon {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;

// DFT of a real signal, full length n. Radix-2 when n is a power of two,
// otherwise a direct O(n^2) evaluation (lengths here are 64..256).
CVec dft(const Vec& x);

// inverse DFT, returns the real part (input assumed conjugate-symmetric)
Vec idft_real(const CVec& X);

// one-sided bin count for length n: n/2 + 1 (n even), (n+1)/2 (n odd)
inline Eigen::Index onesided_bins(Eigen::Index n) { return n / 2 + 1; }

// one-sided magnitudes |X_k|, k = 0..n/2
Vec dft_magnitude(const Vec& x);

// one-sided phases atan2(Im, Re); zero-magnitude bins get phase 0
Vec dft_phase(const Vec& x);

} // namespace eegrecon
