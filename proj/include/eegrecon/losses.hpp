#pragma once

#include "eegrecon/layers.hpp"
#include "eegrecon/rng.hpp"

namespace eegrecon {

// batch means of the individual terms plus the composed objective
struct LossBreakdown {
    double mse{0.0};
    double magnitude{0.0};
    double phase{0.0};
    double mobility{0.0};
    double latent{0.0};
    double total{0.0};
};

// trainable homoscedastic-uncertainty scalars for the two error terms,
// initialized to zero
struct LossWeights {
    double s_mse{0.0};
    double s_mag{0.0};
};

// each component returns its value; when grad is non-null it receives
// d(value)/d(x_hat) (same length as x_hat)

double temporal_mse(const Vec& x, const Vec& x_hat, Vec* grad = nullptr);

// MSE between one-sided DFT magnitudes normalized by window length
double magnitude_mse(const Vec& x, const Vec& x_hat, Vec* grad = nullptr);

// magnitude-weighted mean of wrapped phase differences squared over
// one-sided bins; weights are the normalized true-signal magnitudes
double phase_mse(const Vec& x, const Vec& x_hat, Vec* grad = nullptr);

// squared Hjorth mobility gap (mob(x) - mob(x_hat))^2
double mobility_loss(const Vec& x, const Vec& x_hat, Vec* grad = nullptr);

// wraps into (-pi, pi]
double wrap_phase(double d);

// per-dimension average KLD against the standard normal; mu/logvar are
// (samples x dims)
double kld_latent(const Mat& mu, const Mat& logvar, Mat* d_mu = nullptr,
                  Mat* d_logvar = nullptr);

// sliced Wasserstein-2^2 between two equal-size sample sets (rows =
// samples); gradient is with respect to a only
double swd_distance(const Mat& a, const Mat& b, Eigen::Index projections,
                    SeededRng& rng, Mat* d_a = nullptr);

// SWD between latents and a standard-normal reference sample of equal size
double swd_latent(const Mat& latents, Eigen::Index projections, SeededRng& rng,
                  Mat* d_latents = nullptr);

// uncertainty weighting U(L, s) = exp(-s) * L + s
double uncertainty_weight(double loss, double s, double* d_loss = nullptr,
                          double* d_s = nullptr);

// composite objective on batch means:
//   total = (U(mse, s1) + U(mag, s2)) * (mobility + 1) * (phase + 1) + latent
struct TotalLoss {
    LossBreakdown breakdown;
    double d_mse{0.0};
    double d_mag{0.0};
    double d_phase{0.0};
    double d_mobility{0.0};
    double d_latent{1.0};
    double d_s_mse{0.0};
    double d_s_mag{0.0};
};

TotalLoss total_loss(const LossBreakdown& means, const LossWeights& weights);

} // namespace eegrecon
