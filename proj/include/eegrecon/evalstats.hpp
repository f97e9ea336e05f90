#pragma once

#include "eegrecon/dsp.hpp"
#include "eegrecon/preprocess.hpp"

#include <string>
#include <vector>

namespace eegrecon {

// symmetric MAPE in percent; exactly 0 when both values are 0
double smape(double a, double b);

// sample Pearson correlation; throws NumericError on zero variance
double pearson(const Vec& a, const Vec& b);

// Jensen-Shannon divergence (nats, <= ln 2) between shared-range amplitude
// histograms
double js_divergence(const Vec& x, const Vec& y, Eigen::Index bins = 64);

// Pearson correlation of Welch PSDs restricted to [lo, hi] Hz
double psd_pearson(const Vec& x, const Vec& y, double fs_hz, double lo_hz = 0.5,
                   double hi_hz = 40.0);

// RV coefficient tr(AA'BB') / (|AA'| |BB'|); 1 for proportional matrices
double rv_coefficient(const Mat& a, const Mat& b);

// MSE between magnitude spectrograms
double spectrogram_mse(const Vec& x, const Vec& y, Eigen::Index win = 64,
                       Eigen::Index hop = 16);

// per-window reconstruction metrics; NaN marks a metric that does not apply
// to the window class (or hit a degenerate input)
struct WindowMetrics {
    Eigen::Index window{0};
    WindowLabel label{WindowLabel::clean};
    double smape_delta, smape_theta, smape_alpha, smape_beta;
    double smape_entropy_t, smape_entropy_s, smape_mobility;
    double jsd;
    double mse_temporal, mse_magnitude, mse_phase, mse_spectrogram;
    double psd_pearson_r, rv;
    double smape_sd_ref;

    WindowMetrics();
};

struct MetricReport {
    std::vector<WindowMetrics> rows;
    Eigen::Index clean_count{0};
    Eigen::Index noisy_count{0};
    // means over finite entries, keyed clean_<name> / noisy_<name>
    std::vector<std::pair<std::string, double>> aggregates;

    double aggregate(const std::string& key) const; // NaN when absent
};

// Clean windows get the full distortion suite against the original signal;
// noisy windows get sd-against-reference sMAPE plus PSD correlation and RV
// against their own (artifacted) signal.
MetricReport evaluate_windows(const std::vector<Vec>& original,
                              const std::vector<Vec>& recon,
                              const std::vector<WindowLabel>& labels,
                              double fs_hz, const Vec& ref_sd);

void write_metrics_csv(const MetricReport& report, const std::string& path);
void write_metrics_json(const MetricReport& report, const std::string& path);

// regularized upper incomplete gamma Q(df/2, x/2)
double chi2_survival(double x, Eigen::Index df);
double normal_cdf(double z);

struct FriedmanResult {
    double statistic{0.0};
    double p_value{1.0};
    Eigen::Index df{0};
};

// scores is (models x blocks), models >= 3; tie-corrected Friedman rank
// test. A fully tied table degenerates to statistic 0, p 1.
FriedmanResult friedman_test(const Mat& scores);

struct WilcoxonResult {
    double w_plus{0.0};
    double w_minus{0.0};
    Eigen::Index n_effective{0};
    bool exact{true};
    double p_two_sided{1.0};
    double p_one_sided{1.0}; // smaller tail
};

// paired signed-rank test; zero differences drop out, ties get average
// ranks; exact enumeration up to n = 25, tie-corrected normal approximation
// beyond. Throws DataError when every difference is zero.
WilcoxonResult wilcoxon_signed_rank(const Vec& a, const Vec& b);

struct AblationEntry {
    std::string metric;
    bool higher_better{false};
    Vec mean_per_variant;
    double friedman_p{1.0};
    Vec wilcoxon_p_vs_baseline; // NaN at index 0
    Eigen::Index best{0};
};

struct AblationReport {
    std::vector<std::string> variants;
    std::vector<AblationEntry> entries;
};

// scores[m] is (variants x blocks) for metric m; the first variant is the
// baseline of the pairwise tests
AblationReport ablation_report(const std::vector<std::string>& variants,
                               const std::vector<std::string>& metrics,
                               const std::vector<Mat>& scores,
                               const std::vector<bool>& higher_better);

void write_ablation_csv(const AblationReport& report, const std::string& path);
void write_ablation_json(const AblationReport& report, const std::string& path);

} // namespace eegrecon
