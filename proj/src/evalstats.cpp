#include "eegrecon/evalstats.hpp"

#include "eegrecon/errors.hpp"
#include "eegrecon/losses.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace eegrecon {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct Field {
    const char* name;
    double WindowMetrics::* member;
};

constexpr Field kFields[] = {
    {"smape_delta", &WindowMetrics::smape_delta},
    {"smape_theta", &WindowMetrics::smape_theta},
    {"smape_alpha", &WindowMetrics::smape_alpha},
    {"smape_beta", &WindowMetrics::smape_beta},
    {"smape_entropy_t", &WindowMetrics::smape_entropy_t},
    {"smape_entropy_s", &WindowMetrics::smape_entropy_s},
    {"smape_mobility", &WindowMetrics::smape_mobility},
    {"jsd", &WindowMetrics::jsd},
    {"mse_temporal", &WindowMetrics::mse_temporal},
    {"mse_magnitude", &WindowMetrics::mse_magnitude},
    {"mse_phase", &WindowMetrics::mse_phase},
    {"mse_spectrogram", &WindowMetrics::mse_spectrogram},
    {"psd_pearson", &WindowMetrics::psd_pearson_r},
    {"rv", &WindowMetrics::rv},
    {"smape_sd_ref", &WindowMetrics::smape_sd_ref},
};

double guarded(double (*f)(const Vec&), const Vec& x) {
    try {
        return f(x);
    } catch (const NumericError&) {
        return kNaN;
    }
}

// average ranks with ties; values ranked ascending, 1-based
Vec average_ranks(const Vec& v, double* tie_cubes) {
    const Eigen::Index n = v.size();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::sort(idx.begin(), idx.end(),
              [&](Eigen::Index a, Eigen::Index b) { return v[a] < v[b]; });
    Vec ranks(n);
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && v[idx[static_cast<std::size_t>(j + 1)]] ==
                                 v[idx[static_cast<std::size_t>(i)]])
            ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Eigen::Index t = i; t <= j; ++t)
            ranks[idx[static_cast<std::size_t>(t)]] = avg;
        if (tie_cubes) {
            const double t = static_cast<double>(j - i + 1);
            *tie_cubes += t * t * t - t;
        }
        i = j + 1;
    }
    return ranks;
}

} // namespace

WindowMetrics::WindowMetrics()
    : smape_delta(kNaN), smape_theta(kNaN), smape_alpha(kNaN), smape_beta(kNaN),
      smape_entropy_t(kNaN), smape_entropy_s(kNaN), smape_mobility(kNaN),
      jsd(kNaN), mse_temporal(kNaN), mse_magnitude(kNaN), mse_phase(kNaN),
      mse_spectrogram(kNaN), psd_pearson_r(kNaN), rv(kNaN), smape_sd_ref(kNaN) {}

double smape(double a, double b) {
    const double denom = std::abs(a) + std::abs(b);
    if (denom == 0.0) return 0.0;
    // ratio first: the quotient never exceeds 1, so the bound of 200 is exact
    return 200.0 * (std::abs(a - b) / denom);
}

double pearson(const Vec& a, const Vec& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw ConfigError("pearson needs two equal-length series of >= 2 samples");
    const double ma = a.mean(), mb = b.mean();
    const Vec da = (a.array() - ma).matrix();
    const Vec db = (b.array() - mb).matrix();
    const double va = da.squaredNorm(), vb = db.squaredNorm();
    if (va == 0.0 || vb == 0.0)
        throw NumericError("pearson undefined for a constant series");
    return da.dot(db) / std::sqrt(va * vb);
}

double js_divergence(const Vec& x, const Vec& y, Eigen::Index bins) {
    if (x.size() == 0 || y.size() == 0)
        throw ConfigError("js_divergence needs non-empty inputs");
    const double lo = std::min(x.minCoeff(), y.minCoeff());
    const double hi = std::max(x.maxCoeff(), y.maxCoeff());
    const Vec p = estimate_pdf(x, bins, lo, hi);
    const Vec q = estimate_pdf(y, bins, lo, hi);
    double js = 0.0;
    for (Eigen::Index i = 0; i < bins; ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) js += 0.5 * p[i] * std::log(p[i] / m);
        if (q[i] > 0.0) js += 0.5 * q[i] * std::log(q[i] / m);
    }
    return js;
}

double psd_pearson(const Vec& x, const Vec& y, double fs_hz, double lo_hz,
                   double hi_hz) {
    const Eigen::Index nperseg = std::min<Eigen::Index>(128, x.size());
    const Psd px = welch_psd(x, fs_hz, nperseg);
    const Psd py = welch_psd(y, fs_hz, nperseg);
    std::vector<double> ax, ay;
    for (Eigen::Index i = 0; i < px.freq_hz.size(); ++i)
        if (px.freq_hz[i] >= lo_hz && px.freq_hz[i] <= hi_hz) {
            ax.push_back(px.power[i]);
            ay.push_back(py.power[i]);
        }
    if (ax.size() < 3)
        throw ConfigError("psd_pearson band keeps fewer than 3 bins");
    const Eigen::Index m = static_cast<Eigen::Index>(ax.size());
    return pearson(Eigen::Map<const Vec>(ax.data(), m),
                   Eigen::Map<const Vec>(ay.data(), m));
}

double rv_coefficient(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ConfigError("rv_coefficient needs equal shapes");
    const double cross = (a.transpose() * b).squaredNorm();
    const double na = (a.transpose() * a).squaredNorm();
    const double nb = (b.transpose() * b).squaredNorm();
    if (na == 0.0 || nb == 0.0)
        throw NumericError("rv_coefficient undefined for a zero matrix");
    return cross / std::sqrt(na * nb);
}

double spectrogram_mse(const Vec& x, const Vec& y, Eigen::Index win,
                       Eigen::Index hop) {
    const Mat sx = stft_magnitude(x, win, hop);
    const Mat sy = stft_magnitude(y, win, hop);
    return (sx - sy).squaredNorm() / static_cast<double>(sx.size());
}

MetricReport evaluate_windows(const std::vector<Vec>& original,
                              const std::vector<Vec>& recon,
                              const std::vector<WindowLabel>& labels,
                              double fs_hz, const Vec& ref_sd) {
    const std::size_t n = original.size();
    if (recon.size() != n || labels.size() != n ||
        static_cast<std::size_t>(ref_sd.size()) != n)
        throw ConfigError("evaluate_windows input lengths disagree");
    if (fs_hz <= 0.0) throw ConfigError("sampling rate must be positive");

    MetricReport report;
    report.rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec& x = original[i];
        const Vec& r = recon[i];
        if (x.size() != r.size())
            throw DataError("window " + std::to_string(i) +
                            ": original and reconstruction lengths differ");
        WindowMetrics m;
        m.window = static_cast<Eigen::Index>(i);
        m.label = labels[i];
        try {
            m.psd_pearson_r = psd_pearson(x, r, fs_hz);
        } catch (const NumericError&) {
        }
        try {
            m.rv = rv_coefficient(stft_magnitude(x), stft_magnitude(r));
        } catch (const NumericError&) {
        }
        if (labels[i] == WindowLabel::clean) {
            ++report.clean_count;
            try {
                const Eigen::Vector4d bx = relative_band_power(x, fs_hz);
                const Eigen::Vector4d br = relative_band_power(r, fs_hz);
                m.smape_delta = smape(bx[0], br[0]);
                m.smape_theta = smape(bx[1], br[1]);
                m.smape_alpha = smape(bx[2], br[2]);
                m.smape_beta = smape(bx[3], br[3]);
            } catch (const NumericError&) {
            }
            m.smape_entropy_t = smape(guarded(entropy_temporal, x),
                                      guarded(entropy_temporal, r));
            try {
                m.smape_entropy_s =
                    smape(entropy_spectral(x, fs_hz), entropy_spectral(r, fs_hz));
            } catch (const NumericError&) {
            }
            try {
                m.smape_mobility = smape(hjorth_mobility(x), hjorth_mobility(r));
            } catch (const NumericError&) {
            }
            m.jsd = js_divergence(x, r);
            m.mse_temporal = temporal_mse(x, r);
            m.mse_magnitude = magnitude_mse(x, r);
            m.mse_phase = phase_mse(x, r);
            m.mse_spectrogram = spectrogram_mse(x, r);
        } else {
            ++report.noisy_count;
            const double sd =
                std::sqrt((r.array() - r.mean()).square().sum() /
                          static_cast<double>(r.size()));
            m.smape_sd_ref = smape(sd, ref_sd[static_cast<Eigen::Index>(i)]);
        }
        report.rows.push_back(m);
    }

    for (const Field& f : kFields) {
        for (const bool clean : {true, false}) {
            double sum = 0.0;
            Eigen::Index cnt = 0;
            for (const WindowMetrics& m : report.rows) {
                if ((m.label == WindowLabel::clean) != clean) continue;
                const double v = m.*(f.member);
                if (std::isfinite(v)) {
                    sum += v;
                    ++cnt;
                }
            }
            if (cnt > 0)
                report.aggregates.emplace_back(
                    std::string(clean ? "clean_" : "noisy_") + f.name,
                    sum / static_cast<double>(cnt));
        }
    }
    return report;
}

double MetricReport::aggregate(const std::string& key) const {
    for (const auto& [k, v] : aggregates)
        if (k == key) return v;
    return kNaN;
}

void write_metrics_csv(const MetricReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write metrics csv " + path);
    out << "window,label";
    for (const Field& f : kFields) out << ',' << f.name;
    out << '\n';
    for (const WindowMetrics& m : report.rows) {
        out << m.window << ','
            << (m.label == WindowLabel::clean ? "clean" : "noisy");
        for (const Field& f : kFields) {
            const double v = m.*(f.member);
            out << ',';
            if (std::isfinite(v)) out << fmt(v);
        }
        out << '\n';
    }
}

void write_metrics_json(const MetricReport& report, const std::string& path) {
    nlohmann::json j;
    j["clean_count"] = report.clean_count;
    j["noisy_count"] = report.noisy_count;
    nlohmann::json agg = nlohmann::json::object();
    for (const auto& [k, v] : report.aggregates) agg[k] = v;
    j["aggregates"] = agg;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write metrics json " + path);
    out << j.dump(2) << '\n';
}

namespace {

// regularized lower incomplete gamma P(a, x)
double gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw ConfigError("gamma_p domain error");
    if (x == 0.0) return 0.0;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        double term = 1.0 / a;
        double sum = term;
        for (int n = 1; n < 500; ++n) {
            term *= x / (a + n);
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-15) break;
        }
        return sum * std::exp(-x + a * std::log(x) - lg);
    }
    // Lentz continued fraction for Q(a, x)
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    const double q = std::exp(-x + a * std::log(x) - lg) * h;
    return 1.0 - q;
}

} // namespace

double chi2_survival(double x, Eigen::Index df) {
    if (df < 1) throw ConfigError("chi2_survival needs df >= 1");
    if (x <= 0.0) return 1.0;
    return std::clamp(1.0 - gamma_p(0.5 * static_cast<double>(df), 0.5 * x), 0.0,
                      1.0);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

FriedmanResult friedman_test(const Mat& scores) {
    const Eigen::Index k = scores.rows();
    const Eigen::Index n = scores.cols();
    if (k < 3 || n < 2)
        throw ConfigError("friedman_test needs >= 3 models and >= 2 blocks");
    Vec rank_sum = Vec::Zero(k);
    double tie_cubes = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const Vec ranks = average_ranks(scores.col(j), &tie_cubes);
        rank_sum += ranks;
    }
    const double nd = static_cast<double>(n);
    const double kd = static_cast<double>(k);
    FriedmanResult res;
    res.df = k - 1;
    const double correction = 1.0 - tie_cubes / (nd * kd * (kd * kd - 1.0));
    if (correction <= 0.0) return res; // every block fully tied
    const double uncorrected =
        12.0 / (nd * kd * (kd + 1.0)) * rank_sum.squaredNorm() -
        3.0 * nd * (kd + 1.0);
    res.statistic = std::max(0.0, uncorrected / correction);
    res.p_value = chi2_survival(res.statistic, res.df);
    return res;
}

WilcoxonResult wilcoxon_signed_rank(const Vec& a, const Vec& b) {
    if (a.size() != b.size())
        throw ConfigError("wilcoxon_signed_rank needs equal-length pairs");
    std::vector<double> diffs;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) diffs.push_back(d);
    }
    WilcoxonResult res;
    res.n_effective = static_cast<Eigen::Index>(diffs.size());
    if (res.n_effective == 0)
        throw DataError("wilcoxon_signed_rank: all paired differences are zero");

    const Eigen::Index n = res.n_effective;
    Vec abs_d(n);
    for (Eigen::Index i = 0; i < n; ++i) abs_d[i] = std::abs(diffs[static_cast<std::size_t>(i)]);
    double tie_cubes = 0.0;
    const Vec ranks = average_ranks(abs_d, &tie_cubes);
    for (Eigen::Index i = 0; i < n; ++i)
        if (diffs[static_cast<std::size_t>(i)] > 0.0) res.w_plus += ranks[i];
    const double total = 0.5 * static_cast<double>(n) * static_cast<double>(n + 1);
    res.w_minus = total - res.w_plus;

    if (n <= 25) {
        res.exact = true;
        // doubled ranks are exact integers even under average-rank ties
        std::vector<Eigen::Index> dr(static_cast<std::size_t>(n));
        Eigen::Index support = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            dr[static_cast<std::size_t>(i)] =
                static_cast<Eigen::Index>(std::llround(2.0 * ranks[i]));
            support += dr[static_cast<std::size_t>(i)];
        }
        std::vector<double> dist(static_cast<std::size_t>(support + 1), 0.0);
        dist[0] = 1.0;
        Eigen::Index hi = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index r = dr[static_cast<std::size_t>(i)];
            for (Eigen::Index s = hi; s >= 0; --s)
                dist[static_cast<std::size_t>(s + r)] += dist[static_cast<std::size_t>(s)];
            hi += r;
        }
        const double denom = std::pow(2.0, static_cast<double>(n));
        const Eigen::Index w2 =
            static_cast<Eigen::Index>(std::llround(2.0 * res.w_plus));
        double p_le = 0.0, p_ge = 0.0;
        for (Eigen::Index s = 0; s <= support; ++s) {
            if (s <= w2) p_le += dist[static_cast<std::size_t>(s)];
            if (s >= w2) p_ge += dist[static_cast<std::size_t>(s)];
        }
        p_le /= denom;
        p_ge /= denom;
        res.p_one_sided = std::min(p_le, p_ge);
        res.p_two_sided = std::min(1.0, 2.0 * res.p_one_sided);
    } else {
        res.exact = false;
        const double nd = static_cast<double>(n);
        const double mean = nd * (nd + 1.0) / 4.0;
        const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_cubes / 48.0;
        const double z = (res.w_plus - mean) / std::sqrt(var);
        const double lower = normal_cdf(z);
        res.p_one_sided = std::min(lower, 1.0 - lower);
        res.p_two_sided = std::min(1.0, 2.0 * res.p_one_sided);
    }
    return res;
}

AblationReport ablation_report(const std::vector<std::string>& variants,
                               const std::vector<std::string>& metrics,
                               const std::vector<Mat>& scores,
                               const std::vector<bool>& higher_better) {
    if (metrics.size() != scores.size() || metrics.size() != higher_better.size())
        throw ConfigError("ablation_report input lengths disagree");
    const Eigen::Index k = static_cast<Eigen::Index>(variants.size());
    AblationReport report;
    report.variants = variants;
    for (std::size_t m = 0; m < metrics.size(); ++m) {
        const Mat& s = scores[m];
        if (s.rows() != k)
            throw ConfigError("metric '" + metrics[m] +
                              "' score rows do not match the variant count");
        AblationEntry e;
        e.metric = metrics[m];
        e.higher_better = higher_better[m];
        e.mean_per_variant = s.rowwise().mean();
        // two variants cannot support a Friedman test; NaN marks it skipped
        e.friedman_p = k >= 3 ? friedman_test(s).p_value : kNaN;
        e.wilcoxon_p_vs_baseline = Vec::Constant(k, kNaN);
        for (Eigen::Index v = 1; v < k; ++v) {
            try {
                e.wilcoxon_p_vs_baseline[v] =
                    wilcoxon_signed_rank(s.row(v).transpose(), s.row(0).transpose())
                        .p_two_sided;
            } catch (const DataError&) {
                e.wilcoxon_p_vs_baseline[v] = 1.0; // identical scores, no evidence
            }
        }
        Eigen::Index best = 0;
        for (Eigen::Index v = 1; v < k; ++v) {
            const bool better = e.higher_better
                                    ? e.mean_per_variant[v] > e.mean_per_variant[best]
                                    : e.mean_per_variant[v] < e.mean_per_variant[best];
            if (better) best = v;
        }
        e.best = best;
        report.entries.push_back(std::move(e));
    }
    return report;
}

void write_ablation_csv(const AblationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write ablation csv " + path);
    out << "metric,higher_better,best_variant,friedman_p";
    for (const std::string& v : report.variants) out << ",mean_" << v;
    for (const std::string& v : report.variants) out << ",wilcoxon_p_" << v;
    out << '\n';
    for (const AblationEntry& e : report.entries) {
        out << e.metric << ',' << (e.higher_better ? 1 : 0) << ','
            << report.variants[static_cast<std::size_t>(e.best)] << ','
            << fmt(e.friedman_p);
        for (Eigen::Index v = 0; v < e.mean_per_variant.size(); ++v)
            out << ',' << fmt(e.mean_per_variant[v]);
        for (Eigen::Index v = 0; v < e.wilcoxon_p_vs_baseline.size(); ++v) {
            out << ',';
            if (std::isfinite(e.wilcoxon_p_vs_baseline[v]))
                out << fmt(e.wilcoxon_p_vs_baseline[v]);
        }
        out << '\n';
    }
}

void write_ablation_json(const AblationReport& report, const std::string& path) {
    nlohmann::json j;
    j["variants"] = report.variants;
    nlohmann::json entries = nlohmann::json::array();
    for (const AblationEntry& e : report.entries) {
        nlohmann::json je;
        je["metric"] = e.metric;
        je["higher_better"] = e.higher_better;
        je["best_variant"] = report.variants[static_cast<std::size_t>(e.best)];
        je["friedman_p"] = e.friedman_p;
        je["mean_per_variant"] = std::vector<double>(
            e.mean_per_variant.data(),
            e.mean_per_variant.data() + e.mean_per_variant.size());
        std::vector<double> wp(e.wilcoxon_p_vs_baseline.data(),
                               e.wilcoxon_p_vs_baseline.data() +
                                   e.wilcoxon_p_vs_baseline.size());
        je["wilcoxon_p_vs_baseline"] = wp;
        entries.push_back(je);
    }
    j["entries"] = entries;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write ablation json " + path);
    out << j.dump(2) << '\n';
}

} // namespace eegrecon
