#include "eegrecon/preprocess.hpp"

#include "eegrecon/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace eegrecon {

namespace {

Eigen::Index seconds_to_samples(double seconds, double fs, const char* what) {
    const double exact = seconds * fs;
    const double rounded = std::round(exact);
    if (rounded < 1.0 || std::abs(exact - rounded) > 1e-6)
        throw ConfigError(std::string(what) + " of " + std::to_string(seconds) +
                          " s does not map to a whole sample count at fs=" +
                          std::to_string(fs));
    return static_cast<Eigen::Index>(rounded);
}

void row_stats(const Mat& w, Eigen::Index c, double* mean, double* sd) {
    const Eigen::Index n = w.cols();
    const double m = w.row(c).mean();
    const double var = (w.row(c).array() - m).square().sum() / static_cast<double>(n);
    *mean = m;
    *sd = std::sqrt(var);
}

} // namespace

Eigen::Index WindowSet::channel_index(const std::string& label) const {
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(labels.size()); ++c)
        if (labels[static_cast<std::size_t>(c)] == label) return c;
    throw ConfigError("channel '" + label + "' not present in window set");
}

void WindowSet::refresh_stats(Eigen::Index b) {
    const Mat& w = windows[static_cast<std::size_t>(b)];
    for (Eigen::Index c = 0; c < w.rows(); ++c)
        row_stats(w, c, &win_mean(b, c), &win_sd(b, c));
}

Recording preprocess_recording(const Recording& rec, const PreprocessSettings& s) {
    if (rec.fs_hz < 100.0)
        throw ConfigError("sampling rate below the 100 Hz validity floor");
    const BiquadCascade cascade = design_butterworth_bandpass(
        s.filter_order, s.band_lo_hz, s.band_hi_hz, rec.fs_hz);
    Recording out = rec;
    for (Eigen::Index c = 0; c < out.data.rows(); ++c) {
        const Vec row = out.data.row(c).transpose();
        out.data.row(c) = filter_zero_phase(cascade, row).transpose();
    }
    return out;
}

WindowSet segment_recording(const Recording& filtered, const PreprocessSettings& s,
                            const std::string& subject) {
    const Eigen::Index win =
        seconds_to_samples(s.window_s, filtered.fs_hz, "window length");
    const Eigen::Index stride = seconds_to_samples(s.stride_s, filtered.fs_hz, "stride");
    const Eigen::Index n = filtered.data.cols();
    const Eigen::Index channels = filtered.data.rows();
    if (n < win)
        throw DataError("recording shorter than one window (" + std::to_string(n) +
                        " < " + std::to_string(win) + " samples)");
    const Eigen::Index count = (n - win) / stride + 1;

    WindowSet ws;
    ws.subject = subject;
    ws.fs_hz = filtered.fs_hz;
    ws.labels = filtered.labels;
    ws.window_len = win;
    ws.stride = stride;
    ws.global_mean = filtered.data.rowwise().mean();
    ws.global_sd = Vec(channels);
    for (Eigen::Index c = 0; c < channels; ++c) {
        const double var =
            (filtered.data.row(c).array() - ws.global_mean[c]).square().sum() /
            static_cast<double>(n);
        ws.global_sd[c] = std::sqrt(var);
    }
    ws.windows.reserve(static_cast<std::size_t>(count));
    ws.origin.reserve(static_cast<std::size_t>(count));
    ws.win_mean.resize(count, channels);
    ws.win_sd.resize(count, channels);
    for (Eigen::Index b = 0; b < count; ++b) {
        const Eigen::Index start = b * stride;
        ws.windows.push_back(filtered.data.middleCols(start, win));
        ws.origin.push_back(start);
        ws.refresh_stats(b);
    }
    ws.window_labels.assign(static_cast<std::size_t>(count), WindowLabel::clean);
    return ws;
}

void recenter_perturb(WindowSet& ws, Mode mode, const PreprocessSettings& s,
                      SeededRng* rng) {
    if (mode == Mode::train && rng == nullptr)
        throw ConfigError("train-mode perturbation needs an rng");
    const Eigen::Index channels = static_cast<Eigen::Index>(ws.labels.size());
    for (Eigen::Index b = 0; b < ws.count(); ++b) {
        Mat& w = ws.windows[static_cast<std::size_t>(b)];
        for (Eigen::Index c = 0; c < channels; ++c) {
            const double mean = w.row(c).mean();
            w.row(c).array() += ws.global_mean[c] - mean;
            if (mode != Mode::train) continue;
            const double u = 2.0 * rng->uniform() - 1.0; // U[-1, 1]
            if (s.perturb_mode == PerturbMode::amplitude) {
                const double gain = 1.0 + s.perturb_frac * u;
                w.row(c) = ((w.row(c).array() - ws.global_mean[c]) * gain +
                            ws.global_mean[c])
                               .matrix();
            } else {
                w.row(c).array() += s.perturb_frac * u * ws.global_sd[c];
            }
        }
        ws.refresh_stats(b);
    }
}

void stratify_windows(WindowSet& ws, double z) {
    if (z <= 0.0) throw ConfigError("stratification threshold must be positive");
    for (Eigen::Index c = 0; c < ws.global_sd.size(); ++c)
        if (!(ws.global_sd[c] > 0.0))
            throw DataError("channel " + ws.labels[static_cast<std::size_t>(c)] +
                            " has zero global sd; cannot stratify");
    for (Eigen::Index b = 0; b < ws.count(); ++b) {
        const Mat& w = ws.windows[static_cast<std::size_t>(b)];
        bool clean = true;
        for (Eigen::Index c = 0; c < w.rows() && clean; ++c) {
            const double bound = z * ws.global_sd[c];
            clean = ((w.row(c).array() - ws.global_mean[c]).abs() <= bound).all() &&
                    ws.win_sd(b, c) > 0.0;
        }
        ws.window_labels[static_cast<std::size_t>(b)] =
            clean ? WindowLabel::clean : WindowLabel::noisy;
    }
}

ReferenceStats track_reference(const WindowSet& ws, const std::string& channel,
                               ReferenceMode mode, double alpha) {
    if (mode == ReferenceMode::ema && (alpha <= 0.0 || alpha > 1.0))
        throw ConfigError("ema smoothing factor must lie in (0, 1]");
    const Eigen::Index c = ws.channel_index(channel);
    ReferenceStats ref;
    ref.mean = Vec(ws.count());
    ref.sd = Vec(ws.count());
    bool seen_clean = false;
    double m = 0.0, sd = 0.0;
    for (Eigen::Index b = 0; b < ws.count(); ++b) {
        if (ws.window_labels[static_cast<std::size_t>(b)] == WindowLabel::clean) {
            if (!seen_clean || mode == ReferenceMode::latest) {
                m = ws.win_mean(b, c);
                sd = ws.win_sd(b, c);
            } else {
                m = alpha * ws.win_mean(b, c) + (1.0 - alpha) * m;
                sd = alpha * ws.win_sd(b, c) + (1.0 - alpha) * sd;
            }
            seen_clean = true;
        } else if (!seen_clean) {
            throw DataError("window " + std::to_string(b) +
                            " is noisy before any clean reference exists");
        }
        ref.mean[b] = m;
        ref.sd[b] = sd;
    }
    return ref;
}

void save_windowset(const WindowSet& ws, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["schema_version"] = 1;
    manifest["subject"] = ws.subject;
    manifest["source"] = ws.source;
    manifest["fs_hz"] = ws.fs_hz;
    manifest["labels"] = ws.labels;
    manifest["window_len"] = ws.window_len;
    manifest["stride"] = ws.stride;
    manifest["count"] = ws.count();
    std::vector<std::string> labels;
    labels.reserve(ws.window_labels.size());
    for (const WindowLabel l : ws.window_labels)
        labels.push_back(l == WindowLabel::clean ? "clean" : "noisy");
    manifest["window_labels"] = labels;
    manifest["origin"] = ws.origin;
    manifest["global_mean"] = std::vector<double>(
        ws.global_mean.data(), ws.global_mean.data() + ws.global_mean.size());
    manifest["global_sd"] = std::vector<double>(
        ws.global_sd.data(), ws.global_sd.data() + ws.global_sd.size());

    std::ofstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw DataError("cannot write manifest in " + dir);
    mf << manifest.dump(2) << '\n';

    std::ofstream bf(fs::path(dir) / "windows.bin", std::ios::binary);
    if (!bf) throw DataError("cannot write windows.bin in " + dir);
    std::vector<double> row(static_cast<std::size_t>(ws.window_len));
    for (const Mat& w : ws.windows)
        for (Eigen::Index c = 0; c < w.rows(); ++c) {
            for (Eigen::Index t = 0; t < w.cols(); ++t)
                row[static_cast<std::size_t>(t)] = w(c, t);
            bf.write(reinterpret_cast<const char*>(row.data()),
                     static_cast<std::streamsize>(row.size() * sizeof(double)));
        }
    if (!bf) throw DataError("short write to windows.bin in " + dir);
}

WindowSet load_windowset(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw DataError("missing manifest.json in " + dir);
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed manifest.json in " + dir + ": " + e.what());
    }
    if (manifest.value("schema_version", 0) != 1)
        throw DataError("unsupported window-set schema in " + dir);

    WindowSet ws;
    try {
        ws.subject = manifest.at("subject").get<std::string>();
        ws.source = manifest.at("source").get<std::string>();
        ws.fs_hz = manifest.at("fs_hz").get<double>();
        ws.labels = manifest.at("labels").get<std::vector<std::string>>();
        ws.window_len = manifest.at("window_len").get<Eigen::Index>();
        ws.stride = manifest.at("stride").get<Eigen::Index>();
        const auto label_names =
            manifest.at("window_labels").get<std::vector<std::string>>();
        for (const std::string& l : label_names) {
            if (l != "clean" && l != "noisy")
                throw DataError("unknown window label '" + l + "' in " + dir);
            ws.window_labels.push_back(l == "clean" ? WindowLabel::clean
                                                    : WindowLabel::noisy);
        }
        ws.origin = manifest.at("origin").get<std::vector<Eigen::Index>>();
        const auto gm = manifest.at("global_mean").get<std::vector<double>>();
        const auto gs = manifest.at("global_sd").get<std::vector<double>>();
        ws.global_mean = Eigen::Map<const Vec>(gm.data(),
                                               static_cast<Eigen::Index>(gm.size()));
        ws.global_sd = Eigen::Map<const Vec>(gs.data(),
                                             static_cast<Eigen::Index>(gs.size()));
        const auto count = manifest.at("count").get<Eigen::Index>();
        if (count != static_cast<Eigen::Index>(ws.window_labels.size()) ||
            count != static_cast<Eigen::Index>(ws.origin.size()))
            throw DataError("manifest field lengths disagree in " + dir);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest.json in " + dir + " is incomplete: " + e.what());
    }

    const Eigen::Index channels = static_cast<Eigen::Index>(ws.labels.size());
    const Eigen::Index count = static_cast<Eigen::Index>(ws.window_labels.size());
    std::ifstream bf(fs::path(dir) / "windows.bin", std::ios::binary);
    if (!bf) throw DataError("missing windows.bin in " + dir);
    std::vector<double> row(static_cast<std::size_t>(ws.window_len));
    ws.windows.reserve(static_cast<std::size_t>(count));
    for (Eigen::Index b = 0; b < count; ++b) {
        Mat w(channels, ws.window_len);
        for (Eigen::Index c = 0; c < channels; ++c) {
            bf.read(reinterpret_cast<char*>(row.data()),
                    static_cast<std::streamsize>(row.size() * sizeof(double)));
            if (!bf) throw DataError("windows.bin truncated in " + dir);
            for (Eigen::Index t = 0; t < ws.window_len; ++t)
                w(c, t) = row[static_cast<std::size_t>(t)];
        }
        ws.windows.push_back(std::move(w));
    }
    char extra = 0;
    if (bf.read(&extra, 1))
        throw DataError("windows.bin larger than the manifest promises in " + dir);
    ws.win_mean.resize(count, channels);
    ws.win_sd.resize(count, channels);
    for (Eigen::Index b = 0; b < count; ++b) ws.refresh_stats(b);
    return ws;
}

} // namespace eegrecon
