#include "eegrecon/recording.hpp"

#include "eegrecon/errors.hpp"
#include "eegrecon/montage.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace eegrecon {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& cell, int lineno, const std::string& path) {
    double v = 0.0;
    const char* b = cell.data();
    const char* e = b + cell.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || p != e)
        throw DataError("recording: non-numeric sample '" + cell + "' at row " +
                        std::to_string(lineno) + " in " + path);
    return v;
}

void split_csv(const std::string& line, std::vector<std::string>& out) {
    out.clear();
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
}

std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

} // namespace

Eigen::Index Recording::channel_index(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return static_cast<Eigen::Index>(i);
    throw DataError("recording: no channel labelled " + label);
}

void validate_recording(const Recording& rec) {
    if (!(rec.fs_hz > 0.0)) throw DataError("recording: fs must be > 0");
    if (rec.labels.size() != static_cast<std::size_t>(rec.data.rows()))
        throw DataError("recording: label count does not match channel rows");
    if (rec.data.cols() < 1) throw DataError("recording: no samples");
    if (!rec.data.allFinite()) throw DataError("recording: non-finite sample");
}

Recording load_recording(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("recording: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("recording: empty file " + path);
    std::string header = trim(line);
    if (header.rfind("fs=", 0) != 0)
        throw DataError("recording: malformed header (expected fs=<Hz>) in " + path);
    Recording rec;
    {
        std::string fss = header.substr(3);
        const char* b = fss.data();
        auto [p, ec] = std::from_chars(b, b + fss.size(), rec.fs_hz);
        if (ec != std::errc{} || p != b + fss.size() || !(rec.fs_hz > 0.0))
            throw DataError("recording: invalid sampling rate '" + fss + "' in " + path);
    }
    if (!std::getline(in, line))
        throw DataError("recording: missing label row in " + path);
    split_csv(line, rec.labels);
    if (rec.labels.empty()) throw DataError("recording: empty label row in " + path);

    const std::size_t c = rec.labels.size();
    std::vector<double> samples;
    std::vector<std::string> cells;
    int lineno = 2;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        split_csv(line, cells);
        if (cells.size() != c)
            throw DataError("recording: row " + std::to_string(lineno) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(c) + " in " + path);
        for (const auto& cell : cells) samples.push_back(parse_cell(cell, lineno, path));
        ++n;
    }
    if (n == 0) throw DataError("recording: no sample rows in " + path);
    rec.data.resize(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(n));
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t ch = 0; ch < c; ++ch)
            rec.data(static_cast<Eigen::Index>(ch), static_cast<Eigen::Index>(t)) =
                samples[t * c + ch];
    validate_recording(rec);
    return rec;
}

void save_recording(const Recording& rec, const std::string& path) {
    validate_recording(rec);
    std::ofstream out(path);
    if (!out) throw DataError("recording: cannot write " + path);
    out << "fs=" << format_double(rec.fs_hz) << "\n";
    for (std::size_t i = 0; i < rec.labels.size(); ++i) {
        if (i) out << ",";
        out << rec.labels[i];
    }
    out << "\n";
    for (Eigen::Index t = 0; t < rec.data.cols(); ++t) {
        for (Eigen::Index ch = 0; ch < rec.data.rows(); ++ch) {
            if (ch) out << ",";
            out << format_double(rec.data(ch, t));
        }
        out << "\n";
    }
    if (!out) throw DataError("recording: write failed for " + path);
}

void check_labels_against_montage(const Recording& rec, const Montage& montage) {
    for (const auto& label : rec.labels)
        if (!montage.has(label))
            throw DataError("recording: channel label " + label +
                            " not present in montage");
}

} // namespace eegrecon
