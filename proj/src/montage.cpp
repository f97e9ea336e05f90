#include "eegrecon/montage.hpp"

#include "eegrecon/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace eegrecon {

namespace {

bool parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = b + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    auto [p, ec] = std::from_chars(b, e, out);
    if (ec != std::errc{}) return false;
    while (p < e && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    return p == e;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, e - b + 1);
}

} // namespace

bool Montage::has(const std::string& label) const {
    return std::any_of(electrodes.begin(), electrodes.end(),
                       [&](const ElectrodePosition& p) { return p.label == label; });
}

const ElectrodePosition& Montage::at(const std::string& label) const {
    for (const auto& p : electrodes)
        if (p.label == label) return p;
    throw DataError("montage: unknown channel label " + label);
}

const std::vector<std::string>& NeighborMap::of(const std::string& label) const {
    auto it = neighbors.find(label);
    if (it == neighbors.end())
        throw DataError("neighbor map: unknown channel label " + label);
    return it->second;
}

Montage load_montage(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("montage: cannot open " + path);
    Montage m;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty()) continue;
        std::stringstream ss(t);
        std::string label, xs, ys;
        if (!std::getline(ss, label, ',') || !std::getline(ss, xs, ',') ||
            !std::getline(ss, ys)) {
            throw DataError("montage: malformed row " + std::to_string(lineno) +
                            " in " + path);
        }
        label = trim(label);
        double x = 0.0, y = 0.0;
        if (!parse_double(trim(xs), x) || !parse_double(trim(ys), y)) {
            if (lineno == 1) continue; // header row
            throw DataError("montage: non-numeric coordinate at row " +
                            std::to_string(lineno) + " in " + path);
        }
        if (label.empty())
            throw DataError("montage: empty label at row " + std::to_string(lineno));
        m.electrodes.push_back({label, x, y});
    }
    if (m.electrodes.empty()) throw DataError("montage: no electrodes in " + path);
    for (std::size_t i = 0; i < m.electrodes.size(); ++i)
        for (std::size_t j = i + 1; j < m.electrodes.size(); ++j)
            if (m.electrodes[i].label == m.electrodes[j].label)
                throw DataError("montage: duplicate label " + m.electrodes[i].label);
    return m;
}

Montage default_montage() {
    // central grid rows FC, C, CP, P at columns 5,3,1,z,2,4,6; spacing 0.04 so
    // lateral/vertical pairs fall inside the 0.05 neighbor radius and
    // diagonals (0.0566) fall outside it
    static const char* rows[4] = {"FC", "C", "CP", "P"};
    static const char* cols[7] = {"5", "3", "1", "z", "2", "4", "6"};
    Montage m;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 7; ++c) {
            ElectrodePosition p;
            p.label = std::string(rows[r]) + cols[c];
            p.x = 0.04 * (c - 3);
            p.y = 0.04 * (3 - r);
            m.electrodes.push_back(p);
        }
    }
    return m;
}

NeighborMap build_neighbor_map(const Montage& montage,
                               const std::vector<std::string>& channels,
                               double threshold) {
    if (threshold <= 0.0)
        throw ConfigError("neighbor map: threshold must be > 0");
    NeighborMap nm;
    nm.threshold = threshold;
    for (const auto& ch : channels) {
        const ElectrodePosition& a = montage.at(ch);
        std::vector<std::pair<double, std::string>> found;
        for (const auto& other : channels) {
            if (other == ch) continue;
            const ElectrodePosition& b = montage.at(other);
            double d = std::hypot(a.x - b.x, a.y - b.y);
            if (d <= threshold) found.emplace_back(d, other);
        }
        if (found.empty())
            throw ConfigError("neighbor map: channel " + ch +
                              " has no neighbors within " + std::to_string(threshold));
        std::sort(found.begin(), found.end());
        auto& list = nm.neighbors[ch];
        for (auto& [d, label] : found) list.push_back(label);
    }
    return nm;
}

} // namespace eegrecon
