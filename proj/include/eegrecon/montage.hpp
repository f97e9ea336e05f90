#pragma once

#include <map>
#include <string>
#include <vector>

namespace eegrecon {

// normalized head coordinates, unit sphere projected to the plane
struct ElectrodePosition {
    std::string label;
    double x{0.0};
    double y{0.0};
};

struct Montage {
    std::vector<ElectrodePosition> electrodes;

    bool has(const std::string& label) const;
    const ElectrodePosition& at(const std::string& label) const;
};

// neighbor lists per channel, sorted by ascending distance (ties by label)
struct NeighborMap {
    double threshold{0.0};
    std::map<std::string, std::vector<std::string>> neighbors;

    const std::vector<std::string>& of(const std::string& label) const;
};

// CSV rows "label,x,y"; header row optional (detected by non-numeric x)
Montage load_montage(const std::string& path);

// 28 electrodes on the central 4x7 grid (FC / C / CP / P rows), spacing 0.04
Montage default_montage();

// Neighbors are channels within L2 distance <= threshold, self excluded.
// Only the given channel subset participates. Channels with no neighbor at
// all raise a configuration error naming the channel.
NeighborMap build_neighbor_map(const Montage& montage,
                               const std::vector<std::string>& channels,
                               double threshold = 0.05);

} // namespace eegrecon
