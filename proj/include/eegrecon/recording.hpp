#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace eegrecon {

// multichannel EEG segment; data is channels x samples, microvolts
struct Recording {
    double fs_hz{0.0};
    std::vector<std::string> labels;
    Eigen::MatrixXd data; // (C, N)

    Eigen::Index channel_count() const { return data.rows(); }
    Eigen::Index sample_count() const { return data.cols(); }
    Eigen::Index channel_index(const std::string& label) const;
};

// throws DataError when fs <= 0, labels/rows mismatch, or non-finite samples
void validate_recording(const Recording& rec);

// CSV layout: first row "fs=<Hz>", second row channel labels, then one row
// per time sample with one decimal float per channel. Values are written via
// shortest round-trip formatting, so save -> load is bit exact.
Recording load_recording(const std::string& path);
void save_recording(const Recording& rec, const std::string& path);

// raises DataError naming the first recording label missing from the montage
void check_labels_against_montage(const Recording& rec,
                                  const class Montage& montage);

} // namespace eegrecon
