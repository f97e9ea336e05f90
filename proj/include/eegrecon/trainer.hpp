#pragma once

#include "eegrecon/losses.hpp"
#include "eegrecon/model.hpp"
#include "eegrecon/montage.hpp"
#include "eegrecon/preprocess.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace eegrecon {

struct TrainPlan {
    std::string channel;
    std::string held_out_subject; // window sets of this subject are skipped
    std::uint64_t seed{42};
    Eigen::Index batch{64};
    double lr{0.001};
    Eigen::Index max_epochs{250};
    Eigen::Index patience{25};
    double val_fraction{0.2};
    double grad_clip{5.0};
    double neighbor_threshold{0.05};
    ReferenceMode reference_mode{ReferenceMode::latest};
    double reference_alpha{0.3};
    PreprocessSettings preprocess; // perturbation knobs reused per epoch
};

// one training example: neighbor columns, target row, scaling reference
struct DataItem {
    Mat x; // (window x k), neighbor-map order
    Vec y;
    double ref_mean{0.0};
    double ref_sd{1.0};
    Vec ch_gmean; // global stats, target first then neighbors
    Vec ch_gsd;
};

struct Dataset {
    std::vector<DataItem> train;
    std::vector<DataItem> val;
    std::vector<std::string> neighbor_labels;
};

// pools the clean windows of every set, shuffles with the plan seed and
// splits train/val; throws DataError below 2 * batch clean windows
Dataset assemble_dataset(const std::vector<WindowSet>& sets,
                         const Montage& montage, const TrainPlan& plan);

// fresh +-frac amplitude (or additive-mean) jitter; refreshes ref stats
void perturb_item(DataItem& item, const PreprocessSettings& s, SeededRng& rng);

struct EarlyStopper {
    Eigen::Index patience{25};
    double best{std::numeric_limits<double>::infinity()};
    Eigen::Index best_epoch{0};

    // true when value improves the best so far
    bool observe(Eigen::Index epoch, double value) {
        if (value < best) {
            best = value;
            best_epoch = epoch;
            return true;
        }
        return false;
    }
    bool should_stop(Eigen::Index epoch) const {
        return epoch - best_epoch >= patience;
    }
};

struct EpochLog {
    Eigen::Index epoch{0};
    LossBreakdown train;
    LossBreakdown val;
    double wall_s{0.0};
};

struct TrainTrace {
    std::vector<EpochLog> epochs;
    Eigen::Index best_epoch{0};
    double best_val{std::numeric_limits<double>::infinity()};
    std::string stop_reason;
};

struct TrainResult {
    ModelConfig cfg;
    std::vector<std::string> neighbor_labels;
    ParamStore params; // best-epoch snapshot
    LossWeights weights;
    TrainTrace trace;
};

TrainResult train_channel(const std::vector<WindowSet>& sets,
                          const Montage& montage, const ModelConfig& cfg,
                          const TrainPlan& plan);

// CSV, one row per epoch; wall time is the last column so deterministic
// comparisons can strip it
void write_training_log(const TrainTrace& trace, const std::string& path);

struct Reconstruction {
    std::vector<Vec> original; // target-channel rows
    std::vector<Vec> output;
    std::vector<WindowLabel> labels;
    Vec ref_mean; // per window, tracked reference
    Vec ref_sd;
};

// eval-mode reconstruction of every window; neighbor_labels must match the
// training-time neighbor order
Reconstruction reconstruct_channel(const ModelInstance& model, const WindowSet& ws,
                                   const std::string& channel,
                                   const std::vector<std::string>& neighbor_labels,
                                   ReferenceMode mode = ReferenceMode::latest,
                                   double alpha = 0.3);

} // namespace eegrecon
