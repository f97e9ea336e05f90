#pragma once

#include "eegrecon/model.hpp"
#include "eegrecon/synthetic.hpp"
#include "eegrecon/trainer.hpp"

#include "json.hpp"

#include <string>

namespace eegrecon {

// schema-versioned run configuration; unknown keys are rejected so typos
// fail loudly instead of silently using defaults
struct RunConfig {
    std::string montage_csv; // empty -> built-in default montage
    PreprocessSettings preprocess;
    struct ModelSection {
        Variant variant{Variant::D};
        bool reduced{false};
        Eigen::Index swd_projections{50};
        double outlier_z{3.5};
        double scale_jitter{0.1};
        bool neighbor_dropout{true};
    } model;
    TrainPlan train;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path); // empty path -> defaults

// table config for the selected variant with the section's scalar overrides
ModelConfig build_model_config(const RunConfig& rc);

Montage montage_from_config(const RunConfig& rc);

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
SyntheticSpec load_synthetic_spec(const std::string& path); // empty -> defaults

nlohmann::json to_json(const SubWindowSpec& s);
nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

// training artifacts: checkpoint.bin + train_meta.json + training_log.csv
void save_train_result(const TrainResult& result, const TrainPlan& plan,
                       const std::string& dir);

struct LoadedTrainResult {
    ModelConfig cfg;
    std::string channel;
    std::vector<std::string> neighbor_labels;
    ParamStore params;
    LossWeights weights;
    Eigen::Index best_epoch{0};
    double best_val{0.0};
    std::string stop_reason;
    ReferenceMode reference_mode{ReferenceMode::latest};
    double reference_alpha{0.3};
};

LoadedTrainResult load_train_result(const std::string& dir);

} // namespace eegrecon
