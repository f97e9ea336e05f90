#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace eegrecon {

// command argument bundles are plain structs so tests can drive commands
// in-process; every cmd_* throws the library error taxonomy and returns 0

struct SynthArgs {
    std::string spec_path; // empty -> default spec
    std::string out_path;
    std::optional<std::uint64_t> seed;
};
int cmd_synth(const SynthArgs& args);

struct PreprocessArgs {
    std::string config_path; // empty -> defaults
    std::string in_path;
    std::string out_dir;
    std::string subject;
};
int cmd_preprocess(const PreprocessArgs& args);

struct TrainArgs {
    std::string config_path;
    std::vector<std::string> window_dirs;
    std::string out_dir;
    std::string variant; // optional override, A|B|C|D
    std::string channel; // optional override
    std::optional<std::uint64_t> seed;
};
int cmd_train(const TrainArgs& args);

struct EvaluateArgs {
    std::string model_dir; // cmd_train output directory
    std::string windows_dir;
    std::string out_dir;
    bool identity{false}; // sanity path: score original against itself
    std::string channel;  // identity target when no model directory is given
};
int cmd_evaluate(const EvaluateArgs& args);

struct AblateArgs {
    std::string config_path;
    std::vector<std::string> window_dirs; // training subjects
    std::string holdout_dir;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};
int cmd_ablate(const AblateArgs& args);

// worker count for cmd_ablate variant fan-out (>= 1)
int worker_count_from_env();

// full argv front end; maps errors to exit codes 1 (config/usage),
// 2 (data), 3 (numeric)
int run_cli(int argc, const char* const* argv);

} // namespace eegrecon
