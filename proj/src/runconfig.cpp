#include "eegrecon/runconfig.hpp"

#include "eegrecon/checkpoint.hpp"
#include "eegrecon/errors.hpp"

#include <filesystem>
#include <fstream>

namespace eegrecon {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const char* section,
                    std::initializer_list<const char*> allowed) {
    if (!j.is_object())
        throw ConfigError(std::string(section) + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) {
                ok = true;
                break;
            }
        if (!ok)
            throw ConfigError("unknown key '" + key + "' in " + section);
    }
}

template <typename T>
void fetch(const json& j, const char* key, T* out) {
    if (!j.contains(key)) return;
    try {
        *out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

json parse_text(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("cannot parse ") + what + ": " + e.what());
    }
}

json read_json_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw ConfigError(std::string("cannot open ") + what + " " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return parse_text(text, what);
}

PerturbMode perturb_mode_from(const std::string& s) {
    if (s == "amplitude") return PerturbMode::amplitude;
    if (s == "additive_mean") return PerturbMode::additive_mean;
    throw ConfigError("perturb_mode must be 'amplitude' or 'additive_mean', got '" +
                      s + "'");
}

ReferenceMode reference_mode_from(const std::string& s) {
    if (s == "latest") return ReferenceMode::latest;
    if (s == "ema") return ReferenceMode::ema;
    throw ConfigError("reference_mode must be 'latest' or 'ema', got '" + s + "'");
}

const char* reference_mode_name(ReferenceMode m) {
    return m == ReferenceMode::latest ? "latest" : "ema";
}

RunConfig from_json(const json& j) {
    reject_unknown(j, "run config",
                   {"schema_version", "montage_csv", "preprocess", "model", "train"});
    if (j.value("schema_version", 0) != 1)
        throw ConfigError("run config schema_version must be 1");

    RunConfig rc;
    fetch(j, "montage_csv", &rc.montage_csv);

    if (j.contains("preprocess")) {
        const json& p = j.at("preprocess");
        reject_unknown(p, "preprocess section",
                       {"filter_order", "band_lo_hz", "band_hi_hz", "window_s",
                        "stride_s", "stratify_z", "perturb_mode", "perturb_frac"});
        PreprocessSettings& s = rc.preprocess;
        fetch(p, "filter_order", &s.filter_order);
        fetch(p, "band_lo_hz", &s.band_lo_hz);
        fetch(p, "band_hi_hz", &s.band_hi_hz);
        fetch(p, "window_s", &s.window_s);
        fetch(p, "stride_s", &s.stride_s);
        fetch(p, "stratify_z", &s.stratify_z);
        fetch(p, "perturb_frac", &s.perturb_frac);
        std::string mode;
        fetch(p, "perturb_mode", &mode);
        if (!mode.empty()) s.perturb_mode = perturb_mode_from(mode);
        if (s.perturb_frac < 0.0 || s.perturb_frac >= 1.0)
            throw ConfigError("perturb_frac must lie in [0, 1)");
        if (!(s.band_lo_hz > 0.0) || !(s.band_hi_hz > s.band_lo_hz))
            throw ConfigError("band edges must satisfy 0 < lo < hi");
    }

    if (j.contains("model")) {
        const json& m = j.at("model");
        reject_unknown(m, "model section",
                       {"variant", "reduced", "swd_projections", "outlier_z",
                        "scale_jitter", "neighbor_dropout"});
        std::string variant;
        fetch(m, "variant", &variant);
        if (!variant.empty()) rc.model.variant = variant_from_string(variant);
        fetch(m, "reduced", &rc.model.reduced);
        fetch(m, "swd_projections", &rc.model.swd_projections);
        fetch(m, "outlier_z", &rc.model.outlier_z);
        fetch(m, "scale_jitter", &rc.model.scale_jitter);
        fetch(m, "neighbor_dropout", &rc.model.neighbor_dropout);
        if (rc.model.swd_projections < 1)
            throw ConfigError("swd_projections must be >= 1");
        if (!(rc.model.outlier_z > 0.0))
            throw ConfigError("outlier_z must be positive");
        if (rc.model.scale_jitter < 0.0 || rc.model.scale_jitter >= 1.0)
            throw ConfigError("scale_jitter must lie in [0, 1)");
    }

    if (j.contains("train")) {
        const json& t = j.at("train");
        reject_unknown(t, "train section",
                       {"channel", "held_out_subject", "seed", "batch", "lr",
                        "max_epochs", "patience", "val_fraction", "grad_clip",
                        "neighbor_threshold", "reference_mode", "reference_alpha"});
        TrainPlan& p = rc.train;
        fetch(t, "channel", &p.channel);
        fetch(t, "held_out_subject", &p.held_out_subject);
        fetch(t, "seed", &p.seed);
        fetch(t, "batch", &p.batch);
        fetch(t, "lr", &p.lr);
        fetch(t, "max_epochs", &p.max_epochs);
        fetch(t, "patience", &p.patience);
        fetch(t, "val_fraction", &p.val_fraction);
        fetch(t, "grad_clip", &p.grad_clip);
        fetch(t, "neighbor_threshold", &p.neighbor_threshold);
        fetch(t, "reference_alpha", &p.reference_alpha);
        std::string mode;
        fetch(t, "reference_mode", &mode);
        if (!mode.empty()) p.reference_mode = reference_mode_from(mode);
        if (p.batch < 1) throw ConfigError("batch must be >= 1");
        if (!(p.lr > 0.0)) throw ConfigError("lr must be positive");
        if (p.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
        if (p.patience < 1) throw ConfigError("patience must be >= 1");
        if (!(p.val_fraction > 0.0) || p.val_fraction >= 1.0)
            throw ConfigError("val_fraction must lie in (0, 1)");
        if (!(p.neighbor_threshold > 0.0))
            throw ConfigError("neighbor_threshold must be positive");
    }
    rc.train.preprocess = rc.preprocess;
    return rc;
}

} // namespace

RunConfig parse_run_config(const std::string& text) {
    return from_json(parse_text(text, "run config"));
}

RunConfig load_run_config(const std::string& path) {
    if (path.empty()) {
        RunConfig rc;
        rc.train.preprocess = rc.preprocess;
        return rc;
    }
    return from_json(read_json_file(path, "run config"));
}

ModelConfig build_model_config(const RunConfig& rc) {
    ModelConfig cfg = rc.model.reduced ? ModelConfig::reduced(rc.model.variant)
                                       : ModelConfig::standard(rc.model.variant);
    cfg.swd_projections = rc.model.swd_projections;
    cfg.outlier_z = rc.model.outlier_z;
    cfg.scale_jitter = rc.model.scale_jitter;
    cfg.neighbor_dropout = rc.model.neighbor_dropout;
    return cfg;
}

Montage montage_from_config(const RunConfig& rc) {
    if (rc.montage_csv.empty()) return default_montage();
    return load_montage(rc.montage_csv);
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
    reject_unknown(j, "synthetic spec",
                   {"fs_hz", "duration_s", "channels", "band_amp_uv",
                    "band_freq_hz", "envelope_depth", "pink_uv",
                    "spike_rate_per_min", "spike_multiplier", "seed"});
    SyntheticSpec spec;
    fetch(j, "fs_hz", &spec.fs_hz);
    fetch(j, "duration_s", &spec.duration_s);
    fetch(j, "channels", &spec.channels);
    fetch(j, "band_amp_uv", &spec.band_amp_uv);
    fetch(j, "band_freq_hz", &spec.band_freq_hz);
    fetch(j, "envelope_depth", &spec.envelope_depth);
    fetch(j, "pink_uv", &spec.pink_uv);
    fetch(j, "spike_rate_per_min", &spec.spike_rate_per_min);
    fetch(j, "spike_multiplier", &spec.spike_multiplier);
    fetch(j, "seed", &spec.seed);
    if (!(spec.fs_hz > 0.0) || !(spec.duration_s > 0.0))
        throw ConfigError("synthetic spec needs positive fs_hz and duration_s");
    if (spec.envelope_depth < 0.0 || spec.envelope_depth >= 1.0)
        throw ConfigError("envelope_depth must lie in [0, 1)");
    return spec;
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
    if (path.empty()) return SyntheticSpec{};
    return synthetic_spec_from_json(read_json_file(path, "synthetic spec"));
}

nlohmann::json to_json(const SubWindowSpec& s) {
    return json{{"filters", s.filters},   {"in_len", s.in_len},
                {"fs_feature", s.fs_feature}, {"kernel", s.kernel},
                {"sub_win", s.sub_win},   {"upsample", s.upsample},
                {"stride", s.stride},     {"out_len", s.out_len}};
}

nlohmann::json to_json(const ModelConfig& cfg) {
    json enc = json::array();
    for (const SubWindowSpec& s : cfg.encoder) enc.push_back(to_json(s));
    json dec = json::array();
    for (const SubWindowSpec& s : cfg.decoder) dec.push_back(to_json(s));
    return json{{"variant", variant_to_string(cfg.variant)},
                {"window", cfg.window},
                {"latent_dim", cfg.latent_dim},
                {"slide_win", cfg.slide_win},
                {"slide_stride", cfg.slide_stride},
                {"base_kernel", cfg.base_kernel},
                {"swd_projections", cfg.swd_projections},
                {"outlier_z", cfg.outlier_z},
                {"scale_jitter", cfg.scale_jitter},
                {"neighbor_dropout", cfg.neighbor_dropout},
                {"encoder", enc},
                {"decoder", dec}};
}

namespace {

SubWindowSpec sub_window_from_json(const json& j) {
    reject_unknown(j, "stage spec",
                   {"filters", "in_len", "fs_feature", "kernel", "sub_win",
                    "upsample", "stride", "out_len"});
    SubWindowSpec s;
    fetch(j, "filters", &s.filters);
    fetch(j, "in_len", &s.in_len);
    fetch(j, "fs_feature", &s.fs_feature);
    fetch(j, "kernel", &s.kernel);
    fetch(j, "sub_win", &s.sub_win);
    fetch(j, "upsample", &s.upsample);
    fetch(j, "stride", &s.stride);
    fetch(j, "out_len", &s.out_len);
    return s;
}

} // namespace

ModelConfig model_config_from_json(const nlohmann::json& j) {
    reject_unknown(j, "model config",
                   {"variant", "window", "latent_dim", "slide_win", "slide_stride",
                    "base_kernel", "swd_projections", "outlier_z", "scale_jitter",
                    "neighbor_dropout", "encoder", "decoder"});
    ModelConfig cfg;
    std::string variant;
    fetch(j, "variant", &variant);
    if (!variant.empty()) cfg.variant = variant_from_string(variant);
    fetch(j, "window", &cfg.window);
    fetch(j, "latent_dim", &cfg.latent_dim);
    fetch(j, "slide_win", &cfg.slide_win);
    fetch(j, "slide_stride", &cfg.slide_stride);
    fetch(j, "base_kernel", &cfg.base_kernel);
    fetch(j, "swd_projections", &cfg.swd_projections);
    fetch(j, "outlier_z", &cfg.outlier_z);
    fetch(j, "scale_jitter", &cfg.scale_jitter);
    fetch(j, "neighbor_dropout", &cfg.neighbor_dropout);
    cfg.encoder.clear();
    cfg.decoder.clear();
    try {
        for (const json& s : j.at("encoder"))
            cfg.encoder.push_back(sub_window_from_json(s));
        for (const json& s : j.at("decoder"))
            cfg.decoder.push_back(sub_window_from_json(s));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad model config tables: ") + e.what());
    }
    validate_config(cfg);
    return cfg;
}

void save_train_result(const TrainResult& result, const TrainPlan& plan,
                       const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_checkpoint(result.params, (fs::path(dir) / "checkpoint.bin").string());
    write_training_log(result.trace, (fs::path(dir) / "training_log.csv").string());

    json meta;
    meta["schema_version"] = 1;
    meta["channel"] = plan.channel;
    meta["seed"] = plan.seed;
    meta["neighbor_labels"] = result.neighbor_labels;
    meta["model"] = to_json(result.cfg);
    meta["s_mse"] = result.weights.s_mse;
    meta["s_mag"] = result.weights.s_mag;
    meta["best_epoch"] = result.trace.best_epoch;
    meta["best_val_total"] = result.trace.best_val;
    meta["stop_reason"] = result.trace.stop_reason;
    meta["epochs_run"] = result.trace.epochs.size();
    meta["reference_mode"] = reference_mode_name(plan.reference_mode);
    meta["reference_alpha"] = plan.reference_alpha;
    std::ofstream out(fs::path(dir) / "train_meta.json");
    if (!out) throw DataError("cannot write train_meta.json in " + dir);
    out << meta.dump(2) << '\n';
}

LoadedTrainResult load_train_result(const std::string& dir) {
    namespace fs = std::filesystem;
    const json meta =
        read_json_file((fs::path(dir) / "train_meta.json").string(), "train meta");
    if (meta.value("schema_version", 0) != 1)
        throw DataError("unsupported train_meta schema in " + dir);
    LoadedTrainResult r;
    try {
        r.channel = meta.at("channel").get<std::string>();
        r.neighbor_labels =
            meta.at("neighbor_labels").get<std::vector<std::string>>();
        r.cfg = model_config_from_json(meta.at("model"));
        r.weights.s_mse = meta.at("s_mse").get<double>();
        r.weights.s_mag = meta.at("s_mag").get<double>();
        r.best_epoch = meta.at("best_epoch").get<Eigen::Index>();
        r.best_val = meta.at("best_val_total").get<double>();
        r.stop_reason = meta.at("stop_reason").get<std::string>();
        r.reference_mode =
            reference_mode_from(meta.at("reference_mode").get<std::string>());
        r.reference_alpha = meta.at("reference_alpha").get<double>();
    } catch (const json::exception& e) {
        throw DataError("train_meta.json in " + dir + " is incomplete: " + e.what());
    }
    r.params = load_checkpoint((fs::path(dir) / "checkpoint.bin").string());
    return r;
}

} // namespace eegrecon
