#include "eegrecon/cli.hpp"

#include "eegrecon/checkpoint.hpp"
#include "eegrecon/errors.hpp"
#include "eegrecon/evalstats.hpp"
#include "eegrecon/runconfig.hpp"
#include "eegrecon/synthetic.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace eegrecon {

namespace {

std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<WindowSet> load_sets(const std::vector<std::string>& dirs) {
    if (dirs.empty()) throw ConfigError("no window-set directories given");
    std::vector<WindowSet> sets;
    sets.reserve(dirs.size());
    for (const std::string& d : dirs) sets.push_back(load_windowset(d));
    return sets;
}

Eigen::Index count_labels(const WindowSet& ws, WindowLabel label) {
    Eigen::Index n = 0;
    for (const WindowLabel l : ws.window_labels)
        if (l == label) ++n;
    return n;
}

struct VariantOutcome {
    Variant variant{Variant::A};
    TrainResult train;
    MetricReport report;
    Eigen::Index param_total{0};
};

MetricReport evaluate_loaded(const LoadedTrainResult& m, const WindowSet& ws) {
    ModelInstance model(m.cfg,
                        static_cast<Eigen::Index>(m.neighbor_labels.size()));
    restore_values(model.store(), m.params);
    const Reconstruction rec =
        reconstruct_channel(model, ws, m.channel, m.neighbor_labels,
                            m.reference_mode, m.reference_alpha);
    return evaluate_windows(rec.original, rec.output, rec.labels, ws.fs_hz,
                            rec.ref_sd);
}

} // namespace

int cmd_synth(const SynthArgs& args) {
    SyntheticSpec spec = load_synthetic_spec(args.spec_path);
    if (args.seed) spec.seed = *args.seed;
    if (args.out_path.empty()) throw ConfigError("synth needs an output path");
    const SyntheticResult res = generate_synthetic(spec);
    save_recording(res.recording, args.out_path);
    std::cout << "wrote " << args.out_path << ": "
              << res.recording.channel_count() << " channels x "
              << res.recording.sample_count() << " samples at "
              << fmt(res.recording.fs_hz) << " Hz\n";
    std::cout << "band amplitudes (uV):";
    for (std::size_t i = 0; i < kBandNames.size(); ++i)
        std::cout << ' ' << kBandNames[i] << '=' << fmt(res.band_amp_uv[i]);
    std::cout << "\nspike events: " << res.spikes.size() << '\n';
    return 0;
}

int cmd_preprocess(const PreprocessArgs& args) {
    const RunConfig rc = load_run_config(args.config_path);
    if (args.in_path.empty() || args.out_dir.empty())
        throw ConfigError("preprocess needs --in and --out");
    const Recording rec = load_recording(args.in_path);
    const Montage montage = montage_from_config(rc);
    check_labels_against_montage(rec, montage);
    const Recording filtered = preprocess_recording(rec, rc.preprocess);
    const std::string subject =
        args.subject.empty() ? std::filesystem::path(args.in_path).stem().string()
                             : args.subject;
    WindowSet ws = segment_recording(filtered, rc.preprocess, subject);
    ws.source = args.in_path;
    recenter_perturb(ws, Mode::eval, rc.preprocess, nullptr);
    stratify_windows(ws, rc.preprocess.stratify_z);
    save_windowset(ws, args.out_dir);
    std::cout << "wrote " << args.out_dir << ": " << ws.count() << " windows ("
              << count_labels(ws, WindowLabel::clean) << " clean, "
              << count_labels(ws, WindowLabel::noisy) << " noisy), window "
              << ws.window_len << ", stride " << ws.stride << '\n';
    return 0;
}

int cmd_train(const TrainArgs& args) {
    RunConfig rc = load_run_config(args.config_path);
    if (!args.variant.empty()) rc.model.variant = variant_from_string(args.variant);
    if (!args.channel.empty()) rc.train.channel = args.channel;
    if (args.seed) rc.train.seed = *args.seed;
    if (rc.train.channel.empty())
        throw ConfigError("no target channel (config train.channel or --channel)");
    if (args.out_dir.empty()) throw ConfigError("train needs --out");

    const std::vector<WindowSet> sets = load_sets(args.window_dirs);
    const Montage montage = montage_from_config(rc);
    const ModelConfig cfg = build_model_config(rc);
    const TrainResult result = train_channel(sets, montage, cfg, rc.train);
    save_train_result(result, rc.train, args.out_dir);
    std::cout << "variant " << variant_to_string(cfg.variant) << " channel "
              << rc.train.channel << ": best epoch " << result.trace.best_epoch
              << " (val total " << fmt(result.trace.best_val) << ") after "
              << result.trace.epochs.size() << " epochs, stop: "
              << result.trace.stop_reason << '\n';
    return 0;
}

int cmd_evaluate(const EvaluateArgs& args) {
    if (args.windows_dir.empty() || args.out_dir.empty())
        throw ConfigError("evaluate needs --windows and --out");
    const WindowSet ws = load_windowset(args.windows_dir);
    MetricReport report;
    if (args.identity) {
        std::string channel = args.channel;
        if (channel.empty()) {
            if (args.model_dir.empty())
                throw ConfigError("identity evaluation needs --channel or --model");
            channel = load_train_result(args.model_dir).channel;
        }
        const Eigen::Index t_idx = ws.channel_index(channel);
        const ReferenceStats ref = track_reference(ws, channel);
        std::vector<Vec> original;
        original.reserve(static_cast<std::size_t>(ws.count()));
        for (const Mat& w : ws.windows)
            original.push_back(w.row(t_idx).transpose());
        report = evaluate_windows(original, original, ws.window_labels, ws.fs_hz,
                                  ref.sd);
    } else {
        if (args.model_dir.empty()) throw ConfigError("evaluate needs --model");
        const LoadedTrainResult m = load_train_result(args.model_dir);
        report = evaluate_loaded(m, ws);
    }
    std::filesystem::create_directories(args.out_dir);
    const std::filesystem::path out(args.out_dir);
    write_metrics_csv(report, (out / "metrics.csv").string());
    write_metrics_json(report, (out / "metrics.json").string());
    std::cout << "metrics over " << report.rows.size() << " windows ("
              << report.clean_count << " clean, " << report.noisy_count
              << " noisy)\n";
    for (const char* key :
         {"clean_psd_pearson", "clean_rv", "clean_mse_temporal",
          "noisy_smape_sd_ref"}) {
        const double v = report.aggregate(key);
        if (std::isfinite(v)) std::cout << key << " = " << fmt(v) << '\n';
    }
    return 0;
}

int worker_count_from_env() {
    const char* env = std::getenv("EEGRECON_WORKERS");
    if (env == nullptr || *env == '\0') return 1;
    int value = 0;
    const auto res = std::from_chars(env, env + std::string_view(env).size(), value);
    if (res.ec != std::errc{} || *res.ptr != '\0' || value < 1)
        throw ConfigError("EEGRECON_WORKERS must be a positive integer");
    return value;
}

int cmd_ablate(const AblateArgs& args) {
    RunConfig rc = load_run_config(args.config_path);
    if (args.seed) rc.train.seed = *args.seed;
    if (rc.train.channel.empty())
        throw ConfigError("no target channel (config train.channel)");
    if (args.holdout_dir.empty() || args.out_dir.empty())
        throw ConfigError("ablate needs --holdout and --out");

    const std::vector<WindowSet> sets = load_sets(args.window_dirs);
    const WindowSet holdout = load_windowset(args.holdout_dir);
    const Montage montage = montage_from_config(rc);
    const std::filesystem::path out(args.out_dir);
    std::filesystem::create_directories(out);

    const Variant variants[] = {Variant::A, Variant::B, Variant::C, Variant::D};
    std::vector<VariantOutcome> outcomes(4);
    std::vector<std::exception_ptr> failures(4);

    const auto run_variant = [&](std::size_t i) {
        try {
            RunConfig rcv = rc;
            rcv.model.variant = variants[i];
            const ModelConfig cfg = build_model_config(rcv);
            VariantOutcome& o = outcomes[i];
            o.variant = variants[i];
            o.train = train_channel(sets, montage, cfg, rcv.train);
            save_train_result(
                o.train, rcv.train,
                (out / ("variant_" + variant_to_string(variants[i]))).string());
            o.param_total =
                count_parameters(cfg, static_cast<Eigen::Index>(
                                          o.train.neighbor_labels.size()))
                    .total;
            ModelInstance model(o.train.cfg,
                                static_cast<Eigen::Index>(
                                    o.train.neighbor_labels.size()));
            restore_values(model.store(), o.train.params);
            const Reconstruction rec = reconstruct_channel(
                model, holdout, rcv.train.channel, o.train.neighbor_labels,
                rcv.train.reference_mode, rcv.train.reference_alpha);
            o.report = evaluate_windows(rec.original, rec.output, rec.labels,
                                        holdout.fs_hz, rec.ref_sd);
        } catch (...) {
            failures[i] = std::current_exception();
        }
    };

    const int workers = std::min(worker_count_from_env(), 4);
    if (workers <= 1) {
        for (std::size_t i = 0; i < 4; ++i) run_variant(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < 4;
                     i = next.fetch_add(1))
                    run_variant(i);
            });
        for (std::thread& t : pool) t.join();
    }
    for (const std::exception_ptr& p : failures)
        if (p) std::rethrow_exception(p);

    // per-variant summary and loss curves
    {
        std::ofstream vs(out / "ablation_variants.csv");
        if (!vs) throw DataError("cannot write ablation_variants.csv");
        vs << "variant,param_total,best_epoch,best_val_total,epochs_run,"
              "stop_reason\n";
        for (const VariantOutcome& o : outcomes)
            vs << variant_to_string(o.variant) << ',' << o.param_total << ','
               << o.train.trace.best_epoch << ',' << fmt(o.train.trace.best_val)
               << ',' << o.train.trace.epochs.size() << ','
               << o.train.trace.stop_reason << '\n';

        std::ofstream lc(out / "loss_curves.csv");
        if (!lc) throw DataError("cannot write loss_curves.csv");
        lc << "variant,epoch,train_total,val_total\n";
        for (const VariantOutcome& o : outcomes)
            for (const EpochLog& e : o.train.trace.epochs)
                lc << variant_to_string(o.variant) << ',' << e.epoch << ','
                   << fmt(e.train.total) << ',' << fmt(e.val.total) << '\n';
    }

    // per-metric score matrices over the shared holdout windows
    std::vector<std::string> names;
    for (const VariantOutcome& o : outcomes)
        names.push_back(variant_to_string(o.variant));
    struct MetricPick {
        const char* name;
        bool higher_better;
        bool clean;
        double WindowMetrics::* member;
    };
    const MetricPick picks[] = {
        {"mse_temporal", false, true, &WindowMetrics::mse_temporal},
        {"mse_spectrogram", false, true, &WindowMetrics::mse_spectrogram},
        {"jsd", false, true, &WindowMetrics::jsd},
        {"psd_pearson", true, true, &WindowMetrics::psd_pearson_r},
        {"rv", true, true, &WindowMetrics::rv},
        {"smape_sd_ref", false, false, &WindowMetrics::smape_sd_ref},
    };
    std::vector<std::string> metric_names;
    std::vector<Mat> scores;
    std::vector<bool> higher;
    for (const MetricPick& pick : picks) {
        const WindowLabel want = pick.clean ? WindowLabel::clean : WindowLabel::noisy;
        std::vector<Eigen::Index> cols;
        const MetricReport& first = outcomes[0].report;
        for (std::size_t r = 0; r < first.rows.size(); ++r) {
            if (first.rows[r].label != want) continue;
            bool finite_all = true;
            for (const VariantOutcome& o : outcomes)
                finite_all = finite_all && std::isfinite(o.report.rows[r].*pick.member);
            if (finite_all) cols.push_back(static_cast<Eigen::Index>(r));
        }
        if (cols.size() < 2) continue;
        Mat m(4, static_cast<Eigen::Index>(cols.size()));
        for (Eigen::Index v = 0; v < 4; ++v)
            for (std::size_t cji = 0; cji < cols.size(); ++cji)
                m(v, static_cast<Eigen::Index>(cji)) =
                    outcomes[static_cast<std::size_t>(v)]
                        .report.rows[static_cast<std::size_t>(cols[cji])].*pick.member;
        metric_names.push_back(pick.name);
        scores.push_back(std::move(m));
        higher.push_back(pick.higher_better);
    }
    const AblationReport report =
        ablation_report(names, metric_names, scores, higher);
    write_ablation_csv(report, (out / "ablation.csv").string());
    write_ablation_json(report, (out / "ablation.json").string());

    for (const AblationEntry& e : report.entries)
        std::cout << e.metric << ": best "
                  << names[static_cast<std::size_t>(e.best)] << " (friedman p "
                  << fmt(e.friedman_p) << ")\n";
    return 0;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"generative EEG subspace reconstruction pipeline"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic recording");
    synth->add_option("--spec", synth_args.spec_path, "synthetic spec JSON");
    synth->add_option("--out", synth_args.out_path, "output recording CSV")
        ->required();
    synth->add_option("--seed", synth_args.seed, "seed override");

    PreprocessArgs pre_args;
    CLI::App* pre =
        app.add_subcommand("preprocess", "filter, window and stratify a recording");
    pre->add_option("--config", pre_args.config_path, "run config JSON");
    pre->add_option("--in", pre_args.in_path, "input recording CSV")->required();
    pre->add_option("--out", pre_args.out_dir, "output window-set directory")
        ->required();
    pre->add_option("--subject", pre_args.subject, "subject id (default: file stem)");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train one channel model");
    train->add_option("--config", train_args.config_path, "run config JSON");
    train->add_option("--windows", train_args.window_dirs,
                      "window-set directory (repeatable)")
        ->required();
    train->add_option("--out", train_args.out_dir, "output model directory")
        ->required();
    train->add_option("--variant", train_args.variant, "variant override A|B|C|D");
    train->add_option("--channel", train_args.channel, "target channel override");
    train->add_option("--seed", train_args.seed, "seed override");

    EvaluateArgs eval_args;
    CLI::App* eval =
        app.add_subcommand("evaluate", "reconstruct a window set and score it");
    eval->add_option("--model", eval_args.model_dir, "cmd_train output directory");
    eval->add_option("--windows", eval_args.windows_dir, "window-set directory")
        ->required();
    eval->add_option("--out", eval_args.out_dir, "output report directory")
        ->required();
    eval->add_flag("--identity", eval_args.identity,
                   "score the original against itself (sanity path)");
    eval->add_option("--channel", eval_args.channel,
                     "target channel for --identity");

    AblateArgs ablate_args;
    CLI::App* ablate =
        app.add_subcommand("ablate", "train and compare all four variants");
    ablate->add_option("--config", ablate_args.config_path, "run config JSON");
    ablate->add_option("--windows", ablate_args.window_dirs,
                       "training window-set directory (repeatable)")
        ->required();
    ablate->add_option("--holdout", ablate_args.holdout_dir,
                       "held-out window-set directory")
        ->required();
    ablate->add_option("--out", ablate_args.out_dir, "output directory")->required();
    ablate->add_option("--seed", ablate_args.seed, "seed override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*synth) return cmd_synth(synth_args);
        if (*pre) return cmd_preprocess(pre_args);
        if (*train) return cmd_train(train_args);
        if (*eval) return cmd_evaluate(eval_args);
        if (*ablate) return cmd_ablate(ablate_args);
        throw ConfigError("no subcommand selected");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace eegrecon
