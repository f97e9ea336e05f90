#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "eegrecon/errors.hpp"
#include "eegrecon/model.hpp"
#include "eegrecon/montage.hpp"
#include "eegrecon/preprocess.hpp"
#include "eegrecon/recording.hpp"
#include "eegrecon/rng.hpp"
#include "eegrecon/trainer.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace eegrecon;

namespace {

const std::vector<std::string> kChannels = {"C3", "C1", "CP3", "CP1"};

// noise recording over the four-channel block; window length 64 at 100 Hz
WindowSet make_set(const std::string& subject, Eigen::Index n_windows,
                   std::uint64_t seed, double offset = 0.0) {
    Recording rec;
    rec.fs_hz = 100.0;
    rec.labels = kChannels;
    const Eigen::Index n = (n_windows - 1) * 10 + 64;
    rec.data.resize(4, n);
    SeededRng rng(seed);
    for (Eigen::Index c = 0; c < 4; ++c)
        for (Eigen::Index t = 0; t < n; ++t)
            rec.data(c, t) = offset + 10.0 * rng.normal();
    PreprocessSettings s;
    s.window_s = 0.64;
    WindowSet ws = segment_recording(rec, s, subject);
    CHECK(ws.count() == n_windows);
    return ws;
}

TrainPlan small_plan() {
    TrainPlan plan;
    plan.channel = "C3";
    plan.batch = 16;
    plan.max_epochs = 5;
    plan.seed = 7;
    return plan;
}

bool same_breakdown(const LossBreakdown& a, const LossBreakdown& b) {
    return a.mse == b.mse && a.magnitude == b.magnitude && a.phase == b.phase &&
           a.mobility == b.mobility && a.latent == b.latent && a.total == b.total;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
}

} // namespace

TEST_CASE("dataset assembly splits eighty twenty with the plan seed") {
    Montage montage = default_montage();
    std::vector<WindowSet> sets = {make_set("s1", 334, 1), make_set("s2", 333, 2),
                                   make_set("s3", 333, 3)};
    TrainPlan plan = small_plan();

    Dataset ds = assemble_dataset(sets, montage, plan);
    CHECK(ds.train.size() == 800);
    CHECK(ds.val.size() == 200);
    // C3 picks up C1 and CP3 at grid distance 0.04; CP1 sits on the diagonal
    CHECK(ds.neighbor_labels == std::vector<std::string>{"C1", "CP3"});
    for (const DataItem& it : ds.train) {
        CHECK(it.x.rows() == 64);
        CHECK(it.x.cols() == 2);
        CHECK(it.y.size() == 64);
    }

    Dataset again = assemble_dataset(sets, montage, plan);
    REQUIRE(again.train.size() == ds.train.size());
    for (std::size_t i = 0; i < ds.train.size(); ++i)
        CHECK(again.train[i].y == ds.train[i].y);
    for (std::size_t i = 0; i < ds.val.size(); ++i)
        CHECK(again.val[i].y == ds.val[i].y);

    TrainPlan other = plan;
    other.seed = 8;
    Dataset shuffled = assemble_dataset(sets, montage, other);
    bool any_diff = false;
    for (std::size_t i = 0; i < 10; ++i)
        if (shuffled.train[i].y != ds.train[i].y) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("held-out subject never reaches either split") {
    Montage montage = default_montage();
    // the held-out subject rides far away from everyone else
    std::vector<WindowSet> sets = {make_set("s1", 60, 4), make_set("s2", 60, 5, 1000.0),
                                   make_set("s3", 60, 6)};
    TrainPlan plan = small_plan();
    plan.held_out_subject = "s2";

    Dataset ds = assemble_dataset(sets, montage, plan);
    CHECK(ds.train.size() + ds.val.size() == 120);
    for (const DataItem& it : ds.train) CHECK(std::abs(it.y[0]) < 500.0);
    for (const DataItem& it : ds.val) CHECK(std::abs(it.y[0]) < 500.0);

    TrainPlan keep = small_plan();
    Dataset all = assemble_dataset(sets, montage, keep);
    CHECK(all.train.size() + all.val.size() == 180);
}

TEST_CASE("too few clean windows is a data error") {
    Montage montage = default_montage();
    std::vector<WindowSet> sets = {make_set("s1", 100, 7)};
    TrainPlan plan = small_plan();
    plan.batch = 64; // needs 128 clean windows
    CHECK_THROWS_AS(assemble_dataset(sets, montage, plan), DataError);
}

TEST_CASE("perturb_item keeps amplitude jitter within ten percent") {
    DataItem it;
    it.y = Vec::LinSpaced(64, -3.0, 3.0);
    it.x = Mat::Zero(64, 1);
    it.x.col(0) = Vec::LinSpaced(64, 2.0, 5.0);
    it.ch_gmean = Vec::Zero(2);
    it.ch_gmean[1] = 3.5;
    it.ch_gsd = Vec::Ones(2);
    PreprocessSettings s;
    SeededRng rng(9);
    const Vec y0 = it.y;
    for (int rep = 0; rep < 200; ++rep) {
        DataItem jit = it;
        perturb_item(jit, s, rng);
        const double gain = jit.y[63] / y0[63]; // zero-mean channel scales directly
        CHECK(gain >= 0.9 - 1e-12);
        CHECK(gain <= 1.1 + 1e-12);
        CHECK(jit.ref_mean == doctest::Approx(jit.y.mean()).epsilon(1e-12));
    }
}

TEST_CASE("early stopper patience arithmetic") {
    EarlyStopper st{25};
    for (Eigen::Index epoch = 1; epoch <= 35; ++epoch) {
        const double value = epoch <= 10 ? 100.0 - static_cast<double>(epoch) : 95.0;
        st.observe(epoch, value);
        if (epoch < 35)
            CHECK_FALSE(st.should_stop(epoch));
        else
            CHECK(st.should_stop(epoch)); // 35 - 10 hits the patience of 25
    }
    CHECK(st.best_epoch == 10);
    CHECK(st.best == 90.0);
}

TEST_CASE("training stops at max_epochs and keeps the best validation epoch") {
    Montage montage = default_montage();
    std::vector<WindowSet> sets = {make_set("s1", 60, 10), make_set("s2", 60, 11),
                                   make_set("s3", 60, 12)};
    TrainPlan plan = small_plan();
    plan.max_epochs = 3;
    ModelConfig cfg = ModelConfig::reduced(Variant::D);

    TrainResult res = train_channel(sets, montage, cfg, plan);
    CHECK(res.trace.stop_reason == "max_epochs");
    REQUIRE(res.trace.epochs.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(res.trace.epochs[i].epoch == static_cast<Eigen::Index>(i + 1));

    double min_val = res.trace.epochs[0].val.total;
    Eigen::Index argmin = 1;
    for (const EpochLog& e : res.trace.epochs) {
        CHECK(e.val.total >= res.trace.best_val);
        if (e.val.total < min_val) {
            min_val = e.val.total;
            argmin = e.epoch;
        }
    }
    CHECK(res.trace.best_epoch == argmin);
    CHECK(res.trace.best_val == min_val);
    CHECK(res.neighbor_labels == std::vector<std::string>{"C1", "CP3"});
    CHECK(res.params.total_size() == count_parameters(cfg, 2).total);
}

TEST_CASE("fixed seed reproduces the trace and checkpoint bit for bit") {
    Montage montage = default_montage();
    std::vector<WindowSet> sets = {make_set("s1", 60, 13), make_set("s2", 60, 14),
                                   make_set("s3", 60, 15)};
    TrainPlan plan = small_plan();
    ModelConfig cfg = ModelConfig::reduced(Variant::D);

    TrainResult a = train_channel(sets, montage, cfg, plan);
    TrainResult b = train_channel(sets, montage, cfg, plan);
    REQUIRE(a.trace.epochs.size() == 5);
    REQUIRE(b.trace.epochs.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(same_breakdown(a.trace.epochs[i].train, b.trace.epochs[i].train));
        CHECK(same_breakdown(a.trace.epochs[i].val, b.trace.epochs[i].val));
    }
    CHECK(a.trace.best_epoch == b.trace.best_epoch);
    CHECK(a.weights.s_mse == b.weights.s_mse);
    CHECK(a.weights.s_mag == b.weights.s_mag);
    REQUIRE(a.params.count() == b.params.count());
    for (Eigen::Index i = 0; i < a.params.count(); ++i)
        CHECK(a.params.value(i) == b.params.value(i));
}

TEST_CASE("training rejects a window-length mismatch") {
    Montage montage = default_montage();
    std::vector<WindowSet> sets = {make_set("s1", 60, 16)};
    TrainPlan plan = small_plan();
    ModelConfig cfg = ModelConfig::standard(Variant::D); // expects window 256
    CHECK_THROWS_AS(train_channel(sets, montage, cfg, plan), ConfigError);
}

TEST_CASE("reconstruction scales clean and noisy windows from the right stats") {
    Recording rec;
    rec.fs_hz = 100.0;
    rec.labels = kChannels;
    const Eigen::Index n = 1000;
    rec.data.resize(4, n);
    SeededRng rng(17);
    for (Eigen::Index c = 0; c < 4; ++c)
        for (Eigen::Index t = 0; t < n; ++t) rec.data(c, t) = 10.0 * rng.normal();
    rec.data(0, 600) += 200.0; // artifact on the target channel
    PreprocessSettings s;
    s.window_s = 0.64;
    WindowSet ws = segment_recording(rec, s, "s1");
    stratify_windows(ws, 3.5);

    ModelConfig cfg = ModelConfig::reduced(Variant::D);
    ModelInstance model(cfg, 2);
    SeededRng init(18);
    model.init_params(init);
    const std::vector<std::string> nbs = {"C1", "CP3"};

    Reconstruction out = reconstruct_channel(model, ws, "C3", nbs);
    REQUIRE(static_cast<Eigen::Index>(out.output.size()) == ws.count());
    const Eigen::Index t_idx = ws.channel_index("C3");
    Eigen::Index noisy_seen = 0;
    for (Eigen::Index b = 0; b < ws.count(); ++b) {
        const auto i = static_cast<std::size_t>(b);
        const Vec& y = out.output[i];
        REQUIRE(y.size() == 64);
        const double mean = y.mean();
        const double sd = std::sqrt((y.array() - mean).square().sum() / 64.0);
        if (out.labels[i] == WindowLabel::clean) {
            CHECK(mean == doctest::Approx(ws.win_mean(b, t_idx)).epsilon(1e-9));
            CHECK(sd == doctest::Approx(ws.win_sd(b, t_idx)).epsilon(1e-9));
        } else {
            ++noisy_seen;
            CHECK(mean == doctest::Approx(out.ref_mean[b]).epsilon(1e-9));
            CHECK(sd == doctest::Approx(out.ref_sd[b]).epsilon(1e-9));
            CHECK(out.ref_mean[b] != ws.win_mean(b, t_idx));
        }
        CHECK(out.original[i] == ws.windows[i].row(t_idx).transpose());
    }
    CHECK(noisy_seen > 0);

    CHECK_THROWS_AS(reconstruct_channel(model, ws, "C3", {"C1", "CP3", "CP1"}),
                    ConfigError);
    ModelInstance big(ModelConfig::standard(Variant::D), 2);
    CHECK_THROWS_AS(reconstruct_channel(big, ws, "C3", nbs), ConfigError);
}

TEST_CASE("training log is CSV with wall time in the last column") {
    TrainTrace trace;
    for (int e = 1; e <= 2; ++e) {
        EpochLog log;
        log.epoch = e;
        log.train.mse = 0.5 * e;
        log.train.magnitude = 0.25;
        log.train.phase = 0.125;
        log.train.mobility = 0.0625;
        log.train.latent = 0.03125;
        log.train.total = 1.5;
        log.val = log.train;
        log.val.total = 1.25;
        log.wall_s = 0.75 + e;
        trace.epochs.push_back(log);
    }
    const auto path = std::filesystem::temp_directory_path() / "eegrecon_trainlog.csv";
    write_training_log(trace, path.string());

    std::ifstream in(path);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "epoch,train_mse,train_magnitude,train_phase,train_mobility,train_latent,"
          "train_total,val_mse,val_magnitude,val_phase,val_mobility,val_latent,"
          "val_total,wall_time_s");
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        const auto fields = split_csv(line);
        REQUIRE(fields.size() == 14);
        ++rows;
        if (rows == 1) {
            CHECK(fields[0] == "1");
            CHECK(std::stod(fields[1]) == 0.5);
            CHECK(std::stod(fields[13]) == 1.75);
        }
    }
    CHECK(rows == 2);
    std::filesystem::remove(path);
}
