#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "eegrecon/dsp.hpp"
#include "eegrecon/errors.hpp"
#include "eegrecon/montage.hpp"
#include "eegrecon/preprocess.hpp"
#include "eegrecon/recording.hpp"
#include "eegrecon/rng.hpp"
#include "eegrecon/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

using namespace eegrecon;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("default montage has 28 unique electrodes with finite coords") {
    const Montage m = default_montage();
    CHECK(m.electrodes.size() == 28);
    std::set<std::string> labels;
    for (const ElectrodePosition& e : m.electrodes) {
        labels.insert(e.label);
        CHECK(std::isfinite(e.x));
        CHECK(std::isfinite(e.y));
    }
    CHECK(labels.size() == 28);
    CHECK(m.has("C3"));
    CHECK(m.has("FCz"));
    CHECK_FALSE(m.has("O1"));
}

TEST_CASE("neighbor threshold is inclusive at the boundary") {
    Montage m;
    m.electrodes = {{"a", 0.0, 0.0}, {"b", 0.05, 0.0}};
    const NeighborMap nm = build_neighbor_map(m, {"a", "b"}, 0.05);
    CHECK(nm.of("a") == std::vector<std::string>{"b"});
    CHECK(nm.of("b") == std::vector<std::string>{"a"});
}

TEST_CASE("electrodes past the threshold are not neighbors") {
    Montage m;
    m.electrodes = {{"a", 0.0, 0.0}, {"b", 0.06, 0.0}, {"c", 0.04, 0.0}};
    const NeighborMap nm = build_neighbor_map(m, {"a", "b", "c"}, 0.05);
    CHECK(nm.of("a") == std::vector<std::string>{"c"});
    CHECK(nm.of("b") == std::vector<std::string>{"c"});
}

TEST_CASE("channel with no neighbor raises a config error naming it") {
    Montage m;
    m.electrodes = {{"a", 0.0, 0.0}, {"b", 0.04, 0.0}, {"far", 0.5, 0.5}};
    try {
        build_neighbor_map(m, {"a", "b", "far"}, 0.05);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("far") != std::string::npos);
    }
}

TEST_CASE("default montage: every channel has 2 to 6 neighbors") {
    const Montage m = default_montage();
    std::vector<std::string> labels;
    for (const ElectrodePosition& e : m.electrodes) labels.push_back(e.label);
    const NeighborMap nm = build_neighbor_map(m, labels, 0.05);
    for (const std::string& l : labels) {
        const std::size_t k = nm.of(l).size();
        CHECK(k >= 2);
        CHECK(k <= 6);
    }
}

TEST_CASE("neighbor lists sort by distance then label") {
    Montage m;
    m.electrodes = {
        {"x", 0.0, 0.0}, {"near", 0.01, 0.0}, {"aa", 0.0, 0.03}, {"bb", 0.03, 0.0}};
    const NeighborMap nm = build_neighbor_map(m, {"x", "near", "aa", "bb"}, 0.05);
    // near at 0.01, then aa/bb both at 0.03 in label order
    CHECK(nm.of("x") == std::vector<std::string>{"near", "aa", "bb"});
}

TEST_CASE("neighbor map symmetry and self-exclusion on random point sets") {
    SeededRng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        Montage m;
        const int n = 8;
        for (int i = 0; i < n; ++i)
            m.electrodes.push_back({"ch" + std::to_string(i),
                                    0.05 * rng.uniform(), 0.05 * rng.uniform()});
        std::vector<std::string> labels;
        for (const ElectrodePosition& e : m.electrodes) labels.push_back(e.label);
        NeighborMap nm;
        try {
            nm = build_neighbor_map(m, labels, 0.03);
        } catch (const ConfigError&) {
            continue; // isolated point; contract tested elsewhere
        }
        for (const auto& [ch, nbs] : nm.neighbors) {
            for (const std::string& nb : nbs) {
                CHECK(nb != ch);
                const auto& back = nm.of(nb);
                CHECK(std::find(back.begin(), back.end(), ch) != back.end());
            }
        }
    }
}

TEST_CASE("montage csv round trip with header detection") {
    const std::string path = temp_path("montage_test.csv");
    {
        std::ofstream out(path);
        out << "label,x,y\nC3,-0.08,0\nC1,-0.04,0\nCz,0,0\n";
    }
    const Montage m = load_montage(path);
    CHECK(m.electrodes.size() == 3);
    CHECK(m.at("C1").x == doctest::Approx(-0.04));
    std::remove(path.c_str());
}

TEST_CASE("duplicate montage label is rejected") {
    const std::string path = temp_path("montage_dup.csv");
    {
        std::ofstream out(path);
        out << "C3,-0.08,0\nC3,-0.04,0\n";
    }
    CHECK_THROWS_AS(load_montage(path), DataError);
    std::remove(path.c_str());
}

TEST_CASE("recording csv parses shape and fs") {
    const std::string path = temp_path("rec_small.csv");
    {
        std::ofstream out(path);
        out << "fs=100\na,b,c\n";
        for (int i = 0; i < 500; ++i) out << i << "," << 2 * i << "," << 0.5 * i << "\n";
    }
    const Recording r = load_recording(path);
    CHECK(r.fs_hz == 100.0);
    CHECK(r.channel_count() == 3);
    CHECK(r.sample_count() == 500);
    CHECK(r.data(1, 10) == 20.0);
    std::remove(path.c_str());
}

TEST_CASE("recording save then load is bit exact") {
    SeededRng rng(4);
    Recording r;
    r.fs_hz = 250.0;
    r.labels = {"C3", "C4"};
    r.data.resize(2, 64);
    for (Eigen::Index c = 0; c < 2; ++c)
        for (Eigen::Index t = 0; t < 64; ++t) r.data(c, t) = rng.normal(0.0, 37.5);
    const std::string path = temp_path("rec_roundtrip.csv");
    save_recording(r, path);
    const Recording back = load_recording(path);
    CHECK(back.fs_hz == r.fs_hz);
    CHECK(back.labels == r.labels);
    REQUIRE(back.data.rows() == r.data.rows());
    REQUIRE(back.data.cols() == r.data.cols());
    CHECK((back.data.array() == r.data.array()).all());
    std::remove(path.c_str());
}

TEST_CASE("malformed recordings raise data errors") {
    const std::string path = temp_path("rec_bad.csv");
    {
        std::ofstream out(path);
        out << "sample_rate=100\na,b\n1,2\n";
    }
    CHECK_THROWS_AS(load_recording(path), DataError);
    {
        std::ofstream out(path);
        out << "fs=100\na,b\n1,2\n3\n";
    }
    CHECK_THROWS_AS(load_recording(path), DataError);
    {
        std::ofstream out(path);
        out << "fs=100\na,b\n1,zz\n";
    }
    CHECK_THROWS_AS(load_recording(path), DataError);
    std::remove(path.c_str());
}

TEST_CASE("unknown channel label reported against montage") {
    Recording r;
    r.fs_hz = 100.0;
    r.labels = {"C3", "XX"};
    r.data = Mat::Zero(2, 10);
    try {
        check_labels_against_montage(r, default_montage());
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("XX") != std::string::npos);
    }
}

TEST_CASE("synthetic generator is deterministic per seed") {
    SyntheticSpec spec;
    spec.duration_s = 5.0;
    spec.seed = 31;
    const SyntheticResult a = generate_synthetic(spec);
    const SyntheticResult b = generate_synthetic(spec);
    CHECK((a.recording.data.array() == b.recording.data.array()).all());
    spec.seed = 32;
    const SyntheticResult c = generate_synthetic(spec);
    CHECK((a.recording.data.array() != c.recording.data.array()).any());
}

TEST_CASE("alpha-only synthetic concentrates PSD power in 8-12 Hz") {
    SyntheticSpec spec;
    spec.duration_s = 20.0;
    spec.channels = {"C3", "C1"};
    spec.band_amp_uv = {0.0, 0.0, 10.0, 0.0};
    spec.pink_uv = 0.0;
    spec.seed = 5;
    const SyntheticResult res = generate_synthetic(spec);
    const Vec x = res.recording.data.row(0).transpose();
    const Psd psd = welch_psd(x, spec.fs_hz, 256);
    const double total = integrate_psd(psd, 0.0, 50.0);
    const double alpha = integrate_psd(psd, 8.0, 12.0);
    CHECK(alpha / total > 0.95);
}

TEST_CASE("synthetic spikes later stratify at least one noisy window") {
    SyntheticSpec spec;
    spec.duration_s = 60.0;
    spec.channels = {"C3", "C1", "CP3", "CP1"};
    spec.spike_rate_per_min = 6.0;
    spec.spike_multiplier = 8.0;
    spec.seed = 77;
    const SyntheticResult res = generate_synthetic(spec);
    REQUIRE(!res.spikes.empty());
    PreprocessSettings ps;
    const Recording filtered = preprocess_recording(res.recording, ps);
    WindowSet ws = segment_recording(filtered, ps, "s");
    stratify_windows(ws, ps.stratify_z);
    Eigen::Index noisy = 0;
    for (const WindowLabel l : ws.window_labels)
        if (l == WindowLabel::noisy) ++noisy;
    CHECK(noisy >= 1);
}

TEST_CASE("validate_recording rejects non-finite samples") {
    Recording r;
    r.fs_hz = 100.0;
    r.labels = {"a"};
    r.data = Mat::Zero(1, 4);
    validate_recording(r);
    r.data(0, 2) = std::nan("");
    CHECK_THROWS_AS(validate_recording(r), DataError);
    r.data(0, 2) = 0.0;
    r.fs_hz = 0.0;
    CHECK_THROWS_AS(validate_recording(r), DataError);
}
