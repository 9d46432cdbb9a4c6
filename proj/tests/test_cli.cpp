#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "eegkd/cli.hpp"
#include "eegkd/data.hpp"
#include "helpers.hpp"

namespace fs = std::filesystem;
using namespace eegkd;
using testutil::TmpDir;

TEST_CASE("no arguments is a usage error") {
    CHECK(cli::dispatch({}) == 1);
}

TEST_CASE("unknown verbs and flags are usage errors") {
    CHECK(cli::dispatch({"frobnicate"}) == 1);
    CHECK(cli::dispatch({"distill", "--bogus-flag"}) == 1);
}

TEST_CASE("--set with an unknown key fails naming the key") {
    CHECK(cli::dispatch({"report", "--set", "nonexistent.key=1"}) == 1);
}

TEST_CASE("help exits cleanly") {
    CHECK(cli::dispatch({"--help"}) == 0);
}

TEST_CASE("missing config file is a usage-class failure") {
    CHECK(cli::dispatch({"distill", "--config", "/nonexistent/path.cfg"}) == 1);
}

namespace {

// full pipeline in a sandbox: csv -> prepare -> train-teacher -> distill
struct PipelineFixture {
    TmpDir tmp{"cli"};

    PipelineFixture() {
        // synthetic 3-channel recording at 256 Hz with eight cue events
        const int fs = 256;
        const int n = fs * 3 * 8 + fs * 4;
        std::ofstream csv(tmp.str("rec.csv"));
        csv << "# channels: C3, Cz, C4\n# fs: 256\n";
        for (int s = 0; s < n; ++s) {
            for (int c = 0; c < 3; ++c)
                csv << (c ? "," : "")
                    << 10.0 * std::sin(2 * 3.14159 * (8.0 + c) * s / fs + 0.1 * c);
            csv << "\n";
        }
        std::ofstream ev(tmp.str("rec.events"));
        for (int i = 0; i < 8; ++i) ev << (i * fs * 3) << "," << (769 + i % 2) << "\n";
        std::ofstream(tmp.str("1ch.txt")) << "Cz\n";
    }

    int prepare(const std::string& split) {
        return cli::dispatch({
            "prepare",
            "--set", "prepare.input=" + tmp.str("rec.csv"),
            "--set", "prepare.format=csv",
            "--set", "prepare.events=" + tmp.str("rec.events"),
            "--set", "prepare.class_map=769:0,770:1",
            "--set", "prepare.window_len=2",
            "--set", "prepare.subject=S01",
            "--set", "prepare.output=" + tmp.str("S01_" + split + ".eegc"),
        });
    }
};

} // namespace

TEST_CASE("prepare emits a valid container from csv input") {
    PipelineFixture f;
    REQUIRE(f.prepare("train") == 0);
    const EpochedDataset d = load_epoched(f.tmp.str("S01_train.eegc"));
    CHECK(d.n_trials == 8);
    CHECK(d.n_channels == 3);
    CHECK(d.fs == 128.0);
    CHECK(d.n_samples == 256); // 2 s at 128 Hz
    CHECK(d.n_classes == 2);
}

TEST_CASE("train-teacher then distill complete end to end") {
    PipelineFixture f;
    REQUIRE(f.prepare("train") == 0);
    REQUIRE(f.prepare("test") == 0);

    const std::vector<std::string> common = {
        "--set", "data.root=" + f.tmp.str(),
        "--set", "data.montage_student=" + f.tmp.str("1ch.txt"),
        "--set", "arch.teacher=EEGNet",
        "--set", "arch.student=EEGNet",
        "--set", "train.epochs=2",
        "--set", "train.batch_size=4",
        "--set", "train.val_fraction=0.25",
        "--set", "study.subjects=S01",
        "--out", f.tmp.str("results"),
    };
    std::vector<std::string> teach = {"train-teacher"};
    teach.insert(teach.end(), common.begin(), common.end());
    CHECK(cli::dispatch(teach) == 0);
    CHECK(fs::exists(f.tmp.path / "results" / "teachers" / "S01.ckpt"));

    std::vector<std::string> dist = {"distill", "--seed-list", "0,1",
                                     "--set", "distill.beta=450"};
    dist.insert(dist.end(), common.begin(), common.end());
    CHECK(cli::dispatch(dist) == 0);

    int records = 0;
    for (const auto& e : fs::directory_iterator(f.tmp.path / "results" / "runs"))
        if (e.path().extension() == ".record") ++records;
    CHECK(records >= 3); // teacher + 2 distilled seeds
}

TEST_CASE("distill without a teacher checkpoint explains what to run") {
    PipelineFixture f;
    REQUIRE(f.prepare("train") == 0);
    REQUIRE(f.prepare("test") == 0);
    const int code = cli::dispatch({
        "distill",
        "--set", "data.root=" + f.tmp.str(),
        "--set", "data.montage_student=" + f.tmp.str("1ch.txt"),
        "--set", "study.subjects=S01",
        "--out", f.tmp.str("results"),
    });
    CHECK(code == 1);
}
