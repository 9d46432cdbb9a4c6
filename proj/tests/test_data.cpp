#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>

#include "eegkd/data.hpp"
#include "eegkd/errors.hpp"
#include "helpers.hpp"

using namespace eegkd;
using testutil::TmpDir;

TEST_CASE("epoched container round-trips field-for-field") {
    TmpDir tmp("container");
    EpochedDataset d = testutil::synthetic_dataset(12, 4, 64, 3, 5, "S07", "E");
    const std::string path = tmp.str("d.eegc");
    save_container(d, path);
    const EpochedDataset r = load_epoched(path);
    CHECK(r.n_trials == d.n_trials);
    CHECK(r.n_channels == d.n_channels);
    CHECK(r.n_samples == d.n_samples);
    CHECK(r.n_classes == d.n_classes);
    CHECK(r.fs == d.fs);
    CHECK(r.labels == d.labels);
    CHECK(r.channel_names == d.channel_names);
    CHECK(r.subject_id == "S07");
    CHECK(r.session_id == "E");
    CHECK(r.data == d.data); // bit-exact payload
}

TEST_CASE("raw container round-trips with events") {
    TmpDir tmp("rawc");
    RawRecording rec;
    rec.n_channels = 2;
    rec.n_samples = 50;
    rec.fs = 250;
    rec.channel_names = {"C3", "C4"};
    rec.signal.assign(100, 1.5f);
    rec.events = {{3, 769}, {20, 770}};
    rec.subject_id = "S01";
    rec.session_id = "T";
    save_container(rec, tmp.str("r.eegc"));
    const RawRecording r = load_raw(tmp.str("r.eegc"));
    CHECK(r.events == rec.events);
    CHECK(r.signal == rec.signal);
    CHECK(r.fs == 250);
}

TEST_CASE("payload size mismatch is reported") {
    TmpDir tmp("badpayload");
    EpochedDataset d = testutil::synthetic_dataset(4, 2, 16, 2, 1);
    const std::string path = tmp.str("d.eegc");
    save_container(d, path);
    std::ofstream(path + ".dat", std::ios::binary | std::ios::trunc) << "abc";
    CHECK_THROWS_WITH_AS(load_container(path),
                         doctest::Contains("size"), FormatError);
}

TEST_CASE("duplicate channel names are rejected") {
    TmpDir tmp("dupch");
    EpochedDataset d = testutil::synthetic_dataset(4, 2, 16, 2, 1);
    d.channel_names = {"C3", "C3"};
    CHECK_THROWS_WITH_AS(save_container(d, tmp.str("d.eegc")),
                         doctest::Contains("duplicate"), FormatError);
}

TEST_CASE("unknown format version is rejected") {
    TmpDir tmp("ver");
    EpochedDataset d = testutil::synthetic_dataset(4, 2, 16, 2, 1);
    const std::string path = tmp.str("d.eegc");
    save_container(d, path);
    // rewrite the header with a bumped version
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    text.replace(text.find("format_version=1"), 16, "format_version=9");
    std::ofstream(path, std::ios::trunc) << text;
    CHECK_THROWS_WITH_AS(load_container(path), doctest::Contains("format_version"), FormatError);
}

TEST_CASE("montage files round-trip and preserve comments handling") {
    TmpDir tmp("montage");
    std::ofstream(tmp.str("4p.txt")) << "# headphone-like\nC5\nC6  \n\nCP3\nCP4\n";
    const std::vector<std::string> parent = {"Fz", "C5", "C6", "CP3", "CP4", "Pz"};
    const Montage m = load_montage(tmp.str("4p.txt"), parent);
    CHECK(m.name == "4p");
    CHECK(m.channels == std::vector<std::string>{"C5", "C6", "CP3", "CP4"});
    CHECK(m.parent_indices == std::vector<int>{1, 2, 3, 4});
}

TEST_CASE("montage subset rejects unknown channels and order violations") {
    const std::vector<std::string> parent = {"Fz", "C3", "C4"};
    CHECK_THROWS_WITH_AS(Montage::subset("m", parent, {"XX"}),
                         doctest::Contains("unknown channel XX"), MontageError);
    CHECK_THROWS_AS(Montage::subset("m", parent, {"C4", "C3"}), MontageError);
}

TEST_CASE("select_montage restricts and reorders; identity montage is a no-op") {
    EpochedDataset d = testutil::synthetic_dataset(6, 5, 32, 3, 9);
    const Montage full = Montage::root("full", d.channel_names);
    const EpochedDataset same = select_montage(d, full);
    CHECK(same.data == d.data);
    CHECK(same.channel_names == d.channel_names);

    const Montage four = Montage::subset("4", d.channel_names,
                                         {"ch0", "ch2", "ch3", "ch4"});
    const EpochedDataset r = select_montage(d, four);
    CHECK(r.n_channels == 4);
    CHECK(r.n_trials == d.n_trials);
    CHECK(r.labels == d.labels);
    for (int t = 0; t < d.n_trials; ++t)
        for (int s = 0; s < d.n_samples; ++s) {
            CHECK(r.trial(t)[0 * r.n_samples + s] == d.trial(t)[0 * d.n_samples + s]);
            CHECK(r.trial(t)[1 * r.n_samples + s] == d.trial(t)[2 * d.n_samples + s]);
        }

    Montage bad = Montage::root("bad", {"XX"});
    CHECK_THROWS_WITH_AS(select_montage(d, bad), doctest::Contains("unknown channel XX"),
                         MontageError);
}

TEST_CASE("montage restriction composes functorially") {
    EpochedDataset d = testutil::synthetic_dataset(4, 6, 16, 2, 3);
    const Montage m1 = Montage::subset("m1", d.channel_names, {"ch0", "ch1", "ch3", "ch5"});
    const EpochedDataset step1 = select_montage(d, m1);
    const Montage m2 = Montage::subset("m2", m1.channels, {"ch1", "ch5"});
    const EpochedDataset two_step = select_montage(step1, m2);
    const Montage direct = Montage::subset("direct", d.channel_names, {"ch1", "ch5"});
    const EpochedDataset one_step = select_montage(d, direct);
    CHECK(two_step.data == one_step.data);
    CHECK(two_step.channel_names == one_step.channel_names);
}

TEST_CASE("split_train_val: 288 trials, 4 classes, 1/8 gives 36 balanced validation trials") {
    EpochedDataset d = testutil::synthetic_dataset(288, 3, 32, 4, 11);
    auto [train, val] = split_train_val(d, 1.0 / 8.0, 42);
    CHECK(val.n_trials == 36);
    CHECK(train.n_trials == 252);
    const auto counts = val.class_counts();
    for (int k = 0; k < 4; ++k) CHECK(counts[size_t(k)] == 9);
    // disjoint union rebuilding the original trial count
    CHECK(train.n_trials + val.n_trials == d.n_trials);
}

TEST_CASE("split_train_val with frac 0 returns the dataset unchanged") {
    EpochedDataset d = testutil::synthetic_dataset(12, 2, 16, 3, 2);
    auto [train, val] = split_train_val(d, 0.0, 7);
    CHECK(val.n_trials == 0);
    CHECK(train.data == d.data);
    CHECK(train.labels == d.labels);
}

TEST_CASE("split_train_val is deterministic in the seed") {
    EpochedDataset d = testutil::synthetic_dataset(64, 2, 16, 4, 2);
    auto [t1, v1] = split_train_val(d, 0.25, 5);
    auto [t2, v2] = split_train_val(d, 0.25, 5);
    CHECK(t1.data == t2.data);
    CHECK(v1.data == v2.data);
    auto [t3, v3] = split_train_val(d, 0.25, 6);
    CHECK(v1.data != v3.data);
}

TEST_CASE("split_train_val rejects classes with zero trials") {
    EpochedDataset d = testutil::synthetic_dataset(9, 2, 16, 3, 2);
    for (auto& l : d.labels) l = l % 2; // class 2 empty
    CHECK_THROWS_AS(split_train_val(d, 0.25, 1), SplitError);
}

TEST_CASE("paired batches: 252 trials at batch 128 gives sizes 128 and 124") {
    EpochedDataset d = testutil::synthetic_dataset(252, 5, 32, 4, 3);
    const Montage m = Montage::subset("2", d.channel_names, {"ch1", "ch3"});
    PairedBatchStream stream(d, m, 128, 0);
    CHECK(stream.n_batches() == 2);
    auto b1 = stream.next();
    auto b2 = stream.next();
    REQUIRE(b1);
    REQUIRE(b2);
    CHECK_FALSE(stream.next());
    CHECK(b1->x_teacher.dim(0) == 128);
    CHECK(b2->x_teacher.dim(0) == 124);
    CHECK(b1->x_student.dim(2) == 2);
}

TEST_CASE("paired batches: student rows equal montage-restricted teacher rows") {
    EpochedDataset d = testutil::synthetic_dataset(20, 4, 16, 2, 8);
    const Montage m = Montage::subset("2", d.channel_names, {"ch0", "ch2"});
    PairedBatchStream stream(d, m, 7, 123);
    while (auto b = stream.next()) {
        for (int n = 0; n < b->x_teacher.dim(0); ++n)
            for (int s = 0; s < 16; ++s) {
                CHECK(b->x_student.at(n, 0, 0, s) == b->x_teacher.at(n, 0, 0, s));
                CHECK(b->x_student.at(n, 0, 1, s) == b->x_teacher.at(n, 0, 2, s));
            }
    }
}

TEST_CASE("paired batches: a pass is a seed-deterministic permutation of all trials") {
    EpochedDataset d = testutil::synthetic_dataset(33, 2, 16, 3, 8);
    const Montage m = Montage::root("full", d.channel_names);
    auto collect = [&](uint64_t seed) {
        PairedBatchStream stream(d, m, 10, seed);
        std::vector<int> seen;
        while (auto b = stream.next())
            seen.insert(seen.end(), b->trial_indices.begin(), b->trial_indices.end());
        return seen;
    };
    const auto p1 = collect(4), p2 = collect(4), p3 = collect(5);
    CHECK(p1 == p2);
    CHECK(p1 != p3);
    std::set<int> unique(p1.begin(), p1.end());
    CHECK(unique.size() == 33);
    CHECK(*unique.begin() == 0);
    CHECK(*unique.rbegin() == 32);
}

TEST_CASE("epoch cuts one trial per mapped event in onset order") {
    RawRecording rec;
    rec.n_channels = 2;
    rec.fs = 128;
    rec.n_samples = 128 * 30;
    rec.channel_names = {"C3", "C4"};
    rec.signal.assign(size_t(rec.n_channels) * size_t(rec.n_samples), 0.0f);
    for (int64_t s = 0; s < rec.n_samples; ++s) rec.signal[size_t(s)] = float(s);
    rec.events = {{100, 769}, {800, 999}, {1500, 770}, {2900, 769}};
    const std::map<int, int> cmap{{769, 0}, {770, 1}};

    const EpochedDataset d = epoch(rec, 0.0, 4.0, cmap);
    CHECK(d.n_trials == 3);
    CHECK(d.n_samples == 512);
    CHECK(d.labels == std::vector<int>{0, 1, 0});
    CHECK(d.trial(0)[0] == 100.0f); // first channel starts at the cue onset
    CHECK(d.trial(1)[0] == 1500.0f);
}

TEST_CASE("epoch rejects events whose window leaves the recording") {
    RawRecording rec;
    rec.n_channels = 1;
    rec.fs = 128;
    rec.n_samples = 600;
    rec.channel_names = {"Cz"};
    rec.signal.assign(600, 0.0f);
    rec.events = {{200, 769}};
    CHECK_THROWS_WITH_AS(epoch(rec, 0.0, 4.0, {{769, 0}}), doctest::Contains("event 0"),
                         EpochError);
}

TEST_CASE("BCIC-style session: 4 classes x 72 cues epochs to 288 trials") {
    RawRecording rec;
    rec.n_channels = 1;
    rec.fs = 128;
    rec.channel_names = {"Cz"};
    const int trial_stride = 512 + 200;
    rec.n_samples = int64_t(trial_stride) * 288 + 1000;
    rec.signal.assign(size_t(rec.n_samples), 0.0f);
    for (int i = 0; i < 288; ++i) rec.events.push_back({int64_t(i) * trial_stride, 769 + i % 4});
    const EpochedDataset d =
        epoch(rec, 0.0, 4.0, {{769, 0}, {770, 1}, {771, 2}, {772, 3}});
    CHECK(d.n_trials == 288);
    const auto counts = d.class_counts();
    for (int k = 0; k < 4; ++k) CHECK(counts[size_t(k)] == 72);
}

TEST_CASE("concat_datasets stacks compatible sessions") {
    EpochedDataset a = testutil::synthetic_dataset(8, 2, 16, 2, 1, "S01");
    EpochedDataset b = testutil::synthetic_dataset(6, 2, 16, 2, 2, "S02");
    const EpochedDataset c = concat_datasets({&a, &b});
    CHECK(c.n_trials == 14);
    CHECK(c.labels.size() == 14);
    EpochedDataset bad = testutil::synthetic_dataset(6, 3, 16, 2, 2);
    CHECK_THROWS_AS(concat_datasets({&a, &bad}), ArgumentError);
}
