#include "eegkd/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "eegkd/config.hpp"
#include "eegkd/data.hpp"
#include "eegkd/errors.hpp"
#include "eegkd/experiments.hpp"
#include "eegkd/signal.hpp"
#include "eegkd/training.hpp"

namespace fs = std::filesystem;

namespace eegkd::cli {

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir;
    int jobs = 0;
    std::string seed_list;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "config file (key = value lines)");
    cmd->add_option("--set", opts.sets, "override a config key, e.g. distill.beta=450")
        ->take_all();
    cmd->add_option("--out", opts.out_dir, "output directory (overrides out.dir)");
    cmd->add_option("--jobs", opts.jobs, "max parallel study cells");
    cmd->add_option("--seed-list", opts.seed_list, "comma-separated seeds (overrides study.seeds)");
}

config::Config build_config(const CommonOpts& opts) {
    config::Config cfg = config::Config::defaults();
    if (!opts.config_path.empty()) cfg.apply_file(opts.config_path);
    for (const std::string& s : opts.sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + s + "'");
        cfg.set_override(s.substr(0, eq), s.substr(eq + 1));
    }
    if (!opts.out_dir.empty()) cfg.set_override("out.dir", opts.out_dir);
    if (opts.jobs > 0) cfg.set_override("study.jobs", std::to_string(opts.jobs));
    if (!opts.seed_list.empty()) cfg.set_override("study.seeds", opts.seed_list);
    return cfg;
}

// ------------------------------------------------------------- prepare

RawRecording read_csv_recording(const std::string& path, const config::Config& cfg) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    RawRecording rec;
    rec.fs = cfg.num("prepare.fs");
    rec.subject_id = cfg.str("prepare.subject");
    rec.session_id = cfg.str("prepare.session");

    std::vector<std::vector<float>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            // "# channels: Fz,FC1,..."  and  "# fs: 250"
            auto colon = line.find(':');
            if (colon == std::string::npos) continue;
            std::string key = line.substr(1, colon - 1);
            key.erase(0, key.find_first_not_of(' '));
            key.erase(key.find_last_not_of(' ') + 1);
            std::string val = line.substr(colon + 1);
            if (key == "channels") {
                std::string cur;
                rec.channel_names.clear();
                for (char c : val + ",") {
                    if (c == ',') {
                        cur.erase(0, cur.find_first_not_of(' '));
                        cur.erase(cur.find_last_not_of(' ') + 1);
                        if (!cur.empty()) rec.channel_names.push_back(cur);
                        cur.clear();
                    } else cur += c;
                }
            } else if (key == "fs") {
                rec.fs = std::stod(val);
            }
            continue;
        }
        std::vector<float> row;
        std::istringstream ls(line);
        std::string tok;
        while (std::getline(ls, tok, ',')) row.push_back(std::stof(tok));
        if (!rows.empty() && row.size() != rows.front().size())
            throw FormatError(path + ": inconsistent column count");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError(path + ": no samples");
    const int C = int(rows.front().size());
    if (rec.channel_names.empty())
        for (int c = 0; c < C; ++c) rec.channel_names.push_back("ch" + std::to_string(c));
    if (int(rec.channel_names.size()) != C)
        throw FormatError(path + ": channel header does not match column count");
    rec.n_channels = C;
    rec.n_samples = int64_t(rows.size());
    rec.signal.resize(size_t(C) * rows.size());
    for (size_t s = 0; s < rows.size(); ++s)
        for (int c = 0; c < C; ++c) rec.signal[size_t(c) * rows.size() + s] = rows[s][size_t(c)];

    const std::string events_path = cfg.str("prepare.events");
    if (!events_path.empty()) {
        std::ifstream ev(events_path);
        if (!ev) throw FormatError("cannot open events file " + events_path);
        while (std::getline(ev, line)) {
            if (line.empty() || line[0] == '#') continue;
            auto comma = line.find(',');
            if (comma == std::string::npos)
                throw FormatError(events_path + ": expected onset,code per line");
            rec.events.emplace_back(std::stoll(line.substr(0, comma)),
                                    std::stoi(line.substr(comma + 1)));
        }
    }
    rec.validate();
    return rec;
}

std::map<int, int> parse_class_map(const std::string& text) {
    std::map<int, int> m;
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (tok.empty()) continue;
        auto colon = tok.find(':');
        if (colon == std::string::npos)
            throw ConfigError("prepare.class_map entries must look like 769:0");
        m[std::stoi(tok.substr(0, colon))] = std::stoi(tok.substr(colon + 1));
    }
    if (m.empty()) throw ConfigError("prepare.class_map is empty");
    return m;
}

int cmd_prepare(const config::Config& cfg) {
    const std::string input = cfg.str("prepare.input");
    const std::string format = cfg.str("prepare.format");
    if (input.empty()) throw ConfigError("prepare.input must name an input file");

    RawRecording rec;
    if (format == "csv") rec = read_csv_recording(input, cfg);
    else if (format == "raw") rec = load_raw(input);
    else throw ConfigError("prepare.format must be csv or raw (got '" + format + "')");
    if (rec.subject_id.empty()) rec.subject_id = cfg.str("prepare.subject");
    if (rec.session_id.empty()) rec.session_id = cfg.str("prepare.session");

    // resample -> band-pass -> epoch
    const double target_fs = cfg.num("prepare.target_fs");
    Tensor sig({rec.n_channels, int(rec.n_samples)});
    for (int64_t i = 0; i < int64_t(rec.signal.size()); ++i) sig.data[size_t(i)] = rec.signal[size_t(i)];
    if (rec.fs != target_fs) {
        sig = signal::resample(sig, rec.fs, target_fs);
        const double ratio = target_fs / rec.fs;
        for (auto& [onset, code] : rec.events) onset = int64_t(std::llround(double(onset) * ratio));
        rec.fs = target_fs;
        rec.n_samples = sig.dim(1);
    }
    sig = signal::bandpass(sig, cfg.num("prepare.bandpass_low"), cfg.num("prepare.bandpass_high"),
                           rec.fs);
    rec.signal.resize(sig.data.size());
    for (size_t i = 0; i < sig.data.size(); ++i) rec.signal[i] = float(sig.data[i]);

    const EpochedDataset d = epoch(rec, cfg.num("prepare.window_start"),
                                   cfg.num("prepare.window_len"),
                                   parse_class_map(cfg.str("prepare.class_map")));
    const std::string output = cfg.str("prepare.output");
    if (output.empty()) throw ConfigError("prepare.output must name the container to write");
    if (const auto dir = fs::path(output).parent_path(); !dir.empty()) fs::create_directories(dir);
    save_container(d, output);
    std::cout << "wrote " << output << " (" << d.n_trials << " trials, " << d.n_channels
              << " channels, " << d.n_samples << " samples @ " << d.fs << " Hz)\n";
    return 0;
}

// ------------------------------------------------------------ run verbs

int run_single(const config::Config& cfg, const std::string& verb) {
    experiments::ResultsStore store(cfg.str("out.dir"));
    const auto subjects = cfg.subjects();
    const auto seeds = cfg.seeds();
    const models::Arch student_arch = models::arch_from_string(cfg.str("arch.student"));

    for (const auto& subject : subjects) {
        const EpochedDataset train = load_epoched(cfg.data_path("data.train_pattern", subject));
        const EpochedDataset test = load_epoched(cfg.data_path("data.test_pattern", subject));

        if (verb == "train-teacher") {
            auto tc = cfg.train_config(models::arch_from_string(cfg.str("arch.teacher")),
                                       train.n_channels, train.n_samples, train.n_classes,
                                       seeds.front(), false);
            tc.montage_name = "full";
            auto outcome = training::pretrain_teacher(train, &test, tc);
            const fs::path dir = fs::path(store.root()) / "teachers";
            fs::create_directories(dir);
            models::save_checkpoint(*outcome.model, (dir / (subject + ".ckpt")).string(),
                                    {{"subject", subject},
                                     {"config_digest", outcome.record.config_digest},
                                     {"best_epoch", std::to_string(outcome.record.best_epoch)}});
            training::write_epoch_log((dir / (subject + ".log.csv")).string(), outcome.log);
            store.append("runs", {outcome.record, {{"method", "teacher"}}});
            std::cout << subject << " teacher accuracy: "
                      << (outcome.record.test_accuracy ? *outcome.record.test_accuracy : 0.0)
                      << "%\n";
            continue;
        }

        const Montage m = load_montage(cfg.str("data.montage_student"), train.channel_names);
        std::unique_ptr<models::Model> teacher;
        std::string teacher_id;
        if (verb == "distill") {
            std::string ckpt = cfg.str("teacher.checkpoint_pattern").empty()
                                   ? (fs::path(store.root()) / "teachers" / (subject + ".ckpt")).string()
                                   : cfg.data_path("teacher.checkpoint_pattern", subject);
            if (!fs::exists(ckpt))
                throw ConfigError("no teacher checkpoint at " + ckpt +
                                  " (run train-teacher first or set teacher.checkpoint_pattern)");
            teacher = models::load_checkpoint(ckpt);
            teacher_id = "checkpoint:" + ckpt;
        }

        for (uint64_t seed : seeds) {
            auto tc = cfg.train_config(student_arch, int(m.channels.size()), train.n_samples,
                                       train.n_classes, seed, verb == "distill");
            tc.montage_name = m.name;
            auto outcome =
                training::distill_student(train, m, teacher.get(), &test, tc, teacher_id);
            store.append("runs", {outcome.record,
                                  {{"method", verb == "distill" ? "SK" : "baseline"}}});
            const fs::path dir = fs::path(store.root()) / "students";
            fs::create_directories(dir);
            const std::string stem = subject + "_" + verb + "_s" + std::to_string(seed);
            if (outcome.model)
                models::save_checkpoint(*outcome.model, (dir / (stem + ".ckpt")).string(),
                                        {{"subject", subject},
                                         {"config_digest", outcome.record.config_digest},
                                         {"best_epoch", std::to_string(outcome.record.best_epoch)}});
            training::write_epoch_log((dir / (stem + ".log.csv")).string(), outcome.log);
            std::cout << subject << " seed " << seed << " " << verb << " accuracy: "
                      << (outcome.record.test_accuracy ? *outcome.record.test_accuracy : 0.0)
                      << "%" << (outcome.record.aborted ? " (aborted)" : "") << "\n";
        }
    }
    return 0;
}

int cmd_sweep(const config::Config& cfg) {
    experiments::ResultsStore store(cfg.str("out.dir"));
    const std::string study = cfg.str("study.type");
    if (study == "montage_compare") experiments::run_montage_compare(cfg, store);
    else if (study == "layer_sweep") experiments::run_layer_sweep(cfg, store);
    else if (study == "cross_subject") experiments::run_cross_subject(cfg, store);
    else if (study == "ablation") experiments::run_ablation(cfg, store);
    else if (study == "elimination") experiments::run_elimination(cfg, store);
    else throw ConfigError("study.type must be one of montage_compare, layer_sweep, "
                           "cross_subject, ablation, elimination");
    std::cout << "study " << study << " complete; results under " << store.root() << "\n";
    return 0;
}

} // namespace

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"similarity-keeping knowledge distillation for low-density EEG decoding"};
    app.require_subcommand(1);

    std::map<std::string, CommonOpts> opts;
    const std::vector<std::string> verbs = {"prepare", "train-teacher", "distill", "baseline",
                                            "sweep",   "eliminate",     "ablate",  "report"};
    const std::map<std::string, std::string> help = {
        {"prepare", "convert a recording into the canonical epoched container"},
        {"train-teacher", "pretrain high-density teachers"},
        {"distill", "train students with the configured distillation losses"},
        {"baseline", "train students with cross entropy only"},
        {"sweep", "run the study named by study.type"},
        {"eliminate", "backward electrode elimination with importance map"},
        {"ablate", "similarity-criterion x centering ablation grid"},
        {"report", "re-render tables and figures from stored records"},
    };
    for (const auto& v : verbs) add_common(app.add_subcommand(v, help.at(v)), opts[v]);

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) { // --help
            std::cout << app.help();
            return 0;
        }
        std::cerr << e.what() << "\n" << app.help();
        return 1;
    }

    try {
        for (const auto& v : verbs) {
            CLI::App* sub = app.get_subcommand(v);
            if (!sub->parsed()) continue;
            const config::Config cfg = build_config(opts[v]);
            if (v == "prepare") return cmd_prepare(cfg);
            if (v == "train-teacher" || v == "distill" || v == "baseline")
                return run_single(cfg, v);
            if (v == "sweep") return cmd_sweep(cfg);
            if (v == "eliminate") {
                experiments::ResultsStore store(cfg.str("out.dir"));
                experiments::run_elimination(cfg, store);
                return 0;
            }
            if (v == "ablate") {
                experiments::ResultsStore store(cfg.str("out.dir"));
                experiments::run_ablation(cfg, store);
                return 0;
            }
            if (v == "report") {
                experiments::ResultsStore store(cfg.str("out.dir"));
                experiments::report(store, cfg.str("study.type"));
                std::cout << "report written under " << store.root() << "\n";
                return 0;
            }
        }
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace eegkd::cli
