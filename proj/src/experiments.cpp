#include "eegkd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "eegkd/errors.hpp"
#include "eegkd/png.hpp"
#include "eegkd/rng.hpp"

namespace fs = std::filesystem;

namespace eegkd::experiments {

const std::vector<std::string> kStudies = {"montage_compare", "layer_sweep", "cross_subject",
                                           "ablation", "elimination"};

// ------------------------------------------------------------------ store

ResultsStore::ResultsStore(std::string root) : root_(std::move(root)) {
    fs::create_directories(root_);
}

std::string serialize_record(const Record& rec) {
    std::ostringstream os;
    os.precision(17);
    const auto& r = rec.run;
    os << "run_id=" << r.run_id << "\n";
    os << "status=" << (r.aborted ? "aborted" : "ok") << "\n";
    os << "role=" << training::to_string(r.role) << "\n";
    os << "config_digest=" << r.config_digest << "\n";
    os << "seed=" << r.seed << "\n";
    os << "subject=" << r.subject_id << "\n";
    os << "session=" << r.session_id << "\n";
    os << "arch=" << r.arch_name << "\n";
    os << "montage=" << r.montage << "\n";
    os << "teacher_run_id=" << r.teacher_run_id << "\n";
    if (r.test_accuracy) os << "test_accuracy=" << *r.test_accuracy << "\n";
    os << "best_val_loss=" << r.best_val_loss << "\n";
    os << "best_epoch=" << r.best_epoch << "\n";
    os << "wall_time_s=" << r.wall_time_s << "\n";
    if (!r.diagnostic.empty()) os << "diagnostic=" << r.diagnostic << "\n";
    for (const auto& [k, v] : rec.extra) os << "x." << k << "=" << v << "\n";
    return os.str();
}

Record parse_record(const std::string& text) {
    Record rec;
    std::istringstream in(text);
    std::string line;
    std::map<std::string, std::string> kv;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("record: malformed line '" + line + "'");
        const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
        if (k.starts_with("x.")) rec.extra[k.substr(2)] = v;
        else kv[k] = v;
    }
    auto& r = rec.run;
    r.run_id = kv.at("run_id");
    r.aborted = kv.at("status") == "aborted";
    const std::string role = kv.at("role");
    r.role = role == "teacher" ? training::Role::Teacher
             : role == "student-baseline" ? training::Role::StudentBaseline
                                          : training::Role::StudentDistilled;
    r.config_digest = kv.at("config_digest");
    r.seed = std::stoull(kv.at("seed"));
    r.subject_id = kv.at("subject");
    r.session_id = kv.count("session") ? kv.at("session") : "";
    r.arch_name = kv.at("arch");
    r.montage = kv.at("montage");
    r.teacher_run_id = kv.at("teacher_run_id");
    if (kv.count("test_accuracy")) r.test_accuracy = std::stod(kv.at("test_accuracy"));
    r.best_val_loss = std::stod(kv.at("best_val_loss"));
    r.best_epoch = std::stoi(kv.at("best_epoch"));
    r.wall_time_s = std::stod(kv.at("wall_time_s"));
    if (kv.count("diagnostic")) r.diagnostic = kv.at("diagnostic");
    return rec;
}

bool ResultsStore::append(const std::string& study, const Record& rec) {
    std::lock_guard<std::mutex> lock(mu_);
    const fs::path dir = fs::path(root_) / study;
    fs::create_directories(dir);
    const fs::path final_path = dir / (rec.run.run_id + ".record");
    if (fs::exists(final_path)) return false; // records are immutable
    const fs::path tmp = dir / (rec.run.run_id + ".record.tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw StoreError("cannot write record " + tmp.string());
        out << serialize_record(rec);
    }
    fs::rename(tmp, final_path);
    std::ofstream idx(dir / "index.tsv", std::ios::app);
    idx << rec.run.run_id << "\t" << rec.run.run_id + ".record" << "\n";
    return true;
}

std::vector<Record> ResultsStore::load(const std::string& study) const {
    std::lock_guard<std::mutex> lock(mu_);
    const fs::path dir = fs::path(root_) / study;
    std::vector<Record> out;
    if (!fs::exists(dir)) return out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".record") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::ifstream in(f);
        std::stringstream ss;
        ss << in.rdbuf();
        out.push_back(parse_record(ss.str()));
    }
    return out;
}

// ----------------------------------------------------------- elimination

EliminationResult backward_eliminate(const SetEvaluator& evaluator,
                                     const std::vector<std::string>& channels) {
    EliminationResult res;
    if (channels.size() <= 1) return res;
    std::vector<std::string> current = channels;
    res.curve[int(current.size())] = evaluator(current);
    while (current.size() > 1) {
        int best_idx = -1;
        double best_acc = -std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < current.size(); ++i) {
            std::vector<std::string> candidate;
            for (size_t j = 0; j < current.size(); ++j)
                if (j != i) candidate.push_back(current[j]);
            const double acc = evaluator(candidate);
            // strict > keeps the earliest channel in montage order on ties
            if (acc > best_acc) {
                best_acc = acc;
                best_idx = int(i);
            }
        }
        res.order.push_back(current[size_t(best_idx)]);
        current.erase(current.begin() + best_idx);
        res.curve[int(current.size())] = best_acc;
    }
    res.order.push_back(current.front()); // final survivor, most important
    return res;
}

ImportanceMap electrode_importance(const std::vector<EliminationResult>& runs,
                                   const std::vector<std::string>& parent_channels) {
    ImportanceMap map;
    map.channels = parent_channels;
    map.raw.assign(parent_channels.size(), 0.0);
    for (const auto& run : runs) {
        if (run.order.size() != parent_channels.size())
            throw ArgumentError("electrode_importance: elimination run over a different montage");
        for (const auto& ch : run.order)
            if (std::find(parent_channels.begin(), parent_channels.end(), ch) ==
                parent_channels.end())
                throw ArgumentError("electrode_importance: unknown channel " + ch);
        // channel removed at position p (1-based) was present for p steps
        for (size_t p = 0; p < run.order.size(); ++p) {
            const auto it = std::find(parent_channels.begin(), parent_channels.end(), run.order[p]);
            map.raw[size_t(it - parent_channels.begin())] += double(p + 1);
        }
    }
    const double lo = *std::min_element(map.raw.begin(), map.raw.end());
    const double hi = *std::max_element(map.raw.begin(), map.raw.end());
    map.normalized.assign(map.raw.size(), hi > lo ? 0.0 : 1.0);
    if (hi > lo)
        for (size_t i = 0; i < map.raw.size(); ++i)
            map.normalized[i] = (map.raw[i] - lo) / (hi - lo);
    return map;
}

// ------------------------------------------------------------- internals

namespace {

struct StudyContext {
    const config::Config& cfg;
    ResultsStore& store;
    std::string study;
    EpochedDataset train, test; // per-subject, loaded on demand
};

EpochedDataset load_subject(const config::Config& cfg, const std::string& pattern_key,
                            const std::string& subject) {
    return load_epoched(cfg.data_path(pattern_key, subject));
}

Montage student_montage(const config::Config& cfg, const std::vector<std::string>& parent) {
    const std::string path = cfg.str("data.montage_student");
    if (path.empty()) throw ConfigError("data.montage_student must name a montage file");
    return load_montage(path, parent);
}

// Pretrained teacher for one subject: loaded from teacher.checkpoint_pattern
// when set and present, trained (and saved under <out>/teachers) otherwise.
struct TeacherPool {
    const config::Config& cfg;
    ResultsStore& store;
    std::string study;
    std::map<std::string, std::unique_ptr<models::Model>> cache;
    std::map<std::string, std::string> run_ids;

    models::Model* get(const std::string& subject, const EpochedDataset& train,
                       const EpochedDataset* test) {
        if (auto it = cache.find(subject); it != cache.end()) return it->second.get();
        const std::string pattern = cfg.str("teacher.checkpoint_pattern");
        if (!pattern.empty()) {
            const std::string path = cfg.data_path("teacher.checkpoint_pattern", subject);
            if (fs::exists(path)) {
                cache[subject] = models::load_checkpoint(path);
                run_ids[subject] = "checkpoint:" + path;
                return cache[subject].get();
            }
        }
        auto tc = cfg.train_config(models::arch_from_string(cfg.str("arch.teacher")),
                                   train.n_channels, train.n_samples, train.n_classes,
                                   uint64_t(cfg.integer("train.seed")), false);
        tc.montage_name = "full";
        auto outcome = training::pretrain_teacher(train, test, tc);
        if (outcome.record.aborted)
            throw Error("teacher pretraining aborted for " + subject + ": " +
                        outcome.record.diagnostic);
        Record rec{outcome.record, {{"method", "teacher"}, {"teacher_subject", subject}}};
        store.append(study, rec);
        const fs::path dir = fs::path(store.root()) / "teachers";
        fs::create_directories(dir);
        models::save_checkpoint(*outcome.model, (dir / (subject + ".ckpt")).string(),
                                {{"subject", subject},
                                 {"config_digest", outcome.record.config_digest},
                                 {"best_epoch", std::to_string(outcome.record.best_epoch)}});
        run_ids[subject] = outcome.record.run_id;
        cache[subject] = std::move(outcome.model);
        return cache[subject].get();
    }
};

struct Cell {
    std::function<void()> fn;
};

void run_cells(std::vector<Cell>& cells, int jobs) {
    if (jobs <= 1) {
        for (auto& c : cells) c.fn();
        return;
    }
    std::mutex mu;
    size_t next = 0;
    auto worker = [&] {
        for (;;) {
            size_t i;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= cells.size()) return;
                i = next++;
            }
            cells[i].fn();
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

struct MethodSpec {
    std::string name;
    bool distilled; // needs teacher
    std::function<void(distill::DistillConfig&)> tweak;
};

// mean over records matching a predicate
double mean_accuracy(const std::vector<Record>& recs,
                     const std::function<bool(const Record&)>& pred) {
    double sum = 0;
    int n = 0;
    for (const auto& r : recs)
        if (!r.run.aborted && r.run.test_accuracy && pred(r)) {
            sum += *r.run.test_accuracy;
            ++n;
        }
    return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> accuracies(const std::vector<Record>& recs,
                               const std::function<bool(const Record&)>& pred) {
    std::vector<double> out;
    for (const auto& r : recs)
        if (!r.run.aborted && r.run.test_accuracy && pred(r)) out.push_back(*r.run.test_accuracy);
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw StoreError("cannot write " + path.string());
    out << text;
}

std::string fmt(double v, int prec = 4) {
    if (std::isnan(v)) return "";
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(prec);
    os << v;
    return os.str();
}

} // namespace

// ----------------------------------------------------------- study runners

namespace {

// Shared worker: train each (subject, seed, method) student cell.
void run_method_grid(const config::Config& cfg, ResultsStore& store, const std::string& study,
                     const std::vector<MethodSpec>& methods) {
    const auto subjects = cfg.subjects();
    const auto seeds = cfg.seeds();
    const int jobs = std::max(1, cfg.integer("study.jobs"));

    TeacherPool teachers{cfg, store, study, {}, {}};
    std::map<std::string, EpochedDataset> train_data, test_data;
    for (const auto& s : subjects) {
        train_data[s] = load_subject(cfg, "data.train_pattern", s);
        test_data[s] = load_subject(cfg, "data.test_pattern", s);
    }
    const bool any_distilled =
        std::any_of(methods.begin(), methods.end(), [](const MethodSpec& m) { return m.distilled; });
    if (any_distilled)
        for (const auto& s : subjects) teachers.get(s, train_data[s], &test_data[s]);

    const models::Arch student_arch = models::arch_from_string(cfg.str("arch.student"));
    std::vector<Cell> cells;
    for (const auto& subject : subjects) {
        const EpochedDataset* train = &train_data[subject];
        const EpochedDataset* test = &test_data[subject];
        const Montage m = student_montage(cfg, train->channel_names);
        for (const auto& method : methods)
            for (uint64_t seed : seeds) {
                cells.push_back(Cell{[&cfg, &store, &study, &teachers, student_arch, train, test,
                                      subject, method, seed, m] {
                    distill::DistillConfig d = cfg.distill_config();
                    method.tweak(d);
                    auto tc = cfg.train_config(student_arch, int(m.channels.size()),
                                               train->n_samples, train->n_classes, seed,
                                               method.distilled);
                    if (method.distilled) tc.distill = d;
                    tc.montage_name = m.name;
                    models::Model* teacher =
                        method.distilled ? teachers.cache.at(subject).get() : nullptr;
                    const std::string teacher_id =
                        method.distilled ? teachers.run_ids.at(subject) : "";
                    auto outcome =
                        training::distill_student(*train, m, teacher, test, tc, teacher_id);
                    Record rec{outcome.record, {{"method", method.name}}};
                    if (method.distilled) rec.extra["teacher_arch"] = teacher->spec.display_name();
                    store.append(study, rec);
                }});
            }
    }
    run_cells(cells, jobs);
    report(store, study);
}

} // namespace

void run_montage_compare(const config::Config& cfg, ResultsStore& store) {
    std::vector<MethodSpec> methods = {
        {"baseline", false, [](distill::DistillConfig&) {}},
        {"HKD", true,
         [](distill::DistillConfig& d) {
             d.beta = 0;
             d.use_logits_loss = true;
         }},
        {"SK", true,
         [](distill::DistillConfig& d) { d.use_logits_loss = false; }},
        {"SK+logits", true,
         [](distill::DistillConfig& d) { d.use_logits_loss = true; }},
    };
    run_method_grid(cfg, store, "montage_compare", methods);
}

void run_layer_sweep(const config::Config& cfg, ResultsStore& store) {
    const std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>>
        rows = {
            {"LF1", {{"LF1", "LF1"}}},
            {"LF2", {{"LF2", "LF2"}}},
            {"LF3", {{"LF3", "LF3"}}},
            {"LF1+2", {{"LF1", "LF1"}, {"LF2", "LF2"}}},
            {"LF2+3", {{"LF2", "LF2"}, {"LF3", "LF3"}}},
            {"LF1+2+3", {{"LF1", "LF1"}, {"LF2", "LF2"}, {"LF3", "LF3"}}},
        };
    std::vector<MethodSpec> methods = {{"baseline", false, [](distill::DistillConfig&) {}}};
    for (const auto& [name, pairs] : rows)
        methods.push_back({name, true, [pairs](distill::DistillConfig& d) {
                               d.layer_pairs = pairs;
                               d.use_logits_loss = false;
                           }});
    run_method_grid(cfg, store, "layer_sweep", methods);
}

void run_ablation(const config::Config& cfg, ResultsStore& store) {
    std::vector<MethodSpec> methods = {{"baseline", false, [](distill::DistillConfig&) {}}};
    for (const std::string crit : {"cosine", "dot", "l2", "plv"})
        for (bool centered : {true, false}) {
            const std::string name = crit + (centered ? "+centered" : "+uncentered");
            methods.push_back({name, true, [crit, centered](distill::DistillConfig& d) {
                                   d.criterion = distill::criterion_from_string(crit);
                                   d.centered = centered;
                                   d.use_logits_loss = false;
                               }});
        }
    run_method_grid(cfg, store, "ablation", methods);
}

void run_cross_subject(const config::Config& cfg, ResultsStore& store) {
    const std::string study = "cross_subject";
    const auto subjects = cfg.subjects();
    const auto seeds = cfg.seeds();
    const int jobs = std::max(1, cfg.integer("study.jobs"));

    std::map<std::string, EpochedDataset> train_data, test_data;
    for (const auto& s : subjects) {
        train_data[s] = load_subject(cfg, "data.train_pattern", s);
        test_data[s] = load_subject(cfg, "data.test_pattern", s);
    }

    TeacherPool teachers{cfg, store, study, {}, {}};
    for (const auto& s : subjects) teachers.get(s, train_data[s], &test_data[s]);
    // subject-independent teachers: trained on all other subjects' sessions
    for (const auto& target : subjects) {
        std::vector<const EpochedDataset*> others;
        for (const auto& s : subjects)
            if (s != target) others.push_back(&train_data[s]);
        if (others.empty()) continue;
        EpochedDataset merged = concat_datasets(others);
        merged.subject_id = "SI-" + target;
        teachers.get("SI-" + target, merged, nullptr);
    }

    const models::Arch student_arch = models::arch_from_string(cfg.str("arch.student"));
    std::vector<Cell> cells;
    for (const auto& student_subject : subjects) {
        const EpochedDataset* train = &train_data[student_subject];
        const EpochedDataset* test = &test_data[student_subject];
        const Montage m = student_montage(cfg, train->channel_names);

        std::vector<std::string> teacher_subjects = subjects;
        if (teachers.cache.count("SI-" + student_subject))
            teacher_subjects.push_back("SI-" + student_subject);
        for (const auto& teacher_subject : teacher_subjects)
            for (uint64_t seed : seeds) {
                // baseline cells (no teacher) once per (student, seed)
                if (teacher_subject == subjects.front()) {
                    cells.push_back(Cell{[&cfg, &store, &study, student_arch, train, test, seed,
                                          m] {
                        auto tc = cfg.train_config(student_arch, int(m.channels.size()),
                                                   train->n_samples, train->n_classes, seed, false);
                        tc.montage_name = m.name;
                        auto outcome = training::distill_student(*train, m, nullptr, test, tc);
                        store.append(study, Record{outcome.record, {{"method", "baseline"}}});
                    }});
                }
                cells.push_back(Cell{[&cfg, &store, &study, &teachers, student_arch, train, test,
                                      teacher_subject, seed, m] {
                    distill::DistillConfig d = cfg.distill_config();
                    d.use_logits_loss = false;
                    auto tc = cfg.train_config(student_arch, int(m.channels.size()),
                                               train->n_samples, train->n_classes, seed, true);
                    tc.distill = d;
                    tc.montage_name = m.name;
                    auto outcome = training::distill_student(
                        *train, m, teachers.cache.at(teacher_subject).get(), test, tc,
                        teachers.run_ids.at(teacher_subject));
                    const std::string label =
                        teacher_subject.starts_with("SI-") ? "SI" : teacher_subject;
                    store.append(study, Record{outcome.record,
                                               {{"method", "SK"}, {"teacher_subject", label}}});
                }});
            }
    }
    run_cells(cells, jobs);
    report(store, study);
}

void run_elimination(const config::Config& cfg, ResultsStore& store) {
    const std::string study = "elimination";
    const auto subjects = cfg.subjects();
    const auto seeds = cfg.seeds();
    const bool with_distill = cfg.flag("elimination.distill");
    const std::string mode = cfg.str("elimination.mode");
    if (mode != "retrain" && mode != "mask")
        throw ConfigError("elimination.mode must be retrain or mask");

    TeacherPool teachers{cfg, store, study, {}, {}};
    const models::Arch student_arch = models::arch_from_string(cfg.str("arch.student"));

    std::vector<EliminationResult> results;
    std::vector<std::string> parent;
    for (const auto& subject : subjects) {
        const EpochedDataset train = load_subject(cfg, "data.train_pattern", subject);
        const EpochedDataset test = load_subject(cfg, "data.test_pattern", subject);
        parent = train.channel_names;
        models::Model* teacher = with_distill ? teachers.get(subject, train, &test) : nullptr;

        SetEvaluator evaluator;
        std::unique_ptr<models::Model> mask_model; // fixed full-montage student for mask mode
        if (mode == "mask") {
            auto tc = cfg.train_config(student_arch, train.n_channels, train.n_samples,
                                       train.n_classes, seeds.front(), with_distill);
            tc.montage_name = "full";
            Montage full = Montage::root("full", train.channel_names);
            auto outcome = training::distill_student(train, full, teacher, nullptr, tc);
            mask_model = std::move(outcome.model);
            evaluator = [&, subject](const std::vector<std::string>& chans) {
                EpochedDataset masked = test;
                for (int c = 0; c < masked.n_channels; ++c) {
                    if (std::find(chans.begin(), chans.end(), masked.channel_names[size_t(c)]) !=
                        chans.end())
                        continue;
                    for (int t = 0; t < masked.n_trials; ++t) {
                        float* row = masked.data.data() +
                                     (size_t(t) * size_t(masked.n_channels) + size_t(c)) *
                                         size_t(masked.n_samples);
                        std::fill(row, row + masked.n_samples, 0.0f);
                    }
                }
                return training::evaluate(*mask_model, masked);
            };
        } else {
            evaluator = [&, subject, teacher](const std::vector<std::string>& chans) {
                const Montage m = Montage::subset("subset", train.channel_names, chans);
                auto tc = cfg.train_config(student_arch, int(chans.size()), train.n_samples,
                                           train.n_classes, seeds.front(), with_distill);
                tc.montage_name = "n" + std::to_string(chans.size());
                auto outcome = training::distill_student(
                    train, m, teacher, &test, tc,
                    teacher ? teachers.run_ids.at(subject) : "");
                if (outcome.record.aborted || !outcome.record.test_accuracy) return 0.0;
                return *outcome.record.test_accuracy;
            };
        }

        EliminationResult res = backward_eliminate(evaluator, train.channel_names);
        results.push_back(res);

        std::ostringstream csv;
        csv << "step,channels_remaining,accuracy,removed\n";
        int step = 0;
        for (auto it = res.curve.rbegin(); it != res.curve.rend(); ++it, ++step) {
            const std::string removed =
                step > 0 && step <= int(res.order.size()) ? res.order[size_t(step - 1)] : "";
            csv << step << "," << it->first << "," << fmt(it->second) << "," << removed << "\n";
        }
        write_text(fs::path(store.root()) / study / (subject + "_curve.csv"), csv.str());
        std::ostringstream ord;
        for (const auto& ch : res.order) ord << ch << "\n";
        write_text(fs::path(store.root()) / study / (subject + "_order.txt"), ord.str());
    }

    const ImportanceMap imp = electrode_importance(results, parent);
    std::ostringstream csv;
    csv << "channel,raw_score,normalized\n";
    for (size_t i = 0; i < imp.channels.size(); ++i)
        csv << imp.channels[i] << "," << fmt(imp.raw[i]) << "," << fmt(imp.normalized[i]) << "\n";
    write_text(fs::path(store.root()) / study / "importance.csv", csv.str());

    // channel strip rendered in montage order, fixed [0, 1] scale
    const int cell = 24;
    png::Canvas canvas(int(imp.channels.size()) * cell, cell);
    for (size_t i = 0; i < imp.channels.size(); ++i)
        canvas.fill_rect(int(i) * cell, 0, cell - 1, cell, png::sequential(imp.normalized[i]));
    fs::create_directories(fs::path(store.root()) / study / "figures");
    canvas.save((fs::path(store.root()) / study / "figures" / "importance.png").string());
}

// ---------------------------------------------------------------- report

namespace {

void report_method_table(const ResultsStore& store, const std::string& study,
                         const std::vector<Record>& recs) {
    // one summary row per (method, student arch, teacher arch); mixing
    // architecture pairs in one store must not pool their accuracies
    struct RowKey {
        std::string method, arch, teacher_arch;
        bool operator<(const RowKey& o) const {
            return std::tie(method, arch, teacher_arch) <
                   std::tie(o.method, o.arch, o.teacher_arch);
        }
    };
    std::set<std::string> subject_set;
    std::set<RowKey> rows;
    for (const auto& r : recs) {
        if (!r.extra.count("method") || r.extra.at("method") == "teacher") continue;
        subject_set.insert(r.run.subject_id);
        rows.insert({r.extra.at("method"), r.run.arch_name,
                     r.extra.count("teacher_arch") ? r.extra.at("teacher_arch") : ""});
    }
    const std::vector<std::string> subjects(subject_set.begin(), subject_set.end());
    auto matches = [](const Record& r, const RowKey& k) {
        return r.extra.count("method") && r.extra.at("method") == k.method &&
               r.run.arch_name == k.arch &&
               (r.extra.count("teacher_arch") ? r.extra.at("teacher_arch") : "") == k.teacher_arch;
    };

    std::ostringstream csv;
    csv << "method,student_arch,teacher_arch,mean_accuracy,delta_vs_baseline,p_signed_rank,"
           "significant\n";
    std::vector<double> bar_values;
    std::vector<bool> bar_is_baseline;
    for (const auto& key : rows) {
        const double acc = mean_accuracy(recs, [&](const Record& r) { return matches(r, key); });
        bar_values.push_back(acc);
        bar_is_baseline.push_back(key.method == "baseline");
        csv << key.method << "," << key.arch << "," << key.teacher_arch << "," << fmt(acc);
        if (key.method == "baseline") {
            csv << ",,,\n";
            continue;
        }
        const double base = mean_accuracy(recs, [&](const Record& r) {
            return r.extra.count("method") && r.extra.at("method") == "baseline" &&
                   r.run.arch_name == key.arch;
        });
        // paired per-subject means, method vs the same-architecture baseline
        std::vector<double> a, b;
        for (const auto& s : subjects) {
            const double ma = mean_accuracy(recs, [&](const Record& r) {
                return matches(r, key) && r.run.subject_id == s;
            });
            const double mb = mean_accuracy(recs, [&](const Record& r) {
                return r.extra.count("method") && r.extra.at("method") == "baseline" &&
                       r.run.arch_name == key.arch && r.run.subject_id == s;
            });
            if (!std::isnan(ma) && !std::isnan(mb)) {
                a.push_back(ma);
                b.push_back(mb);
            }
        }
        const double p = a.empty() ? std::numeric_limits<double>::quiet_NaN()
                                   : stats::wilcoxon_signed_rank(a, b).p_value;
        csv << "," << fmt(acc - base) << "," << fmt(p, 6) << ","
            << (!std::isnan(p) && p < 0.05 ? "yes" : "no") << "\n";
    }
    write_text(fs::path(store.root()) / study / "summary.csv", csv.str());

    // one bar per summary row, accuracy on a fixed 0..100 scale
    const int row_h = 20, bar_w = 400;
    png::Canvas canvas(bar_w, int(bar_values.size()) * row_h);
    for (size_t i = 0; i < bar_values.size(); ++i) {
        if (std::isnan(bar_values[i])) continue;
        const int len = int(bar_w * std::clamp(bar_values[i], 0.0, 100.0) / 100.0);
        canvas.fill_rect(0, int(i) * row_h + 2, len, row_h - 4,
                         bar_is_baseline[i] ? png::Rgb{150, 150, 150} : png::Rgb{70, 110, 180});
    }
    fs::create_directories(fs::path(store.root()) / study / "figures");
    canvas.save((fs::path(store.root()) / study / "figures" / "methods.png").string());
}

void report_cross_subject(const ResultsStore& store, const std::vector<Record>& recs) {
    std::set<std::string> student_set, teacher_set;
    for (const auto& r : recs) {
        if (r.extra.count("method") && r.extra.at("method") == "SK") {
            student_set.insert(r.run.subject_id);
            teacher_set.insert(r.extra.at("teacher_subject"));
        }
    }
    std::vector<std::string> students(student_set.begin(), student_set.end());
    std::vector<std::string> teachers;
    for (const auto& t : teacher_set)
        if (t != "SI") teachers.push_back(t);
    std::sort(teachers.begin(), teachers.end());
    if (teacher_set.count("SI")) teachers.push_back("SI");

    // relative improvement vs the student's own baseline; masked by rank-sum p
    std::ostringstream csv;
    csv << "teacher_subject";
    for (const auto& s : students) csv << "," << s;
    csv << "\n";
    std::vector<std::vector<double>> grid(teachers.size(),
                                          std::vector<double>(students.size(),
                                                              std::numeric_limits<double>::quiet_NaN()));
    std::vector<std::vector<bool>> masked(teachers.size(), std::vector<bool>(students.size(), true));
    for (size_t ti = 0; ti < teachers.size(); ++ti) {
        csv << teachers[ti];
        for (size_t si = 0; si < students.size(); ++si) {
            const auto sk = accuracies(recs, [&](const Record& r) {
                return r.extra.count("method") && r.extra.at("method") == "SK" &&
                       r.run.subject_id == students[si] &&
                       r.extra.at("teacher_subject") == teachers[ti];
            });
            const auto base = accuracies(recs, [&](const Record& r) {
                return r.extra.count("method") && r.extra.at("method") == "baseline" &&
                       r.run.subject_id == students[si];
            });
            if (sk.empty() || base.empty()) {
                csv << ",";
                continue;
            }
            const double rel = std::accumulate(sk.begin(), sk.end(), 0.0) / double(sk.size()) -
                               std::accumulate(base.begin(), base.end(), 0.0) / double(base.size());
            grid[ti][si] = rel;
            double p = 1.0;
            if (sk.size() >= 2 && base.size() >= 2) p = stats::wilcoxon_rank_sum(sk, base).p_value;
            masked[ti][si] = !(p < 0.05);
            // non-significant cells are blank in the table, per the masking rule
            csv << "," << (masked[ti][si] ? "" : fmt(rel));
        }
        csv << "\n";
    }
    write_text(fs::path(store.root()) / "cross_subject" / "summary.csv", csv.str());

    const int cell = 32;
    png::Canvas canvas(int(students.size()) * cell, int(teachers.size()) * cell);
    for (size_t ti = 0; ti < teachers.size(); ++ti)
        for (size_t si = 0; si < students.size(); ++si) {
            png::Rgb c = {230, 230, 230}; // masked / missing
            if (!masked[ti][si] && !std::isnan(grid[ti][si])) c = png::diverging(grid[ti][si], 10.0);
            canvas.fill_rect(int(si) * cell, int(ti) * cell, cell - 1, cell - 1, c);
        }
    fs::create_directories(fs::path(store.root()) / "cross_subject" / "figures");
    canvas.save((fs::path(store.root()) / "cross_subject" / "figures" / "grid.png").string());
}

} // namespace

void report(const ResultsStore& store, const std::string& study) {
    if (std::find(kStudies.begin(), kStudies.end(), study) == kStudies.end())
        throw ConfigError("unknown study '" + study + "'");
    const auto recs = store.load(study);
    if (study == "elimination") return; // written by the runner
    if (recs.empty()) throw StoreError("report: no records for study " + study);
    if (study == "cross_subject") report_cross_subject(store, recs);
    else report_method_table(store, study, recs);
}

} // namespace eegkd::experiments
