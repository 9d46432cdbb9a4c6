#include "eegkd/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "eegkd/errors.hpp"
#include "eegkd/rng.hpp"

namespace eegkd::config {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

} // namespace

Config Config::defaults() {
    Config c;
    auto& kv = c.kv_;
    // data
    kv["data.root"] = "";
    kv["data.train_pattern"] = "{subject}_train.eegc";
    kv["data.test_pattern"] = "{subject}_test.eegc";
    kv["data.montage_student"] = "";   // montage file path for the student
    // architectures
    kv["arch.teacher"] = "SCCNet";
    kv["arch.student"] = "SCCNet";
    // training protocol
    kv["train.epochs"] = "500";
    kv["train.learning_rate"] = "0.0005";
    kv["train.weight_decay"] = "0.1";
    kv["train.batch_size"] = "128";
    kv["train.val_fraction"] = "0.125";
    kv["train.val_objective"] = "total"; // total | ce
    kv["train.seed"] = "0";
    // distillation
    kv["distill.beta"] = "450";
    kv["distill.alpha"] = "0.9";
    kv["distill.temperature"] = "4";
    kv["distill.criterion"] = "cosine";
    kv["distill.centered"] = "true";
    kv["distill.centering_scope"] = "batch";
    kv["distill.use_logits_loss"] = "false";
    kv["distill.layer_pairs"] = "LF2:LF2,LF3:LF3";
    // study orchestration
    kv["study.type"] = "montage_compare";
    kv["study.subjects"] = "S01";
    kv["study.seeds"] = "0,1,2,3,4,5,6,7,8,9";
    kv["study.jobs"] = "1";
    kv["teacher.checkpoint_pattern"] = ""; // reuse pretrained teachers when set
    // backward elimination
    kv["elimination.mode"] = "retrain"; // retrain | mask
    kv["elimination.distill"] = "true"; // run candidates with SK loss vs plain CE
    kv["out.dir"] = "results";
    // prepare (container conversion)
    kv["prepare.input"] = "";
    kv["prepare.format"] = "csv"; // csv | raw
    kv["prepare.output"] = "";
    kv["prepare.subject"] = "S01";
    kv["prepare.session"] = "T";
    kv["prepare.fs"] = "250";
    kv["prepare.events"] = "";
    kv["prepare.class_map"] = "769:0,770:1,771:2,772:3";
    kv["prepare.window_start"] = "0";
    kv["prepare.window_len"] = "4";
    kv["prepare.target_fs"] = "128";
    kv["prepare.bandpass_low"] = "4";
    kv["prepare.bandpass_high"] = "38";
    return c;
}

Config Config::from_file(const std::string& path) {
    Config c = defaults();
    c.apply_file(path);
    return c;
}

void Config::apply_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        set_override(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void Config::set_override(const std::string& key, const std::string& value) {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second = value;
}

bool Config::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string Config::str(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

double Config::num(const std::string& key) const {
    try {
        return std::stod(str(key));
    } catch (const std::logic_error&) {
        throw ConfigError("config key '" + key + "' is not a number");
    }
}

int Config::integer(const std::string& key) const {
    try {
        return std::stoi(str(key));
    } catch (const std::logic_error&) {
        throw ConfigError("config key '" + key + "' is not an integer");
    }
}

bool Config::flag(const std::string& key) const {
    const std::string v = str(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "' is not a boolean");
}

std::vector<std::string> Config::list(const std::string& key) const {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : str(key)) {
        if (ch == ',') {
            if (!trim(cur).empty()) out.push_back(trim(cur));
            cur.clear();
        } else cur += ch;
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    return out;
}

std::string Config::render() const {
    std::ostringstream os;
    for (const auto& [k, v] : kv_) os << k << "=" << v << "\n";
    return os.str();
}

std::string Config::digest() const {
    char buf[17];
    snprintf(buf, sizeof buf, "%016llx", (unsigned long long)fnv1a(render()));
    return buf;
}

distill::DistillConfig Config::distill_config() const {
    distill::DistillConfig d;
    d.beta = num("distill.beta");
    d.alpha = num("distill.alpha");
    d.temperature = num("distill.temperature");
    d.criterion = distill::criterion_from_string(str("distill.criterion"));
    d.centered = flag("distill.centered");
    const std::string scope = str("distill.centering_scope");
    if (scope == "batch") d.centering_scope = distill::CenteringScope::Batch;
    else if (scope == "sample") d.centering_scope = distill::CenteringScope::Sample;
    else throw ConfigError("distill.centering_scope must be batch or sample");
    d.use_logits_loss = flag("distill.use_logits_loss");
    d.layer_pairs.clear();
    for (const std::string& pair : list("distill.layer_pairs")) {
        auto colon = pair.find(':');
        if (colon == std::string::npos)
            throw ConfigError("distill.layer_pairs entries must look like LF2:LF2");
        d.layer_pairs.emplace_back(trim(pair.substr(0, colon)), trim(pair.substr(colon + 1)));
    }
    d.validate();
    return d;
}

training::TrainConfig Config::train_config(models::Arch arch, int n_channels, int n_samples,
                                           int n_classes, uint64_t seed, bool with_distill) const {
    training::TrainConfig t;
    t.epochs = integer("train.epochs");
    t.learning_rate = num("train.learning_rate");
    t.weight_decay = num("train.weight_decay");
    t.batch_size = integer("train.batch_size");
    t.val_fraction = num("train.val_fraction");
    t.seed = seed;
    t.arch.arch = arch;
    t.arch.n_channels = n_channels;
    t.arch.n_samples = n_samples;
    t.arch.n_classes = n_classes;
    const std::string vo = str("train.val_objective");
    if (vo == "total") t.val_uses_total_objective = true;
    else if (vo == "ce") t.val_uses_total_objective = false;
    else throw ConfigError("train.val_objective must be total or ce");
    if (with_distill) t.distill = distill_config();
    return t;
}

std::vector<uint64_t> Config::seeds() const {
    std::vector<uint64_t> out;
    for (const auto& s : list("study.seeds")) {
        try {
            out.push_back(std::stoull(s));
        } catch (const std::logic_error&) {
            throw ConfigError("study.seeds entries must be integers");
        }
    }
    if (out.empty()) throw ConfigError("study.seeds must be nonempty");
    return out;
}

std::vector<std::string> Config::subjects() const {
    auto out = list("study.subjects");
    if (out.empty()) throw ConfigError("study.subjects must be nonempty");
    return out;
}

std::string Config::data_path(const std::string& pattern_key, const std::string& subject,
                              const std::string& session) const {
    std::string pat = str(pattern_key);
    auto subst = [&](const std::string& tag, const std::string& val) {
        for (size_t pos; (pos = pat.find(tag)) != std::string::npos;)
            pat = pat.substr(0, pos) + val + pat.substr(pos + tag.size());
    };
    subst("{subject}", subject);
    subst("{session}", session);
    std::string root = str("data.root");
    if (root.empty()) {
        if (const char* env = std::getenv("EEGKD_DATA_ROOT")) root = env;
    }
    if (root.empty() || pat.starts_with('/')) return pat;
    return root + "/" + pat;
}

} // namespace eegkd::config
