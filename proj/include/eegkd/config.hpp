#pragma once

#include <map>
#include <string>
#include <vector>

#include "eegkd/distill.hpp"
#include "eegkd/models.hpp"
#include "eegkd/training.hpp"

namespace eegkd::config {

// Flat key/value config with a fixed schema. Files set a subset of the
// known keys; --set overrides must address existing keys.
class Config {
public:
    // all known keys with their defaults
    static Config defaults();
    static Config from_file(const std::string& path);

    void apply_file(const std::string& path);
    // "distill.beta=450" style; throws ConfigError naming unknown keys
    void set_override(const std::string& key, const std::string& value);

    bool has(const std::string& key) const;
    std::string str(const std::string& key) const;
    double num(const std::string& key) const;
    int integer(const std::string& key) const;
    bool flag(const std::string& key) const;
    std::vector<std::string> list(const std::string& key) const; // comma separated

    std::string digest() const;
    std::string render() const;

    // typed views over the schema
    distill::DistillConfig distill_config() const;
    training::TrainConfig train_config(models::Arch arch, int n_channels, int n_samples,
                                       int n_classes, uint64_t seed, bool with_distill) const;
    std::vector<uint64_t> seeds() const;
    std::vector<std::string> subjects() const;

    // pattern helpers: "{subject}" and "{session}" substitution rooted at
    // data.root (or $EEGKD_DATA_ROOT when data.root is empty)
    std::string data_path(const std::string& pattern_key, const std::string& subject,
                          const std::string& session = "") const;

private:
    std::map<std::string, std::string> kv_;
};

} // namespace eegkd::config
