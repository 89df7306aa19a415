#include "udm/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace udm {

const std::map<std::string, std::string>& Config::defaults() {
    static const std::map<std::string, std::string> d = {
        {"seed", "1"},
        {"schedule", "linear"},        // linear | cosine
        {"workers", "1"},
        {"log_timing", "0"},           // 1 writes measured wallclock_ms; 0 keeps runs byte-reproducible
        // task
        {"task_file", ""},             // optional path; overrides the task_* keys below
        {"task_vocab", "16"},          // K
        {"task_len", "24"},            // D
        {"task_prompts", "4"},         // P
        {"task_mix", "0.6"},
        {"reward", "token_match"},     // token_match | count_match | bigram_pattern
        // architecture
        {"emb_dim", "32"},
        {"hidden_dim", "64"},
        // optimizer
        {"adam_beta1", "0.9"},
        {"adam_beta2", "0.95"},
        {"weight_decay", "0.01"},
        // pretraining
        {"pretrain_steps", "2000"},
        {"pretrain_batch", "64"},
        {"pretrain_lr", "1e-3"},
        {"cond_drop_p", "0.1"},
        // time grids
        {"sample_steps", "10"},
        {"eval_steps", "25"},
        // RL
        {"rl_updates", "300"},
        {"rl_lr", "1e-4"},
        {"group_size", "8"},
        {"groups_per_batch", "8"},
        {"clip_eps", "0.2"},
        {"kl_weight", "0.04"},
        {"trajectory", "forward"},     // forward | backward
        {"action", "clean"},           // clean | intermediate
        {"timestep_mode", "reduced_early"},  // all | reduced_early | reduced_random
        {"cfg_enabled", "0"},
        {"cfg_scale", "1.5"},
        {"cfg_backprop", "guided"},    // guided | cond_only
        // probes and evaluation
        {"probe_pairs", "512"},
        {"probe_feature_dim", "8"},
        {"probe_feature_seed", "7"},
        {"eval_samples", "1024"},
    };
    return d;
}

Config Config::from_text(const std::string& text) {
    Config c;
    c.values_ = defaults();
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto strip = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            return (a == std::string::npos) ? std::string() : s.substr(a, b - a + 1);
        };
        std::string stripped = strip(line);
        if (stripped.empty()) continue;
        size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        c.set(strip(stripped.substr(0, eq)), strip(stripped.substr(eq + 1)));
    }
    return c;
}

Config Config::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return from_text(buf.str());
}

void Config::set(const std::string& key, const std::string& value) {
    if (values_.empty()) values_ = defaults();
    if (!defaults().count(key)) throw ConfigError("unknown config key: " + key);
    values_[key] = value;
}

const std::string& Config::get_str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        auto d = defaults().find(key);
        if (d == defaults().end()) throw ConfigError("unknown config key: " + key);
        return d->second;
    }
    return it->second;
}

int Config::get_int(const std::string& key) const {
    const std::string& s = get_str(key);
    char* end = nullptr;
    long v = std::strtol(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("config key " + key + ": expected integer, got '" + s + "'");
    return int(v);
}

double Config::get_double(const std::string& key) const {
    const std::string& s = get_str(key);
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("config key " + key + ": expected number, got '" + s + "'");
    return v;
}

uint64_t Config::get_u64(const std::string& key) const {
    const std::string& s = get_str(key);
    char* end = nullptr;
    unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("config key " + key + ": expected unsigned integer, got '" + s + "'");
    return uint64_t(v);
}

bool Config::get_bool(const std::string& key) const {
    const std::string& s = get_str(key);
    if (s == "0" || s == "false") return false;
    if (s == "1" || s == "true") return true;
    throw ConfigError("config key " + key + ": expected 0/1, got '" + s + "'");
}

}  // namespace udm
