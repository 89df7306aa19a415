#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace udm {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat key=value configuration with '#' comments. Every key has a documented
// default; unknown keys are hard errors.
class Config {
public:
    static const std::map<std::string, std::string>& defaults();

    static Config from_text(const std::string& text);
    static Config from_file(const std::string& path);

    void set(const std::string& key, const std::string& value);  // throws on unknown key

    const std::string& get_str(const std::string& key) const;
    int get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    uint64_t get_u64(const std::string& key) const;
    bool get_bool(const std::string& key) const;  // 0/1

private:
    std::map<std::string, std::string> values_;
};

}  // namespace udm
