#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gradapt {

/// Line-based configuration file:
///   [section]
///   key = value            # full-line comments start with '#' or ';'
/// Values are scalars, whitespace-separated lists, or integer ranges a..b
/// (inclusive). Unknown keys are rejected by the consumers to catch typos.
class ConfigFile {
public:
    static ConfigFile parse(std::istream& in, const std::string& origin = "config");
    static ConfigFile parse_file(const std::string& filename);
    static ConfigFile parse_string(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key, const std::string& fallback) const;

    double get_double(const std::string& section, const std::string& key, double fallback) const;
    int get_int(const std::string& section, const std::string& key, int fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::uint64_t get_u64(const std::string& section, const std::string& key, std::uint64_t fallback) const;

    std::vector<int> get_int_list(const std::string& section, const std::string& key) const;
    std::vector<double> get_double_list(const std::string& section, const std::string& key) const;

    /// Throws if any present (section, key) is not in the allowed list for
    /// its section; allowed maps section -> keys.
    void check_known_keys(const std::map<std::string, std::vector<std::string>>& allowed) const;

    const std::map<std::string, std::map<std::string, std::string>>& sections() const { return sections_; }

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
    std::string origin_;
};

std::vector<std::string> split_ws(const std::string& s);

}  // namespace gradapt
