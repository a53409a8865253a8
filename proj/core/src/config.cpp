#include "gradapt/config.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>

namespace gradapt {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

}  // namespace

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream iss(s);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

ConfigFile ConfigFile::parse(std::istream& in, const std::string& origin) {
    ConfigFile cfg;
    cfg.origin_ = origin;
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": malformed section header");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty section name");
            cfg.sections_[section];  // allow empty sections
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(t.substr(0, eq));
        std::string value = unquote(trim(t.substr(eq + 1)));
        if (key.empty())
            throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty key");
        if (section.empty())
            throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": key outside any [section]");
        cfg.sections_[section][key] = value;
    }
    return cfg;
}

ConfigFile ConfigFile::parse_file(const std::string& filename) {
    std::ifstream in(filename);
    if (!in) throw std::runtime_error("cannot open config file: " + filename);
    return parse(in, filename);
}

ConfigFile ConfigFile::parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in, "<string>");
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
}

std::string ConfigFile::get(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end() || !s->second.count(key))
        throw std::runtime_error(origin_ + ": missing key [" + section + "] " + key);
    return s->second.at(key);
}

std::string ConfigFile::get_or(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

double ConfigFile::get_double(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key);
    try {
        return std::stod(v);
    } catch (const std::exception&) {
        throw std::runtime_error(origin_ + ": [" + section + "] " + key + ": not a number: '" + v + "'");
    }
}

int ConfigFile::get_int(const std::string& section, const std::string& key, int fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key);
    try {
        return std::stoi(v);
    } catch (const std::exception&) {
        throw std::runtime_error(origin_ + ": [" + section + "] " + key + ": not an integer: '" + v + "'");
    }
}

std::uint64_t ConfigFile::get_u64(const std::string& section, const std::string& key,
                                  std::uint64_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key);
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        throw std::runtime_error(origin_ + ": [" + section + "] " + key + ": not an integer: '" + v + "'");
    }
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    std::string v = get(section, key);
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::runtime_error(origin_ + ": [" + section + "] " + key + ": not a boolean: '" + v + "'");
}

std::vector<int> ConfigFile::get_int_list(const std::string& section, const std::string& key) const {
    std::vector<int> out;
    for (const std::string& tok : split_ws(get(section, key))) {
        std::size_t dots = tok.find("..");
        try {
            if (dots != std::string::npos) {
                int lo = std::stoi(tok.substr(0, dots));
                int hi = std::stoi(tok.substr(dots + 2));
                if (hi < lo)
                    throw std::runtime_error(origin_ + ": [" + section + "] " + key + ": bad range " + tok);
                for (int v = lo; v <= hi; ++v) out.push_back(v);
            } else {
                out.push_back(std::stoi(tok));
            }
        } catch (const std::invalid_argument&) {
            throw std::runtime_error(origin_ + ": [" + section + "] " + key + ": not an integer: '" + tok + "'");
        }
    }
    return out;
}

std::vector<double> ConfigFile::get_double_list(const std::string& section, const std::string& key) const {
    std::vector<double> out;
    for (const std::string& tok : split_ws(get(section, key))) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw std::runtime_error(origin_ + ": [" + section + "] " + key + ": not a number: '" + tok + "'");
        }
    }
    return out;
}

void ConfigFile::check_known_keys(const std::map<std::string, std::vector<std::string>>& allowed) const {
    for (const auto& [section, kv] : sections_) {
        auto it = allowed.find(section);
        if (it == allowed.end())
            throw std::runtime_error(origin_ + ": unknown section [" + section + "]");
        for (const auto& [key, value] : kv) {
            (void)value;
            if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
                throw std::runtime_error(origin_ + ": unknown key '" + key + "' in section [" + section + "]");
        }
    }
}

}  // namespace gradapt
