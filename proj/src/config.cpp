#include "turntaking/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace turntaking::cfg {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void fail_at(const std::string& origin, std::size_t line, const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& origin) {
    ConfigFile out;
    out.origin = origin;
    std::istringstream in(text);
    std::string raw;
    std::size_t lineno = 0;
    Pairs* current = nullptr;
    while (std::getline(in, raw)) {
        ++lineno;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail_at(origin, lineno, "unterminated section header");
            std::string name = trim(line.substr(1, line.size() - 2));
            if (name.empty()) fail_at(origin, lineno, "empty section name");
            for (const auto& [existing, _] : out.sections)
                if (existing == name) fail_at(origin, lineno, "duplicate section [" + name + "]");
            out.sections.emplace_back(name, Pairs{});
            current = &out.sections.back().second;
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail_at(origin, lineno, "expected key = value");
        if (!current) fail_at(origin, lineno, "key before any [section]");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail_at(origin, lineno, "empty key");
        for (const auto& [k, _] : *current)
            if (k == key) fail_at(origin, lineno, "duplicate key '" + key + "'");
        current->emplace_back(key, value);
    }
    return out;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

bool ConfigFile::has_section(const std::string& section) const {
    for (const auto& [name, _] : sections)
        if (name == section) return true;
    return false;
}

const std::string* ConfigFile::find(const std::string& section, const std::string& key) const {
    for (const auto& [name, pairs] : sections)
        if (name == section)
            for (const auto& [k, v] : pairs)
                if (k == key) return &v;
    return nullptr;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

std::string ConfigFile::get(const std::string& section, const std::string& key) const {
    const std::string* v = find(section, key);
    if (!v) throw ConfigError(origin + ": missing [" + section + "] " + key);
    return *v;
}

std::string ConfigFile::get_or(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
    const std::string* v = find(section, key);
    return v ? *v : fallback;
}

double parse_double_value(const std::string& value, const std::string& context) {
    double out = 0.0;
    const char* b = value.data();
    const char* e = b + value.size();
    auto res = std::from_chars(b, e, out);
    if (res.ec != std::errc() || res.ptr != e || !std::isfinite(out))
        throw ConfigError(context + ": bad number '" + value + "'");
    return out;
}

long long parse_int_value(const std::string& value, const std::string& context) {
    long long out = 0;
    const char* b = value.data();
    const char* e = b + value.size();
    auto res = std::from_chars(b, e, out);
    if (res.ec != std::errc() || res.ptr != e)
        throw ConfigError(context + ": bad integer '" + value + "'");
    return out;
}

bool parse_bool_value(const std::string& value, const std::string& context) {
    if (value == "true" || value == "yes" || value == "1") return true;
    if (value == "false" || value == "no" || value == "0") return false;
    throw ConfigError(context + ": bad boolean '" + value + "'");
}

double ConfigFile::get_double(const std::string& section, const std::string& key) const {
    return parse_double_value(get(section, key), origin + " [" + section + "] " + key);
}

double ConfigFile::get_double_or(const std::string& section, const std::string& key,
                                 double fallback) const {
    const std::string* v = find(section, key);
    return v ? parse_double_value(*v, origin + " [" + section + "] " + key) : fallback;
}

long long ConfigFile::get_int(const std::string& section, const std::string& key) const {
    return parse_int_value(get(section, key), origin + " [" + section + "] " + key);
}

long long ConfigFile::get_int_or(const std::string& section, const std::string& key,
                                 long long fallback) const {
    const std::string* v = find(section, key);
    return v ? parse_int_value(*v, origin + " [" + section + "] " + key) : fallback;
}

bool ConfigFile::get_bool_or(const std::string& section, const std::string& key,
                             bool fallback) const {
    const std::string* v = find(section, key);
    return v ? parse_bool_value(*v, origin + " [" + section + "] " + key) : fallback;
}

std::vector<std::string> ConfigFile::get_list(const std::string& section,
                                              const std::string& key) const {
    const std::string* v = find(section, key);
    std::vector<std::string> out;
    if (!v) return out;
    std::size_t pos = 0;
    while (pos <= v->size()) {
        std::size_t comma = v->find(',', pos);
        std::string item =
            trim(comma == std::string::npos ? v->substr(pos) : v->substr(pos, comma - pos));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::vector<std::string> ConfigFile::sections_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [name, _] : sections)
        if (name.rfind(prefix, 0) == 0) out.push_back(name);
    return out;
}

void ConfigFile::set(const std::string& section, const std::string& key,
                     const std::string& value) {
    for (auto& [name, pairs] : sections) {
        if (name != section) continue;
        for (auto& [k, v] : pairs)
            if (k == key) {
                v = value;
                return;
            }
        pairs.emplace_back(key, value);
        return;
    }
    sections.emplace_back(section, Pairs{{key, value}});
}

std::string ConfigFile::echo() const {
    std::string out;
    for (std::size_t i = 0; i < sections.size(); ++i) {
        if (i) out += "\n";
        out += "[" + sections[i].first + "]\n";
        for (const auto& [k, v] : sections[i].second) out += k + " = " + v + "\n";
    }
    return out;
}

}  // namespace turntaking::cfg
