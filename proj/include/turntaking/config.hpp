#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "turntaking/matrix.hpp"

namespace turntaking::cfg {

// Minimal INI-style file: [section] headers, key = value lines, # comments.
// Section and key order is preserved so modality sections keep file order.
struct ConfigFile {
    using Pairs = std::vector<std::pair<std::string, std::string>>;
    std::vector<std::pair<std::string, Pairs>> sections;
    std::string origin = "<config>";

    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text,
                                   const std::string& origin = "<config>");

    bool has_section(const std::string& section) const;
    bool has(const std::string& section, const std::string& key) const;
    const std::string* find(const std::string& section, const std::string& key) const;

    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key) const;
    double get_double_or(const std::string& section, const std::string& key,
                         double fallback) const;
    long long get_int(const std::string& section, const std::string& key) const;
    long long get_int_or(const std::string& section, const std::string& key,
                         long long fallback) const;
    bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const;

    // Comma-separated list value; empty or missing key gives an empty list.
    std::vector<std::string> get_list(const std::string& section, const std::string& key) const;

    std::vector<std::string> sections_with_prefix(const std::string& prefix) const;

    // Replaces or appends one key, creating the section if needed.
    void set(const std::string& section, const std::string& key, const std::string& value);

    // Canonical serialization; parsing it back reproduces the same data.
    std::string echo() const;
};

double parse_double_value(const std::string& value, const std::string& context);
long long parse_int_value(const std::string& value, const std::string& context);
bool parse_bool_value(const std::string& value, const std::string& context);

}  // namespace turntaking::cfg
