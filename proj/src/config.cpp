// SPDX-License-Identifier: Apache-2.0
#include "metalr/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "metalr/common.hpp"

namespace metalr {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> parts;
    std::stringstream ss(value);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cell = trim(cell);
        if (!cell.empty()) parts.push_back(cell);
    }
    return parts;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
    std::ifstream is(path);
    check_state(is.good(), "config: cannot open '", path, "'");
    std::stringstream buffer;
    buffer << is.rdbuf();
    return parse_text(buffer.str(), path);
}

KeyValueConfig KeyValueConfig::parse_text(const std::string& text, const std::string& origin) {
    KeyValueConfig cfg;
    cfg.origin_ = origin;
    std::stringstream ss(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        check_state(eq != std::string::npos, "config ", origin, " line ", line_no,
                    ": expected 'key = value', got '", stripped, "'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        check_state(!key.empty(), "config ", origin, " line ", line_no, ": empty key");
        check_state(cfg.entries_.find(key) == cfg.entries_.end(), "config ", origin, " line ", line_no,
                    ": duplicate key '", key, "'");
        cfg.entries_[key] = value;
    }
    return cfg;
}

bool KeyValueConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

void KeyValueConfig::set(const std::string& key, const std::string& value) { entries_[key] = value; }

std::string KeyValueConfig::get_string(const std::string& key) const {
    const auto it = entries_.find(key);
    check(it != entries_.end(), "config: missing required key '", key, "'");
    return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key) const {
    const std::string raw = get_string(key);
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(raw, &pos);
    } catch (const std::exception&) {
        fail_arg("config key '", key, "': expected a number, got '", raw, "'");
    }
    check(pos == raw.size(), "config key '", key, "': trailing junk in '", raw, "'");
    return v;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

std::size_t KeyValueConfig::get_size(const std::string& key) const {
    const std::string raw = get_string(key);
    std::size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(raw, &pos);
    } catch (const std::exception&) {
        fail_arg("config key '", key, "': expected a non-negative integer, got '", raw, "'");
    }
    check(pos == raw.size() && v >= 0, "config key '", key, "': expected a non-negative integer, got '",
          raw, "'");
    return static_cast<std::size_t>(v);
}

std::size_t KeyValueConfig::get_size(const std::string& key, std::size_t fallback) const {
    return has(key) ? get_size(key) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string raw = get_string(key);
    if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
    if (raw == "false" || raw == "0" || raw == "no" || raw == "off") return false;
    fail_arg("config key '", key, "': expected a boolean, got '", raw, "'");
}

std::vector<std::uint64_t> KeyValueConfig::get_u64_list(const std::string& key) const {
    std::vector<std::uint64_t> out;
    for (const std::string& cell : split_list(get_string(key))) {
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(cell, &pos);
        } catch (const std::exception&) {
            fail_arg("config key '", key, "': expected integers, got '", cell, "'");
        }
        check(pos == cell.size(), "config key '", key, "': trailing junk in '", cell, "'");
        out.push_back(v);
    }
    check(!out.empty(), "config key '", key, "': empty list");
    return out;
}

std::vector<std::size_t> KeyValueConfig::get_size_list(const std::string& key) const {
    std::vector<std::size_t> out;
    for (std::uint64_t v : get_u64_list(key)) out.push_back(static_cast<std::size_t>(v));
    return out;
}

void KeyValueConfig::enforce_schema(const std::vector<std::string>& allowed,
                                    const std::vector<std::string>& required) const {
    for (const auto& [key, value] : entries_) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            fail_arg("config: unknown key '", key, "'");
        }
    }
    for (const std::string& key : required) {
        check(has(key), "config: missing required key '", key, "'");
    }
}

std::string KeyValueConfig::canonical_text() const {
    std::string out;
    for (const auto& [key, value] : entries_) {  // std::map iterates sorted
        out += key;
        out += " = ";
        out += value;
        out += "\n";
    }
    return out;
}

std::string config_fingerprint(const KeyValueConfig& cfg) {
    const std::string text = cfg.canonical_text();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace metalr
