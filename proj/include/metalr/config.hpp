// SPDX-License-Identifier: Apache-2.0
//
// Flat key = value experiment configs with dotted section keys. Unknown keys
// are hard errors: a silently ignored typo can corrupt a whole sweep.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace metalr {

class KeyValueConfig {
public:
    static KeyValueConfig parse_file(const std::string& path);
    static KeyValueConfig parse_text(const std::string& text, const std::string& origin = "<text>");

    bool has(const std::string& key) const;
    void set(const std::string& key, const std::string& value);

    // Typed getters; errors name the offending key.
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    double get_double(const std::string& key) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    std::size_t get_size(const std::string& key) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::uint64_t> get_u64_list(const std::string& key) const;
    std::vector<std::size_t> get_size_list(const std::string& key) const;

    // Rejects keys outside `allowed` and reports missing `required` keys.
    void enforce_schema(const std::vector<std::string>& allowed,
                        const std::vector<std::string>& required) const;

    // Canonical "key = value" lines, sorted by key.
    std::string canonical_text() const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
    std::string origin_;
};

// FNV-1a over the canonical text, as 16 hex digits. Stable across re-runs of
// the same logical config.
std::string config_fingerprint(const KeyValueConfig& cfg);

}  // namespace metalr
