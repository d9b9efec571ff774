#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace surrbench {

// Minimal TOML-style config: [section] headers, key = value lines, # comments.
// Values are strings, booleans, numbers, or flat arrays of numbers/strings.
class Config {
public:
    Config() = default;

    static Config parse_file(const std::filesystem::path& file);
    static Config parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const;
    std::vector<std::string> get_string_list(const std::string& key) const;
    std::vector<std::string> get_string_list(const std::string& key,
                                             const std::vector<std::string>& fallback) const;

    void set(const std::string& key, const std::string& raw_value);

    // Canonical "key = value" dump, sorted by key; stable across runs.
    std::string resolved_text() const;

private:
    const std::string& raw(const std::string& key) const;
    // key ("section.name") -> raw value text as written
    std::map<std::string, std::string> values_;
    std::string origin_;
};

}  // namespace surrbench
