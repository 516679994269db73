#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lbk {

// Flat key = value configuration. Lines starting with '#' are comments; keys are
// dotted paths such as `potential.family`. All lookups of missing or malformed
// values throw ConfigError.
class Config {
public:
    Config() = default;

    static Config parse(const std::string& text);
    static Config load(const std::filesystem::path& path);

    bool has(const std::string& key) const;
    std::optional<std::string> find(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key) const;
    long get_int(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_list(const std::string& key) const;
    std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

    void set(const std::string& key, const std::string& value);

    // Canonical "key = value" rendering in sorted key order.
    std::string canonical() const;
    std::uint64_t hash() const;

    const std::filesystem::path& source_dir() const { return source_dir_; }
    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
    std::filesystem::path source_dir_;
};

}
