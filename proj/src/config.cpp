#include "lbk/config.hpp"

#include "lbk/types.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace lbk {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& s)
{
    double v = 0;
    const auto t = trim(s);
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) throw ConfigError("key '" + key + "': not a number: " + s);
    return v;
}

}

Config Config::parse(const std::string& text)
{
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        c.entries_[key] = value;
    }
    return c;
}

Config Config::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    Config c = parse(ss.str());
    c.source_dir_ = path.parent_path();
    return c;
}

bool Config::has(const std::string& key) const { return entries_.count(key) != 0; }

std::optional<std::string> Config::find(const std::string& key) const
{
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::string Config::get_string(const std::string& key) const
{
    const auto v = find(key);
    if (!v) throw ConfigError("missing config key: " + key);
    return *v;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const
{
    return find(key).value_or(fallback);
}

double Config::get_double(const std::string& key) const { return to_double(key, get_string(key)); }

double Config::get_double(const std::string& key, double fallback) const
{
    const auto v = find(key);
    return v ? to_double(key, *v) : fallback;
}

long Config::get_int(const std::string& key) const
{
    const double v = get_double(key);
    if (v != std::floor(v)) throw ConfigError("key '" + key + "': expected an integer");
    return long(v);
}

long Config::get_int(const std::string& key, long fallback) const { return has(key) ? get_int(key) : fallback; }

bool Config::get_bool(const std::string& key, bool fallback) const
{
    const auto v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("key '" + key + "': expected a boolean");
}

std::vector<double> Config::get_list(const std::string& key) const
{
    std::vector<double> out;
    std::string item;
    std::istringstream in(get_string(key));
    while (std::getline(in, item, ',')) {
        if (trim(item).empty()) continue;
        out.push_back(to_double(key, item));
    }
    return out;
}

std::vector<double> Config::get_list(const std::string& key, const std::vector<double>& fallback) const
{
    return has(key) ? get_list(key) : fallback;
}

void Config::set(const std::string& key, const std::string& value) { entries_[key] = value; }

std::string Config::canonical() const
{
    std::string s;
    for (const auto& [k, v] : entries_) s += k + " = " + v + "\n";
    return s;
}

std::uint64_t Config::hash() const
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : canonical()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}
