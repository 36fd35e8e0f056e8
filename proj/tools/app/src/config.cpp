#include "qnrl_app/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace qnrl::app {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::map<std::string, std::string> parse_flat_config(std::string_view text) {
    std::map<std::string, std::string> out;
    std::istringstream in{std::string(text)};
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(std::string_view(body).substr(0, eq));
        std::string value = trim(std::string_view(body).substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (!out.emplace(key, value).second) throw ConfigError("config: duplicate key '" + key + "'");
    }
    return out;
}

ResolvedConfig::ResolvedConfig(const std::vector<KeySpec>& keys,
                               const std::optional<std::filesystem::path>& config_file,
                               const std::map<std::string, std::string>& flag_values) {
    std::set<std::string> known;
    for (const auto& k : keys) {
        known.insert(k.name);
        values_[k.name] = k.default_value;
    }
    auto apply = [&](const std::map<std::string, std::string>& kv, const char* source) {
        for (const auto& [k, v] : kv) {
            if (!known.count(k)) throw ConfigError(std::string("unknown configuration key '") + k + "' in " + source);
            values_[k] = v;
        }
    };
    if (config_file) {
        std::ifstream in(*config_file);
        if (!in) throw ConfigError("cannot read config file " + config_file->string());
        std::stringstream buf;
        buf << in.rdbuf();
        apply(parse_flat_config(buf.str()), "config file");
    }
    apply(flag_values, "command line");
}

const std::string& ResolvedConfig::str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("internal: undeclared key '" + key + "'");
    return it->second;
}

double ResolvedConfig::real(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "inf" || s == "infinity") return INFINITY;
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || std::isnan(v))
        throw ConfigError("key '" + key + "': expected a number, got '" + s + "'");
    return v;
}

std::uint64_t ResolvedConfig::u64(const std::string& key) const {
    const std::string& s = str(key);
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + s + "'");
    return v;
}

std::size_t ResolvedConfig::count(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

bool ResolvedConfig::boolean(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("key '" + key + "': expected true or false, got '" + s + "'");
}

std::vector<std::size_t> ResolvedConfig::size_list(const std::string& key) const {
    std::vector<std::size_t> out;
    const std::string& s = str(key);
    std::size_t pos = 0;
    while (pos <= s.size() && !s.empty()) {
        const auto comma = s.find(',', pos);
        const std::string item = trim(std::string_view(s).substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
        std::size_t v = 0;
        const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size())
            throw ConfigError("key '" + key + "': expected a comma-separated list of integers, got '" + s + "'");
        out.push_back(v);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

}  // namespace qnrl::app
