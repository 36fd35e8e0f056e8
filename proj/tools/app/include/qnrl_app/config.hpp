#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qnrl::app {

/// Bad key, bad value, missing file: exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct KeySpec {
    std::string name;
    std::string default_value;
    std::string help;
};

/// Parses `key = value` lines. '#' starts a comment; blank lines are skipped.
/// Throws ConfigError on malformed lines or duplicate keys.
std::map<std::string, std::string> parse_flat_config(std::string_view text);

/// Effective key/value set: defaults, then the config file, then flags.
/// Keys outside `keys` are rejected.
class ResolvedConfig {
public:
    ResolvedConfig(const std::vector<KeySpec>& keys, const std::optional<std::filesystem::path>& config_file,
                   const std::map<std::string, std::string>& flag_values);

    const std::string& str(const std::string& key) const;
    double real(const std::string& key) const;
    std::size_t count(const std::string& key) const;
    std::uint64_t u64(const std::string& key) const;
    bool boolean(const std::string& key) const;
    std::vector<std::size_t> size_list(const std::string& key) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace qnrl::app
