#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace synergy {

// Key/value configuration with nested sections, parsed from a small
// INI-style text format:
//
//   # comment
//   [section.subsection]
//   key = value   # trailing comments after whitespace are stripped
//
// Keys are flattened to dotted paths ("section.subsection.key").
// Every key can be overridden through the environment: the variable name is
// the SYNERGY_ prefix plus the key, uppercased, with '.' replaced by "__"
// (for example sim.n_requests -> SYNERGY_SIM__N_REQUESTS).
class Config {
public:
    Config() = default;

    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const;
    void set(const std::string& key, const std::string& value);

    // Getters throw Error{Config} naming the key when it is missing or
    // fails to parse. The *_or variants fall back to a default instead.
    std::string get_string(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    std::string get_string_or(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_uint_or(const std::string& key, std::uint64_t fallback) const;
    double get_double_or(const std::string& key, double fallback) const;
    bool get_bool_or(const std::string& key, bool fallback) const;

    // Keys that start with the given dotted prefix, in sorted order.
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

    static std::string env_var_name(const std::string& key);

private:
    std::optional<std::string> lookup(const std::string& key) const;

    std::map<std::string, std::string> values_;
};

} // namespace synergy
