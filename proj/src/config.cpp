#include "synergy/config.hpp"

#include "synergy/error.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace synergy {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void bad_key(const std::string& key, const std::string& what) {
    throw_error(ErrorCode::Config, "config key '" + key + "': " + what);
}

} // namespace

Config Config::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw_error(ErrorCode::Config, "cannot open config file '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str(), path);
}

Config Config::from_string(const std::string& text, const std::string& origin) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw_error(ErrorCode::Config,
                            origin + ":" + std::to_string(lineno) + ": unterminated section header");
            }
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty()) {
                throw_error(ErrorCode::Config,
                            origin + ":" + std::to_string(lineno) + ": empty section name");
            }
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw_error(ErrorCode::Config,
                        origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        // Inline comments: whitespace followed by '#'.
        for (std::size_t i = 1; i < value.size(); ++i) {
            if (value[i] == '#' && std::isspace(static_cast<unsigned char>(value[i - 1]))) {
                value = trim(value.substr(0, i));
                break;
            }
        }
        if (key.empty()) {
            throw_error(ErrorCode::Config,
                        origin + ":" + std::to_string(lineno) + ": empty key");
        }
        cfg.values_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
}

std::string Config::env_var_name(const std::string& key) {
    std::string name = "SYNERGY_";
    for (char c : key) {
        if (c == '.') {
            name += "__";
        } else {
            name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        }
    }
    return name;
}

std::optional<std::string> Config::lookup(const std::string& key) const {
    if (const char* env = std::getenv(env_var_name(key).c_str())) {
        return std::string(env);
    }
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

bool Config::has(const std::string& key) const {
    return lookup(key).has_value();
}

void Config::set(const std::string& key, const std::string& value) {
    values_[key] = value;
}

std::string Config::get_string(const std::string& key) const {
    auto v = lookup(key);
    if (!v) bad_key(key, "missing");
    return *v;
}

std::int64_t Config::get_int(const std::string& key) const {
    const std::string v = get_string(key);
    errno = 0;
    char* end = nullptr;
    const long long n = std::strtoll(v.c_str(), &end, 10);
    if (errno != 0 || end == v.c_str() || *end != '\0') bad_key(key, "not an integer: '" + v + "'");
    return n;
}

std::uint64_t Config::get_uint(const std::string& key) const {
    const std::int64_t n = get_int(key);
    if (n < 0) bad_key(key, "must be >= 0");
    return static_cast<std::uint64_t>(n);
}

double Config::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    errno = 0;
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (errno != 0 || end == v.c_str() || *end != '\0') bad_key(key, "not a number: '" + v + "'");
    return d;
}

bool Config::get_bool(const std::string& key) const {
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_key(key, "not a boolean: '" + v + "'");
}

std::string Config::get_string_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
}

std::int64_t Config::get_int_or(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::uint64_t Config::get_uint_or(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_uint(key) : fallback;
}

double Config::get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

bool Config::get_bool_or(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

std::vector<std::string> Config::keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (auto it = values_.lower_bound(prefix); it != values_.end(); ++it) {
        if (it->first.compare(0, prefix.size(), prefix) != 0) break;
        out.push_back(it->first);
    }
    return out;
}

} // namespace synergy
