#pragma once

#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "walkoff/error.hpp"

namespace walkoff {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
        s.remove_suffix(1);
    return s;
}

/// Strict decimal parse of a whole string; nullopt on junk or empty input.
inline std::optional<double> parse_double(std::string_view s)
{
    s = trim(s);
    if (s.empty())
        return std::nullopt;
    if (s.front() == '+')
        s.remove_prefix(1);
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

inline std::optional<long long> parse_int(std::string_view s)
{
    s = trim(s);
    if (s.empty())
        return std::nullopt;
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

/// Flat `key = value` file. `#` starts a comment; blank lines are ignored.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::istream& in)
    {
        KeyValueConfig cfg;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto hash = line.find('#'); hash != std::string::npos)
                line.erase(hash);
            auto body = trim(line);
            if (body.empty())
                continue;
            auto eq = body.find('=');
            if (eq == std::string_view::npos)
                throw ParseError(lineno, "expected key=value");
            auto key = trim(body.substr(0, eq));
            auto value = trim(body.substr(eq + 1));
            if (key.empty())
                throw ParseError(lineno, "empty key");
            if (!cfg.values_.emplace(std::string(key), std::string(value)).second)
                throw ParseError(lineno, "duplicate key '" + std::string(key) + "'");
        }
        return cfg;
    }

    bool contains(const std::string& key) const { return values_.count(key) != 0; }

    double get_double(const std::string& key, double fallback) const
    {
        auto it = values_.find(key);
        if (it == values_.end())
            return fallback;
        auto v = parse_double(it->second);
        if (!v)
            throw ValidationError("field '" + key + "': not a number: '" + it->second + "'");
        return *v;
    }

    std::optional<std::string> get_string(const std::string& key) const
    {
        auto it = values_.find(key);
        if (it == values_.end())
            return std::nullopt;
        return it->second;
    }

    /// Throws ValidationError naming the first key not in `known`.
    void require_known(const std::set<std::string>& known) const
    {
        for (const auto& [k, v] : values_)
            if (!known.count(k))
                throw ValidationError("field '" + k + "': unknown key");
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// printf-style fixed-point rendering; reports must be byte-stable.
inline std::string fixed(double v, int precision)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

/// Shortest round-trippable rendering of a double.
inline std::string exact(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace walkoff
