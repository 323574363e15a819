#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cdrlab/csv.hpp"
#include "cdrlab/errors.hpp"

namespace cdrlab {

// Flat key/value configuration: one `dotted.key = value` per line, `#`
// starts a comment. Every getter records its key so unknown (never read)
// keys can be reported as errors instead of being silently ignored.
class Config {
public:
    Config() = default;

    static Config from_string(const std::string& text,
                              const std::string& origin = "<config>") {
        Config cfg;
        cfg.origin_ = origin;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos)
                line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": expected 'key = value', got '" + trimmed + "'");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": empty key");
            if (cfg.values_.count(key))
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": duplicate key '" + key + "'");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    static Config from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw FileError("cannot read config file: " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        return from_string(buf.str(), path);
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& def) const {
        used_.insert(key);
        const auto it = values_.find(key);
        return it == values_.end() ? def : it->second;
    }

    double get_double(const std::string& key, double def) const {
        used_.insert(key);
        const auto it = values_.find(key);
        if (it == values_.end()) return def;
        try {
            return parse_double(it->second);
        } catch (const FileError&) {
            throw ConfigError(key + ": expected a number, got '" + it->second + "'");
        }
    }

    std::int64_t get_int(const std::string& key, std::int64_t def) const {
        used_.insert(key);
        const auto it = values_.find(key);
        if (it == values_.end()) return def;
        try {
            return parse_int(it->second);
        } catch (const FileError&) {
            throw ConfigError(key + ": expected an integer, got '" + it->second + "'");
        }
    }

    bool get_bool(const std::string& key, bool def) const {
        used_.insert(key);
        const auto it = values_.find(key);
        if (it == values_.end()) return def;
        const std::string v = lower(it->second);
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError(key + ": expected a boolean, got '" + it->second + "'");
    }

    std::vector<std::string> get_string_list(const std::string& key,
                                             std::vector<std::string> def) const {
        used_.insert(key);
        const auto it = values_.find(key);
        if (it == values_.end()) return def;
        std::vector<std::string> out;
        for (const auto& cell : split_csv_line(it->second)) {
            const std::string v = trim(cell);
            if (!v.empty()) out.push_back(v);
        }
        if (out.empty()) throw ConfigError(key + ": empty list");
        return out;
    }

    std::vector<double> get_double_list(const std::string& key,
                                        std::vector<double> def) const {
        std::vector<double> out;
        for (const auto& v : get_string_list(key, {})) {
            try {
                out.push_back(parse_double(v));
            } catch (const FileError&) {
                throw ConfigError(key + ": expected numbers, got '" + v + "'");
            }
        }
        return out.empty() ? def : out;
    }

    std::vector<std::uint64_t> get_u64_list(const std::string& key,
                                            std::vector<std::uint64_t> def) const {
        std::vector<std::uint64_t> out;
        for (const auto& v : get_string_list(key, {})) {
            const auto n = get_parsed_u64(key, v);
            out.push_back(n);
        }
        return out.empty() ? def : out;
    }

    std::vector<int> get_int_list(const std::string& key, std::vector<int> def) const {
        std::vector<int> out;
        for (const auto& v : get_string_list(key, {})) {
            try {
                out.push_back(static_cast<int>(parse_int(v)));
            } catch (const FileError&) {
                throw ConfigError(key + ": expected integers, got '" + v + "'");
            }
        }
        return out.empty() ? def : out;
    }

    /// Throws if any key in the file was never read by a getter.
    void reject_unknown_keys() const {
        std::vector<std::string> unknown;
        for (const auto& [key, value] : values_)
            if (!used_.count(key)) unknown.push_back(key);
        if (unknown.empty()) return;
        std::string msg = origin_ + ": unknown key";
        msg += unknown.size() > 1 ? "s: " : ": ";
        for (std::size_t i = 0; i < unknown.size(); ++i) {
            if (i) msg += ", ";
            msg += "'" + unknown[i] + "'";
        }
        throw ConfigError(msg);
    }

private:
    static std::string trim(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }

    static std::string lower(std::string s) {
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
            return static_cast<char>(std::tolower(c));
        });
        return s;
    }

    std::uint64_t get_parsed_u64(const std::string& key, const std::string& v) const {
        try {
            const long long n = parse_int(v);
            if (n < 0) throw ConfigError(key + ": expected a nonnegative integer");
            return static_cast<std::uint64_t>(n);
        } catch (const FileError&) {
            throw ConfigError(key + ": expected integers, got '" + v + "'");
        }
    }

    std::string origin_ = "<config>";
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

} // namespace cdrlab
