#include "martingap/config.hpp"

#include "martingap/textutil.hpp"

#include <cerrno>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace martingap {

KvConfig KvConfig::parse_text(const std::string& text) {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key=value, got '" + t + "'");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": empty key");
        if (cfg.values_.count(key))
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": duplicate key '" + key + "'");
        cfg.values_[key] = value;
    }
    return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
    return parse_text(read_text_file(path));
}

bool KvConfig::has(const std::string& key) const {
    return values_.count(key) > 0;
}

std::string KvConfig::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end())
        throw ConfigError("missing required config key '" + key + "'");
    return it->second;
}

std::string KvConfig::get_string(const std::string& key,
                                 const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

namespace {

double parse_double_or_throw(const std::string& key,
                             const std::string& value) {
    const char* begin = value.c_str();
    char* end = nullptr;
    errno = 0;
    double parsed = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || errno == ERANGE)
        throw ConfigError("config key '" + key + "': '" + value +
                          "' is not a number");
    return parsed;
}

long parse_long_or_throw(const std::string& key, const std::string& value) {
    const char* begin = value.c_str();
    char* end = nullptr;
    errno = 0;
    long parsed = std::strtol(begin, &end, 10);
    if (end == begin || *end != '\0' || errno == ERANGE)
        throw ConfigError("config key '" + key + "': '" + value +
                          "' is not an integer");
    return parsed;
}

}  // namespace

double KvConfig::get_double(const std::string& key) const {
    return parse_double_or_throw(key, get_string(key));
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_double_or_throw(key, it->second);
}

long KvConfig::get_long(const std::string& key) const {
    return parse_long_or_throw(key, get_string(key));
}

long KvConfig::get_long(const std::string& key, long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_long_or_throw(key, it->second);
}

std::uint64_t KvConfig::get_uint64(const std::string& key,
                                   std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const char* begin = it->second.c_str();
    char* end = nullptr;
    errno = 0;
    unsigned long long parsed = std::strtoull(begin, &end, 10);
    if (end == begin || *end != '\0' || errno == ERANGE)
        throw ConfigError("config key '" + key + "': '" + it->second +
                          "' is not an unsigned integer");
    return static_cast<std::uint64_t>(parsed);
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': '" + v +
                      "' is not a boolean");
}

std::vector<std::size_t> KvConfig::get_sizes(
    const std::string& key, const std::string& fallback) const {
    std::string raw = get_string(key, fallback);
    std::vector<std::size_t> out;
    if (raw.find(':') != std::string::npos) {
        auto parts = split(raw, ':');
        if (parts.size() != 3)
            throw ConfigError("config key '" + key +
                              "': range must be start:stop:step");
        long start = parse_long_or_throw(key, trim(parts[0]));
        long stop = parse_long_or_throw(key, trim(parts[1]));
        long step = parse_long_or_throw(key, trim(parts[2]));
        if (start < 0 || stop < start || step < 1)
            throw ConfigError("config key '" + key + "': bad range bounds");
        for (long v = start; v <= stop; v += step)
            out.push_back(static_cast<std::size_t>(v));
        return out;
    }
    for (const auto& piece : split(raw, ',')) {
        std::string p = trim(piece);
        if (p.empty()) continue;
        long v = parse_long_or_throw(key, p);
        if (v < 0)
            throw ConfigError("config key '" + key + "': negative entry");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty())
        throw ConfigError("config key '" + key + "': empty list");
    return out;
}

void KvConfig::set(const std::string& key, const std::string& value) {
    values_[key] = value;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("read failed for " + path);
    return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
        if (ec)
            throw IoError("cannot create directory " +
                          p.parent_path().string());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace martingap
