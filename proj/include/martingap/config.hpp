#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace martingap {

// Bad or missing configuration; the CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Unreadable or unwritable files; the CLI maps this to exit code 4.
class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Flat key=value store. Lines are `key = value`, blank, or `#` comments;
// a duplicate key in one file is an error, not a silent override.
class KvConfig {
  public:
    KvConfig() = default;

    static KvConfig parse_text(const std::string& text);
    static KvConfig parse_file(const std::string& path);

    bool has(const std::string& key) const;
    // Missing key without a default is a ConfigError; a present key that
    // fails to parse at the requested type is too.
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key,
                           const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long get_long(const std::string& key) const;
    long get_long(const std::string& key, long fallback) const;
    std::uint64_t get_uint64(const std::string& key,
                             std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    // Comma-separated longs, or start:stop:step (inclusive) ranges.
    std::vector<std::size_t> get_sizes(const std::string& key,
                                       const std::string& fallback) const;

    void set(const std::string& key, const std::string& value);
    const std::map<std::string, std::string>& values() const {
        return values_;
    }

  private:
    std::map<std::string, std::string> values_;
};

std::string read_text_file(const std::string& path);
// Creates parent directories; failures throw IoError.
void write_text_file(const std::string& path, const std::string& content);

}  // namespace martingap
