#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace c5 {

/// Flat `key = value` configuration. Lines starting with '#' are
/// comments. Keys are dotted (`clean.min_words_per_line`). List values
/// are comma-separated; an item may be double-quoted to keep commas or
/// surrounding spaces.
class Config {
   public:
    Config() = default;

    static Config parse(std::string_view text, const std::string &origin = "<string>");
    static Config load(const std::filesystem::path &path);

    void set(const std::string &key, std::string value) { values_[key] = std::move(value); }
    [[nodiscard]] bool has(const std::string &key) const { return values_.count(key) != 0; }
    [[nodiscard]] const std::map<std::string, std::string> &values() const { return values_; }

    [[nodiscard]] std::optional<std::string> get(const std::string &key) const;
    [[nodiscard]] std::string get_string(const std::string &key, const std::string &fallback) const;
    [[nodiscard]] std::string require_string(const std::string &key) const;
    [[nodiscard]] std::int64_t get_int(const std::string &key, std::int64_t fallback) const;
    [[nodiscard]] double get_double(const std::string &key, double fallback) const;
    [[nodiscard]] bool get_bool(const std::string &key, bool fallback) const;
    [[nodiscard]] std::vector<std::string> get_list(const std::string &key,
                                                    const std::vector<std::string> &fallback) const;

    /// Entries whose key starts with `prefix`, in canonical text form.
    [[nodiscard]] std::string canonical(std::string_view prefix = {}) const;

   private:
    std::map<std::string, std::string> values_;
};

std::vector<std::string> split_list(std::string_view value);

}  // namespace c5
