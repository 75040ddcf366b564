#include "c5/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "c5/error.hpp"

namespace c5 {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

std::vector<std::string> split_list(std::string_view value) {
    std::vector<std::string> items;
    std::string current;
    bool quoted = false;
    bool was_quoted = false;
    auto flush = [&] {
        std::string_view item = was_quoted ? std::string_view(current) : trim(current);
        if (was_quoted || !item.empty()) items.emplace_back(item);
        current.clear();
        was_quoted = false;
    };
    for (std::size_t i = 0; i < value.size(); ++i) {
        const char c = value[i];
        if (quoted) {
            if (c == '\\' && i + 1 < value.size()) {
                current.push_back(value[++i]);
            } else if (c == '"') {
                quoted = false;
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
            was_quoted = true;
            current.clear();
        } else if (c == ',') {
            flush();
        } else if (!was_quoted) {
            current.push_back(c);
        }
    }
    if (quoted) throw Error(ErrorKind::InvalidInput, "unterminated quote in list value");
    flush();
    return items;
}

Config Config::parse(std::string_view text, const std::string &origin) {
    Config cfg;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = trim(text.substr(start, end - start));
        ++line_no;
        start = end + 1;
        if (line.empty() || line.front() == '#') {
            if (end == text.size()) break;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorKind::InvalidInput,
                        origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        std::string key(trim(line.substr(0, eq)));
        if (key.empty()) {
            throw Error(ErrorKind::InvalidInput, origin + ":" + std::to_string(line_no) + ": empty key");
        }
        cfg.values_[key] = std::string(trim(line.substr(eq + 1)));
        if (end == text.size()) break;
    }
    return cfg;
}

Config Config::load(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::NotFound, "cannot open config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string());
}

std::optional<std::string> Config::get(const std::string &key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string Config::get_string(const std::string &key, const std::string &fallback) const {
    auto v = get(key);
    return v ? *v : fallback;
}

std::string Config::require_string(const std::string &key) const {
    auto v = get(key);
    if (!v || v->empty()) throw Error(ErrorKind::InvalidInput, "missing config key '" + key + "'");
    return *v;
}

std::int64_t Config::get_int(const std::string &key, std::int64_t fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::int64_t out = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size()) {
        throw Error(ErrorKind::InvalidInput, "config key '" + key + "' is not an integer: " + *v);
    }
    return out;
}

double Config::get_double(const std::string &key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        double out = std::stod(*v, &used);
        if (used != v->size()) throw std::invalid_argument(*v);
        return out;
    } catch (const std::exception &) {
        throw Error(ErrorKind::InvalidInput, "config key '" + key + "' is not a number: " + *v);
    }
}

bool Config::get_bool(const std::string &key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw Error(ErrorKind::InvalidInput, "config key '" + key + "' is not a boolean: " + *v);
}

std::vector<std::string> Config::get_list(const std::string &key,
                                          const std::vector<std::string> &fallback) const {
    auto v = get(key);
    return v ? split_list(*v) : fallback;
}

std::string Config::canonical(std::string_view prefix) const {
    std::string out;
    for (const auto &[k, v] : values_) {
        if (k.compare(0, prefix.size(), prefix) != 0) continue;
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

}  // namespace c5
