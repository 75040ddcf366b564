#include <httplib.h>

#include <nlohmann/json.hpp>
#include <thread>

#include "c5/error.hpp"
#include "c5/hash128.hpp"
#include "c5/ingest.hpp"

namespace c5 {

namespace {

struct Url {
    std::string origin;  // scheme://host[:port]
    std::string target;  // /path?query
};

Url split_url(const std::string &url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorKind::InvalidInput, "not a URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

// Parses "bytes a-b/total"; returns {a, total or 0}.
std::pair<std::uint64_t, std::uint64_t> parse_content_range(const std::string &v) {
    std::uint64_t first = 0, total = 0;
    const auto sp = v.find(' ');
    const auto dash = v.find('-');
    const auto slash = v.find('/');
    if (sp == std::string::npos || dash == std::string::npos || slash == std::string::npos) {
        throw Error(ErrorKind::Corrupt, "malformed Content-Range: " + v);
    }
    first = std::stoull(v.substr(sp + 1, dash - sp - 1));
    if (v.compare(slash + 1, std::string::npos, "*") != 0) total = std::stoull(v.substr(slash + 1));
    return {first, total};
}

/// Streams `url` from byte `start` on. Retries transient failures with
/// exponential backoff, resuming where the previous attempt stopped.
std::uint64_t fetch_remote(const std::string &url, std::uint64_t start, const ByteSink &sink,
                           const FetchOptions &options) {
    const Url u = split_url(url);
    httplib::Client cli(u.origin);
    cli.set_follow_location(true);
    cli.set_connection_timeout(options.timeout);
    cli.set_read_timeout(options.timeout);

    std::uint64_t delivered = start;
    std::optional<std::uint64_t> total;
    int failures = 0;

    for (;;) {
        httplib::Headers headers;
        if (delivered > 0) headers.emplace("Range", "bytes=" + std::to_string(delivered) + "-");
        int status = 0;
        std::uint64_t skip = 0;
        const std::uint64_t before = delivered;
        std::optional<Error> fatal;

        auto res = cli.Get(
            u.target, headers,
            [&](const httplib::Response &r) {
                status = r.status;
                if (status == 200) {
                    skip = delivered;  // server ignored the range
                    if (r.has_header("Content-Length")) total = std::stoull(r.get_header_value("Content-Length"));
                } else if (status == 206) {
                    auto [first, whole] = parse_content_range(r.get_header_value("Content-Range"));
                    if (first != delivered) {
                        fatal = Error(ErrorKind::Corrupt, "range response starts at " + std::to_string(first));
                        return false;
                    }
                    if (whole) total = whole;
                } else {
                    return false;
                }
                return true;
            },
            [&](const char *data, std::size_t len) {
                if (skip > 0) {
                    const auto drop = static_cast<std::size_t>(std::min<std::uint64_t>(skip, len));
                    data += drop;
                    len -= drop;
                    skip -= drop;
                }
                if (len > 0) {
                    sink(std::string_view(data, len));
                    delivered += len;
                }
                return true;
            });

        if (fatal) throw *fatal;
        if (status == 404 || status == 410) throw Error(ErrorKind::NotFound, url + ": HTTP " + std::to_string(status));
        if (status == 416 && total && delivered == *total) return delivered;
        if (status >= 400 && status < 500) {
            throw Error(ErrorKind::NotFound, url + ": HTTP " + std::to_string(status));
        }
        if (res && (status == 200 || status == 206)) {
            if (!total || delivered == *total) return delivered;
            if (delivered > *total) throw Error(ErrorKind::Corrupt, url + ": more bytes than declared");
        }
        // transient: transport error, 5xx, or short body
        if (delivered > before) failures = 0;
        if (++failures >= options.attempts) {
            const std::string why = res ? ("HTTP " + std::to_string(status)) : httplib::to_string(res.error());
            throw Error(ErrorKind::Transient, url + ": giving up after " + std::to_string(options.attempts) +
                                                  " attempts (" + why + ")");
        }
        std::this_thread::sleep_for(options.backoff * (1 << (failures - 1)));
    }
}

}  // namespace

bool is_remote(std::string_view source) {
    return source.rfind("http://", 0) == 0 || source.rfind("https://", 0) == 0;
}

std::uint64_t fetch_archive(const std::string &source, const ByteSink &sink, const FetchOptions &options) {
    if (is_remote(source)) return fetch_remote(source, 0, sink, options);
    FileSource file(source);
    std::vector<char> buf(1 << 16);
    std::uint64_t total = 0;
    for (;;) {
        const std::size_t got = file.read(buf.data(), buf.size());
        if (got == 0) break;
        sink(std::string_view(buf.data(), got));
        total += got;
    }
    return total;
}

std::filesystem::path fetch_to_cache(const std::string &url, const std::filesystem::path &cache_dir,
                                     const FetchOptions &options) {
    std::filesystem::create_directories(cache_dir);
    std::string name = url.substr(url.find_last_of('/') + 1);
    if (name.empty()) name = "index";
    const auto final_path = cache_dir / (murmur3_128(url).hex().substr(0, 12) + "-" + name);
    if (std::filesystem::exists(final_path)) return final_path;

    const auto part = std::filesystem::path(final_path.string() + ".part");
    std::uint64_t start = std::filesystem::exists(part) ? std::filesystem::file_size(part) : 0;
    {
        std::ofstream out(part, std::ios::binary | std::ios::app);
        if (!out) throw Error(ErrorKind::Storage, "cannot write " + part.string());
        fetch_remote(url, start, [&](std::string_view chunk) {
            out.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
            if (!out) throw Error(ErrorKind::Storage, "write failed: " + part.string());
        }, options);
    }
    std::filesystem::rename(part, final_path);
    return final_path;
}

// ---------------------------------------------------------------------------

namespace {

std::string url_encode(const std::string &s) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || c == '*' || c == '/' || c == ':') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 0xF]);
        }
    }
    return out;
}

}  // namespace

void HttpIndex::query(const std::string &crawl_id, const std::string &language_code,
                      std::optional<std::uint64_t> limit, const PointerSink &sink) {
    validate_crawl_id(crawl_id);
    if (limit && *limit == 0) return;
    const std::string url = base_url_ + "/" + crawl_id + "-index?url=" + url_encode(url_pattern_) + "&output=json";

    std::string pending;
    std::uint64_t emitted = 0;
    bool done = false;
    auto handle = [&](std::string_view line) {
        if (done || line.empty()) return;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw Error(ErrorKind::Corrupt, "bad index line from " + url);
        if (!j.contains("languages")) {
            throw Error(ErrorKind::Unsupported, "index for " + crawl_id + " has no language column");
        }
        const std::string langs = j.value("languages", "");
        const std::string primary = langs.substr(0, langs.find(','));
        if (primary != language_code) return;
        WetPointer p;
        p.crawl_id = crawl_id;
        p.target_uri = j.value("url", "");
        p.declared_language = langs;
        const std::string wet = warc_to_wet_path(j.value("filename", ""));
        p.archive_path = is_remote(wet) ? wet : data_url_ + "/" + wet;
        p.offset = std::stoull(j.value("offset", "0"));
        p.content_length = std::stoull(j.value("length", "0"));
        sink(p);
        if (limit && ++emitted >= *limit) done = true;
    };
    // the index response is small per query; parse lines as they arrive
    fetch_remote(url, 0, [&](std::string_view chunk) {
        pending.append(chunk);
        std::size_t start = 0;
        for (auto nl = pending.find('\n'); nl != std::string::npos; nl = pending.find('\n', start)) {
            handle(std::string_view(pending).substr(start, nl - start));
            start = nl + 1;
        }
        pending.erase(0, start);
    }, options_);
    handle(pending);
}

}  // namespace c5
