#include "c5/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <unordered_map>
#include <unordered_set>

#include "c5/error.hpp"
#include "c5/utf8.hpp"

namespace c5 {

namespace {

constexpr std::size_t kChunk = 1 << 16;
constexpr std::size_t kMaxHeaderLine = 1 << 16;

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        char x = a[i], y = b[i];
        if (x >= 'A' && x <= 'Z') x = static_cast<char>(x + 32);
        if (y >= 'A' && y <= 'Z') y = static_cast<char>(y + 32);
        if (x != y) return false;
    }
    return true;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------

std::size_t MemorySource::read(char *buf, std::size_t n) {
    const std::size_t take = std::min(n, data_.size() - pos_);
    std::memcpy(buf, data_.data() + pos_, take);
    pos_ += take;
    return take;
}

FileSource::FileSource(const std::filesystem::path &path) : in_(path, std::ios::binary) {
    if (!in_) throw Error(ErrorKind::NotFound, "cannot open " + path.string());
}

std::size_t FileSource::read(char *buf, std::size_t n) {
    in_.read(buf, static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(in_.gcount());
    bytes_read_ += got;
    return got;
}

GzipSource::GzipSource(std::unique_ptr<ByteSource> inner) : inner_(std::move(inner)), in_buf_(kChunk) {
    if (inflateInit2(&z_, 15 + 32) != Z_OK) throw Error(ErrorKind::Corrupt, "inflateInit2 failed");
}

GzipSource::~GzipSource() { inflateEnd(&z_); }

std::size_t GzipSource::read(char *buf, std::size_t n) {
    if (finished_ || n == 0) return 0;
    z_.next_out = reinterpret_cast<Bytef *>(buf);
    z_.avail_out = static_cast<uInt>(std::min<std::size_t>(n, UINT32_MAX));
    while (z_.avail_out == static_cast<uInt>(std::min<std::size_t>(n, UINT32_MAX))) {
        if (z_.avail_in == 0) {
            if (inner_eof_) {
                if (mid_member_) throw Error(ErrorKind::Corrupt, "truncated gzip stream");
                finished_ = true;
                break;
            }
            const std::size_t got = inner_->read(in_buf_.data(), in_buf_.size());
            if (got == 0) {
                inner_eof_ = true;
                continue;
            }
            z_.next_in = reinterpret_cast<Bytef *>(in_buf_.data());
            z_.avail_in = static_cast<uInt>(got);
        }
        const int ret = inflate(&z_, Z_NO_FLUSH);
        mid_member_ = ret != Z_STREAM_END;
        if (ret == Z_STREAM_END) {
            // WET archives concatenate one gzip member per record
            if (inflateReset(&z_) != Z_OK) throw Error(ErrorKind::Corrupt, "inflateReset failed");
        } else if (ret == Z_BUF_ERROR) {
            if (z_.avail_in == 0 && inner_eof_) {
                throw Error(ErrorKind::Corrupt, "truncated gzip stream");
            }
        } else if (ret != Z_OK) {
            throw Error(ErrorKind::Corrupt, std::string("gzip inflate failed: ") + (z_.msg ? z_.msg : "?"));
        }
    }
    return static_cast<std::size_t>(reinterpret_cast<char *>(z_.next_out) - buf);
}

std::unique_ptr<ByteSource> open_archive(const std::filesystem::path &path) {
    bool gz = false;
    {
        std::ifstream probe(path, std::ios::binary);
        if (!probe) throw Error(ErrorKind::NotFound, "cannot open " + path.string());
        unsigned char magic[2] = {0, 0};
        probe.read(reinterpret_cast<char *>(magic), 2);
        gz = probe.gcount() == 2 && magic[0] == 0x1f && magic[1] == 0x8b;
    }
    auto file = std::make_unique<FileSource>(path);
    if (gz) return std::make_unique<GzipSource>(std::move(file));
    return file;
}

std::string gzip_compress(std::string_view data, int level) {
    z_stream z{};
    if (deflateInit2(&z, level, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
        throw Error(ErrorKind::Corrupt, "deflateInit2 failed");
    }
    std::string out;
    out.resize(deflateBound(&z, static_cast<uLong>(data.size())) + 32);
    z.next_in = reinterpret_cast<Bytef *>(const_cast<char *>(data.data()));
    z.avail_in = static_cast<uInt>(data.size());
    z.next_out = reinterpret_cast<Bytef *>(out.data());
    z.avail_out = static_cast<uInt>(out.size());
    const int ret = deflate(&z, Z_FINISH);
    out.resize(z.total_out);
    deflateEnd(&z);
    if (ret != Z_STREAM_END) throw Error(ErrorKind::Corrupt, "deflate failed");
    return out;
}

// ---------------------------------------------------------------------------

bool WetReader::fill() {
    if (eof_) return false;
    if (pos_ > 0 && pos_ >= buf_.size() / 2) {
        buf_.erase(0, pos_);
        consumed_ += pos_;
        pos_ = 0;
    }
    const std::size_t old = buf_.size();
    buf_.resize(old + kChunk);
    const std::size_t got = source_.read(buf_.data() + old, kChunk);
    buf_.resize(old + got);
    if (got == 0) eof_ = true;
    return got > 0;
}

bool WetReader::read_line(std::string &line) {
    std::size_t scan = pos_;
    for (;;) {
        const auto nl = buf_.find('\n', scan);
        if (nl != std::string::npos) {
            std::size_t end = nl;
            if (end > pos_ && buf_[end - 1] == '\r') --end;
            line.assign(buf_, pos_, end - pos_);
            pos_ = nl + 1;
            return true;
        }
        const std::size_t scanned = buf_.size() - pos_;
        if (scanned > kMaxHeaderLine) throw ParseError(offset(), "header line too long");
        if (!fill()) {
            if (pos_ == buf_.size()) return false;
            line.assign(buf_, pos_, std::string::npos);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            pos_ = buf_.size();
            return true;
        }
        scan = pos_ + scanned;
    }
}

void WetReader::read_exact(std::string *dest, std::uint64_t n) {
    while (n > 0) {
        if (pos_ == buf_.size() && !fill()) throw ParseError(offset(), "truncated record body");
        const auto take = static_cast<std::size_t>(std::min<std::uint64_t>(n, buf_.size() - pos_));
        if (dest) dest->append(buf_, pos_, take);
        pos_ += take;
        n -= take;
    }
}

bool WetReader::next(WetRecord &out) {
    std::string line;
    std::string raw_body;
    for (;;) {
        // version line, skipping separators between records
        std::uint64_t line_offset = offset();
        bool got = false;
        while ((got = read_line(line))) {
            if (!line.empty()) break;
            line_offset = offset();
        }
        if (!got) {
            stats_.bytes_consumed = offset();
            return false;
        }
        if (line.rfind("WARC/", 0) != 0) throw ParseError(line_offset, "expected WARC version line");

        std::string type, uri, date;
        std::optional<std::uint64_t> length;
        for (;;) {
            const std::uint64_t here = offset();
            if (!read_line(line)) throw ParseError(here, "truncated record header");
            if (line.empty()) break;
            const auto colon = line.find(':');
            if (colon == std::string::npos || colon == 0) throw ParseError(here, "malformed header line");
            const std::string_view name = trim(std::string_view(line).substr(0, colon));
            const std::string_view value = trim(std::string_view(line).substr(colon + 1));
            if (iequals(name, "WARC-Type")) {
                type = value;
            } else if (iequals(name, "WARC-Target-URI")) {
                uri = value;
            } else if (iequals(name, "WARC-Date")) {
                date = value;
            } else if (iequals(name, "Content-Length")) {
                std::uint64_t n = 0;
                auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
                if (ec != std::errc() || p != value.data() + value.size()) {
                    throw ParseError(here, "invalid Content-Length");
                }
                length = n;
            }
        }
        if (!length) throw ParseError(offset(), "record without Content-Length");

        ++stats_.records_seen;
        const bool keep = type == "conversion";
        raw_body.clear();
        if (keep) raw_body.reserve(static_cast<std::size_t>(*length));
        read_exact(keep ? &raw_body : nullptr, *length);

        // record terminator: two line breaks
        for (int i = 0; i < 2; ++i) {
            const std::uint64_t here = offset();
            if (pos_ == buf_.size() && !fill()) throw ParseError(here, "missing record terminator");
            if (buf_[pos_] == '\r') {
                ++pos_;
                if (pos_ == buf_.size() && !fill()) throw ParseError(here, "missing record terminator");
            }
            if (buf_[pos_] != '\n') throw ParseError(here, "body does not match Content-Length");
            ++pos_;
        }

        if (!keep) {
            ++stats_.skipped_records;
            continue;
        }
        ++stats_.conversion_records;
        out.target_uri = std::move(uri);
        out.warc_date = std::move(date);
        out.body = utf8::is_valid(raw_body) ? std::move(raw_body) : utf8::decode_lossy(raw_body);
        out.byte_length = *length;
        stats_.bytes_consumed = offset();
        return true;
    }
}

std::vector<WetRecord> parse_wet(std::string_view bytes, ParseStats *stats) {
    MemorySource src(bytes);
    WetReader reader(src);
    std::vector<WetRecord> records;
    WetRecord rec;
    while (reader.next(rec)) records.push_back(std::move(rec));
    if (stats) *stats = reader.stats();
    return records;
}

std::string serialize_wet(const WetRecord &record) {
    std::string out = "WARC/1.0\r\nWARC-Type: conversion\r\n";
    out += "WARC-Target-URI: " + record.target_uri + "\r\n";
    if (!record.warc_date.empty()) out += "WARC-Date: " + record.warc_date + "\r\n";
    out += "Content-Type: text/plain\r\n";
    out += "Content-Length: " + std::to_string(record.body.size()) + "\r\n\r\n";
    out += record.body;
    out += "\r\n\r\n";
    return out;
}

// ---------------------------------------------------------------------------

CrawlId validate_crawl_id(const std::string &crawl_id) {
    constexpr std::string_view prefix = "CC-MAIN-";
    auto bad = [&] { return Error(ErrorKind::NotFound, "unknown crawl id '" + crawl_id + "'"); };
    if (crawl_id.size() != prefix.size() + 7 || crawl_id.compare(0, prefix.size(), prefix) != 0 ||
        crawl_id[prefix.size() + 4] != '-') {
        throw bad();
    }
    CrawlId id;
    const char *p = crawl_id.data() + prefix.size();
    if (std::from_chars(p, p + 4, id.year).ptr != p + 4) throw bad();
    if (std::from_chars(p + 5, p + 7, id.week).ptr != p + 7) throw bad();
    if (id.week < 1 || id.week > 53 || id.year < 2008) throw bad();
    if (id.year < 2018 || (id.year == 2018 && id.week < 34)) {
        throw Error(ErrorKind::Unsupported, "crawl " + crawl_id + " predates the index language column");
    }
    return id;
}

std::string warc_to_wet_path(const std::string &warc_path) {
    std::string out = warc_path;
    const auto dir = out.rfind("/warc/");
    const std::string_view ext = ".warc.gz";
    if (dir == std::string::npos || out.size() < ext.size() ||
        out.compare(out.size() - ext.size(), ext.size(), ext) != 0) {
        return out;
    }
    out.replace(out.size() - ext.size(), ext.size(), ".warc.wet.gz");
    out.replace(dir, 6, "/wet/");
    return out;
}

namespace {

std::string primary_language(std::string_view field) {
    const auto comma = field.find(',');
    return std::string(trim(field.substr(0, comma)));
}

}  // namespace

void LocalIndex::query(const std::string &crawl_id, const std::string &language_code,
                       std::optional<std::uint64_t> limit, const PointerSink &sink) {
    validate_crawl_id(crawl_id);
    std::filesystem::path path = dir_ / (crawl_id + ".tsv");
    if (!std::filesystem::exists(path)) path = dir_ / (crawl_id + ".tsv.gz");
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorKind::NotFound, "no index for crawl " + crawl_id + " in " + dir_.string());
    }
    if (limit && *limit == 0) return;

    auto src = open_archive(path);
    std::string pending;
    std::vector<char> chunk(kChunk);
    std::uint64_t emitted = 0;
    std::uint64_t line_no = 0;
    bool done = false;

    auto handle = [&](std::string_view line) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) return;
        std::vector<std::string_view> fields;
        std::size_t start = 0;
        for (;;) {
            const auto tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
            if (tab == std::string_view::npos) break;
            start = tab + 1;
        }
        if (fields.size() == 4) {
            throw Error(ErrorKind::Unsupported, "index " + path.string() + " has no language column");
        }
        if (fields.size() != 5) {
            throw Error(ErrorKind::Corrupt, path.string() + ":" + std::to_string(line_no) + ": expected 5 fields");
        }
        if (primary_language(fields[1]) != language_code) return;
        WetPointer ptr;
        ptr.crawl_id = crawl_id;
        ptr.target_uri = std::string(fields[0]);
        ptr.declared_language = std::string(fields[1]);
        ptr.archive_path = warc_to_wet_path(std::string(fields[2]));
        auto parse_u64 = [&](std::string_view v) {
            std::uint64_t n = 0;
            auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
            if (ec != std::errc() || p != v.data() + v.size()) {
                throw Error(ErrorKind::Corrupt, path.string() + ":" + std::to_string(line_no) + ": bad number");
            }
            return n;
        };
        ptr.offset = parse_u64(fields[3]);
        ptr.content_length = parse_u64(fields[4]);
        if (ptr.archive_path.empty()) {
            throw Error(ErrorKind::Corrupt, path.string() + ":" + std::to_string(line_no) + ": empty filename");
        }
        sink(ptr);
        if (limit && ++emitted >= *limit) done = true;
    };

    while (!done) {
        const std::size_t got = src->read(chunk.data(), chunk.size());
        if (got == 0) break;
        pending.append(chunk.data(), got);
        std::size_t start = 0;
        for (;;) {
            const auto nl = pending.find('\n', start);
            if (nl == std::string::npos || done) break;
            handle(std::string_view(pending).substr(start, nl - start));
            start = nl + 1;
        }
        pending.erase(0, start);
    }
    if (!done && !pending.empty()) handle(pending);
}

std::vector<WetPointer> query_index(IndexBackend &backend, const std::string &crawl_id,
                                    const std::string &language_code, std::optional<std::uint64_t> limit) {
    std::vector<WetPointer> out;
    backend.query(crawl_id, language_code, limit, [&](const WetPointer &p) { out.push_back(p); });
    return out;
}

// ---------------------------------------------------------------------------

std::filesystem::path cache_dir_from_env(const std::filesystem::path &fallback) {
    if (const char *env = std::getenv("C5_CACHE_DIR"); env && *env) return env;
    return fallback;
}

namespace {

IngestStats drain(ByteSource &src, const std::unordered_set<std::string> *wanted, const RecordSink &sink) {
    IngestStats stats;
    WetReader reader(src);
    WetRecord rec;
    while (reader.next(rec)) {
        ++stats.records_parsed;
        if (wanted && wanted->count(rec.target_uri) == 0) continue;
        ++stats.records_selected;
        sink(std::move(rec));
        rec = WetRecord{};
    }
    stats.records_skipped = reader.stats().skipped_records;
    return stats;
}

void accumulate(IngestStats &into, const IngestStats &from) {
    into.bytes_downloaded += from.bytes_downloaded;
    into.records_parsed += from.records_parsed;
    into.records_selected += from.records_selected;
    into.records_skipped += from.records_skipped;
}

}  // namespace

IngestStats ingest_pointers(const std::vector<WetPointer> &pointers, const std::filesystem::path &base_dir,
                            const std::filesystem::path &cache_dir, const FetchOptions &options,
                            const RecordSink &sink) {
    std::vector<std::string> order;
    std::unordered_map<std::string, std::unordered_set<std::string>> by_archive;
    for (const auto &p : pointers) {
        auto [it, inserted] = by_archive.try_emplace(p.archive_path);
        if (inserted) order.push_back(p.archive_path);
        it->second.insert(p.target_uri);
    }
    IngestStats total;
    for (const auto &archive : order) {
        std::filesystem::path local;
        if (is_remote(archive)) {
            local = fetch_to_cache(archive, cache_dir, options);
        } else {
            local = std::filesystem::path(archive).is_absolute() ? std::filesystem::path(archive) : base_dir / archive;
        }
        auto src = open_archive(local);
        IngestStats s = drain(*src, &by_archive[archive], sink);
        s.bytes_downloaded = std::filesystem::file_size(local);
        accumulate(total, s);
    }
    return total;
}

IngestStats ingest_archives(const std::vector<std::filesystem::path> &archives, const RecordSink &sink) {
    IngestStats total;
    for (const auto &path : archives) {
        auto src = open_archive(path);
        IngestStats s = drain(*src, nullptr, sink);
        s.bytes_downloaded = std::filesystem::file_size(path);
        accumulate(total, s);
    }
    return total;
}

}  // namespace c5
