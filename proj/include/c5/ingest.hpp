#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

namespace c5 {

/// Index entry pointing at one record of a crawl.
struct WetPointer {
    std::string crawl_id;
    std::string archive_path;
    std::string target_uri;
    std::optional<std::string> declared_language;
    std::uint64_t offset = 0;
    std::uint64_t content_length = 0;

    bool operator==(const WetPointer &) const = default;
};

/// One "conversion" record from a WET archive.
struct WetRecord {
    std::string target_uri;
    std::string warc_date;
    std::string body;  // valid UTF-8, invalid input bytes replaced
    std::uint64_t byte_length = 0;  // declared Content-Length

    bool operator==(const WetRecord &) const = default;
};

// ---------------------------------------------------------------------------
// Byte sources

class ByteSource {
   public:
    virtual ~ByteSource() = default;
    /// Reads up to `n` bytes; returns 0 only at end of stream.
    virtual std::size_t read(char *buf, std::size_t n) = 0;
};

class MemorySource : public ByteSource {
   public:
    explicit MemorySource(std::string_view data) : data_(data) {}
    std::size_t read(char *buf, std::size_t n) override;

   private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

class FileSource : public ByteSource {
   public:
    explicit FileSource(const std::filesystem::path &path);
    std::size_t read(char *buf, std::size_t n) override;
    [[nodiscard]] std::uint64_t bytes_read() const { return bytes_read_; }

   private:
    std::ifstream in_;
    std::uint64_t bytes_read_ = 0;
};

/// Inflates a (possibly multi-member) gzip stream.
class GzipSource : public ByteSource {
   public:
    explicit GzipSource(std::unique_ptr<ByteSource> inner);
    ~GzipSource() override;
    GzipSource(const GzipSource &) = delete;
    GzipSource &operator=(const GzipSource &) = delete;

    std::size_t read(char *buf, std::size_t n) override;

   private:
    std::unique_ptr<ByteSource> inner_;
    z_stream z_{};
    std::vector<char> in_buf_;
    bool inner_eof_ = false;
    bool mid_member_ = false;
    bool finished_ = false;
};

/// Opens a local archive, transparently inflating gzip input.
std::unique_ptr<ByteSource> open_archive(const std::filesystem::path &path);

std::string gzip_compress(std::string_view data, int level = 6);

// ---------------------------------------------------------------------------
// WET parsing

struct ParseStats {
    std::uint64_t records_seen = 0;
    std::uint64_t conversion_records = 0;
    std::uint64_t skipped_records = 0;
    std::uint64_t bytes_consumed = 0;
};

/// Single-pass reader over WARC/1.0 framing. Only the current record is
/// held in memory.
class WetReader {
   public:
    explicit WetReader(ByteSource &source) : source_(source) {}

    /// Fills `out` with the next conversion record; false at end of input.
    bool next(WetRecord &out);

    [[nodiscard]] const ParseStats &stats() const { return stats_; }

   private:
    bool fill();
    bool read_line(std::string &line);
    void read_exact(std::string *dest, std::uint64_t n);
    [[nodiscard]] std::uint64_t offset() const { return consumed_ + pos_; }

    ByteSource &source_;
    std::string buf_;
    std::size_t pos_ = 0;
    std::uint64_t consumed_ = 0;  // bytes dropped from the front of buf_
    bool eof_ = false;
    ParseStats stats_;
};

/// Parses a whole in-memory decompressed buffer.
std::vector<WetRecord> parse_wet(std::string_view bytes, ParseStats *stats = nullptr);

/// WET framing for one conversion record.
std::string serialize_wet(const WetRecord &record);

// ---------------------------------------------------------------------------
// Index access

struct CrawlId {
    int year = 0;
    int week = 0;
};

/// Parses "CC-MAIN-YYYY-WW". Throws NotFound for malformed ids and
/// Unsupported for crawls older than CC-MAIN-2018-34, the first crawl
/// whose index carries a language column.
CrawlId validate_crawl_id(const std::string &crawl_id);

/// Rewrites a WARC file path from the index into the matching WET path.
std::string warc_to_wet_path(const std::string &warc_path);

using PointerSink = std::function<void(const WetPointer &)>;

class IndexBackend {
   public:
    virtual ~IndexBackend() = default;
    /// Streams pointers whose primary declared language equals
    /// `language_code`, at most `limit` of them.
    virtual void query(const std::string &crawl_id, const std::string &language_code,
                       std::optional<std::uint64_t> limit, const PointerSink &sink) = 0;
};

/// Reads `<dir>/<crawl_id>.tsv` or `<dir>/<crawl_id>.tsv.gz`; one record
/// per line: url, language, filename, offset, length (tab-separated).
class LocalIndex : public IndexBackend {
   public:
    explicit LocalIndex(std::filesystem::path dir) : dir_(std::move(dir)) {}
    void query(const std::string &crawl_id, const std::string &language_code,
               std::optional<std::uint64_t> limit, const PointerSink &sink) override;

   private:
    std::filesystem::path dir_;
};

struct FetchOptions {
    int attempts = 3;
    std::chrono::milliseconds backoff{1000};
    std::chrono::seconds timeout{60};
};

/// CDX-style HTTP index (`{base}/{crawl}-index?url=...&output=json`).
/// Archive paths are rewritten to WET paths under `data_url`.
class HttpIndex : public IndexBackend {
   public:
    HttpIndex(std::string base_url, std::string url_pattern, std::string data_url, FetchOptions options = {})
        : base_url_(std::move(base_url)),
          url_pattern_(std::move(url_pattern)),
          data_url_(std::move(data_url)),
          options_(options) {}
    void query(const std::string &crawl_id, const std::string &language_code,
               std::optional<std::uint64_t> limit, const PointerSink &sink) override;

   private:
    std::string base_url_;
    std::string url_pattern_;
    std::string data_url_;
    FetchOptions options_;
};

std::vector<WetPointer> query_index(IndexBackend &backend, const std::string &crawl_id,
                                    const std::string &language_code, std::optional<std::uint64_t> limit);

// ---------------------------------------------------------------------------
// Fetching

using ByteSink = std::function<void(std::string_view)>;

[[nodiscard]] bool is_remote(std::string_view source);

/// Streams the raw archive bytes of a local path or http(s) URL into
/// `sink`. Remote transfers resume with range requests after transient
/// failures. Returns the number of bytes delivered.
std::uint64_t fetch_archive(const std::string &source, const ByteSink &sink, const FetchOptions &options = {});

/// Downloads `url` into `cache_dir`, resuming a partial file left by an
/// earlier run. Returns the completed file path.
std::filesystem::path fetch_to_cache(const std::string &url, const std::filesystem::path &cache_dir,
                                     const FetchOptions &options = {});

/// Cache directory from $C5_CACHE_DIR, else `fallback`.
std::filesystem::path cache_dir_from_env(const std::filesystem::path &fallback);

// ---------------------------------------------------------------------------
// Ingest driver

struct IngestStats {
    std::uint64_t bytes_downloaded = 0;
    std::uint64_t records_parsed = 0;
    std::uint64_t records_selected = 0;
    std::uint64_t records_skipped = 0;  // non-conversion records
};

using RecordSink = std::function<void(WetRecord &&)>;

/// Fetches each archive referenced by `pointers` once (in first-seen
/// order) and emits the records whose URI was selected. Relative local
/// archive paths resolve against `base_dir`.
IngestStats ingest_pointers(const std::vector<WetPointer> &pointers, const std::filesystem::path &base_dir,
                            const std::filesystem::path &cache_dir, const FetchOptions &options,
                            const RecordSink &sink);

/// Emits every conversion record of the given archives.
IngestStats ingest_archives(const std::vector<std::filesystem::path> &archives, const RecordSink &sink);

}  // namespace c5
