#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string_view>
#include <vector>

#include "c5/clean.hpp"
#include "c5/hash128.hpp"

namespace c5 {

/// Key of an exact line: MurmurHash3-128 of its bytes.
inline Hash128 line_key(std::string_view line) { return murmur3_128(line); }

/// Open-addressing set of 128-bit keys (16 bytes per slot).
class KeySet {
   public:
    bool insert(const Hash128 &key);
    [[nodiscard]] bool contains(const Hash128 &key) const;
    [[nodiscard]] std::size_t size() const { return size_ + (has_zero_ ? 1 : 0); }
    [[nodiscard]] std::size_t capacity() const { return slots_.size(); }
    void clear();
    [[nodiscard]] std::vector<Hash128> sorted_keys() const;

   private:
    void grow();

    std::vector<Hash128> slots_;
    std::size_t size_ = 0;
    bool has_zero_ = false;
};

/// Immutable sorted key file with a sparse in-memory index.
class SortedRun {
   public:
    static std::unique_ptr<SortedRun> write(const std::filesystem::path &path, const std::vector<Hash128> &sorted);
    static std::unique_ptr<SortedRun> open(const std::filesystem::path &path);
    ~SortedRun();
    SortedRun(const SortedRun &) = delete;
    SortedRun &operator=(const SortedRun &) = delete;

    [[nodiscard]] bool contains(const Hash128 &key) const;
    [[nodiscard]] std::uint64_t size() const { return count_; }
    [[nodiscard]] const std::filesystem::path &path() const { return path_; }

    /// Sequential scan in key order.
    void for_each(const std::function<void(const Hash128 &)> &fn) const;
    void for_each_range(std::uint64_t begin, std::uint64_t end, const std::function<void(const Hash128 &)> &fn) const;

   private:
    SortedRun() = default;
    void build_index();
    Hash128 read_key(std::uint64_t index) const;

    std::filesystem::path path_;
    int fd_ = -1;
    std::uint64_t count_ = 0;
    std::vector<Hash128> sparse_;
};

struct DedupOptions {
    std::size_t shard_count = 16;
    /// Directory for spilled runs; disk spill is off when unset.
    std::optional<std::filesystem::path> spill_path;
    /// Resident key budget across all shards; 0 means unlimited.
    std::size_t memory_limit_keys = 0;
};

/// Exact set of line keys. insert-if-absent is atomic per key and safe
/// to call from many threads.
class DedupStore {
   public:
    explicit DedupStore(DedupOptions options = {});
    ~DedupStore();
    DedupStore(DedupStore &&) noexcept;
    DedupStore &operator=(DedupStore &&) noexcept;

    /// True iff this is the first time `line` was inserted.
    bool insert(std::string_view line) { return insert_key(line_key(line)); }
    bool insert_key(const Hash128 &key);
    [[nodiscard]] bool contains(std::string_view line) const;

    [[nodiscard]] std::uint64_t size() const;
    [[nodiscard]] std::size_t resident_keys() const;
    [[nodiscard]] std::size_t shard_count() const { return shards_.size(); }
    [[nodiscard]] std::size_t shard_of(const Hash128 &key) const { return key.hi % shards_.size(); }

    /// Writes sorted 16-byte-key shard files plus manifest.json.
    void save(const std::filesystem::path &dir) const;
    static DedupStore load(const std::filesystem::path &dir, DedupOptions options = {});

    void reset();

   private:
    struct Shard;
    void spill(Shard &shard, std::size_t index);

    DedupOptions options_;
    std::vector<std::unique_ptr<Shard>> shards_;
};

/// Removes lines already present in `store`, then re-applies the
/// minimum-sentence page rule. Returns nothing if the page is dropped.
std::optional<CleanDocument> dedup_document(CleanDocument doc, DedupStore &store, const CleaningConfig &config,
                                            DropAudit &audit);

/// Single-stream reference semantics: first occurrence in input order wins.
std::vector<CleanDocument> dedup_corpus(std::vector<CleanDocument> docs, DedupStore &store,
                                        const CleaningConfig &config, DropAudit &audit);

/// Two-phase parallel variant: lines are sharded by key to `workers`
/// threads, each deciding first occurrences for its shard exactly.
std::vector<CleanDocument> dedup_corpus_parallel(std::vector<CleanDocument> docs, DedupStore &store,
                                                 const CleaningConfig &config, DropAudit &audit,
                                                 std::size_t workers);

}  // namespace c5
