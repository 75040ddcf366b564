#include "c5/dedup.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <thread>

#include "c5/error.hpp"

namespace c5 {

namespace {

constexpr std::size_t kKeyBytes = 16;
constexpr std::uint64_t kIndexStride = 128;
constexpr std::size_t kMaxRunsPerShard = 8;

void encode_key(const Hash128 &k, unsigned char *out) {
    for (int i = 0; i < 8; ++i) {
        out[i] = static_cast<unsigned char>(k.hi >> (56 - 8 * i));
        out[8 + i] = static_cast<unsigned char>(k.lo >> (56 - 8 * i));
    }
}

Hash128 decode_key(const unsigned char *in) {
    Hash128 k;
    for (int i = 0; i < 8; ++i) {
        k.hi = (k.hi << 8) | in[i];
        k.lo = (k.lo << 8) | in[8 + i];
    }
    return k;
}

std::size_t slot_of(const Hash128 &k, std::size_t mask) { return static_cast<std::size_t>(k.lo ^ (k.hi >> 17)) & mask; }

}  // namespace

// ---------------------------------------------------------------------------

bool KeySet::insert(const Hash128 &key) {
    if (key == Hash128{}) {
        const bool fresh = !has_zero_;
        has_zero_ = true;
        return fresh;
    }
    if ((size_ + 1) * 2 > slots_.size()) grow();
    const std::size_t mask = slots_.size() - 1;
    for (std::size_t i = slot_of(key, mask);; i = (i + 1) & mask) {
        if (slots_[i] == key) return false;
        if (slots_[i] == Hash128{}) {
            slots_[i] = key;
            ++size_;
            return true;
        }
    }
}

bool KeySet::contains(const Hash128 &key) const {
    if (key == Hash128{}) return has_zero_;
    if (slots_.empty()) return false;
    const std::size_t mask = slots_.size() - 1;
    for (std::size_t i = slot_of(key, mask);; i = (i + 1) & mask) {
        if (slots_[i] == key) return true;
        if (slots_[i] == Hash128{}) return false;
    }
}

void KeySet::grow() {
    std::vector<Hash128> old = std::move(slots_);
    slots_.assign(old.empty() ? 64 : old.size() * 2, Hash128{});
    const std::size_t mask = slots_.size() - 1;
    for (const auto &k : old) {
        if (k == Hash128{}) continue;
        std::size_t i = slot_of(k, mask);
        while (slots_[i] != Hash128{}) i = (i + 1) & mask;
        slots_[i] = k;
    }
}

void KeySet::clear() {
    std::fill(slots_.begin(), slots_.end(), Hash128{});
    size_ = 0;
    has_zero_ = false;
}

std::vector<Hash128> KeySet::sorted_keys() const {
    std::vector<Hash128> keys;
    keys.reserve(size());
    if (has_zero_) keys.push_back(Hash128{});
    for (const auto &k : slots_) {
        if (k != Hash128{}) keys.push_back(k);
    }
    std::sort(keys.begin(), keys.end());
    return keys;
}

// ---------------------------------------------------------------------------

std::unique_ptr<SortedRun> SortedRun::write(const std::filesystem::path &path, const std::vector<Hash128> &sorted) {
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Storage, "cannot create " + path.string());
        std::vector<unsigned char> buf;
        buf.reserve(kKeyBytes * 4096);
        for (const auto &k : sorted) {
            unsigned char enc[kKeyBytes];
            encode_key(k, enc);
            buf.insert(buf.end(), enc, enc + kKeyBytes);
            if (buf.size() >= kKeyBytes * 4096) {
                out.write(reinterpret_cast<const char *>(buf.data()), static_cast<std::streamsize>(buf.size()));
                buf.clear();
            }
        }
        out.write(reinterpret_cast<const char *>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!out) throw Error(ErrorKind::Storage, "write failed: " + path.string());
    }
    return open(path);
}

std::unique_ptr<SortedRun> SortedRun::open(const std::filesystem::path &path) {
    std::unique_ptr<SortedRun> run(new SortedRun());
    run->path_ = path;
    run->fd_ = ::open(path.c_str(), O_RDONLY);
    if (run->fd_ < 0) throw Error(ErrorKind::Storage, "cannot open " + path.string());
    const auto bytes = std::filesystem::file_size(path);
    if (bytes % kKeyBytes != 0) throw Error(ErrorKind::Storage, "truncated key file " + path.string());
    run->count_ = bytes / kKeyBytes;
    run->build_index();
    return run;
}

SortedRun::~SortedRun() {
    if (fd_ >= 0) ::close(fd_);
}

Hash128 SortedRun::read_key(std::uint64_t index) const {
    unsigned char buf[kKeyBytes];
    if (::pread(fd_, buf, kKeyBytes, static_cast<off_t>(index * kKeyBytes)) != static_cast<ssize_t>(kKeyBytes)) {
        throw Error(ErrorKind::Storage, "read failed: " + path_.string());
    }
    return decode_key(buf);
}

void SortedRun::build_index() {
    sparse_.clear();
    std::uint64_t i = 0;
    for_each([&](const Hash128 &k) {
        if (i % kIndexStride == 0) sparse_.push_back(k);
        ++i;
    });
}

bool SortedRun::contains(const Hash128 &key) const {
    if (count_ == 0) return false;
    // last indexed key <= key
    auto it = std::upper_bound(sparse_.begin(), sparse_.end(), key);
    if (it == sparse_.begin()) return false;
    const std::uint64_t block = static_cast<std::uint64_t>(it - sparse_.begin()) - 1;
    if (sparse_[block] == key) return true;
    const std::uint64_t first = block * kIndexStride;
    const std::uint64_t n = std::min<std::uint64_t>(kIndexStride, count_ - first);
    std::vector<unsigned char> buf(n * kKeyBytes);
    if (::pread(fd_, buf.data(), buf.size(), static_cast<off_t>(first * kKeyBytes)) !=
        static_cast<ssize_t>(buf.size())) {
        throw Error(ErrorKind::Storage, "read failed: " + path_.string());
    }
    std::uint64_t lo = 0, hi = n;
    while (lo < hi) {
        const std::uint64_t mid = (lo + hi) / 2;
        const Hash128 k = decode_key(buf.data() + mid * kKeyBytes);
        if (k == key) return true;
        if (k < key) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    return false;
}

void SortedRun::for_each(const std::function<void(const Hash128 &)> &fn) const { for_each_range(0, count_, fn); }

void SortedRun::for_each_range(std::uint64_t begin, std::uint64_t end,
                               const std::function<void(const Hash128 &)> &fn) const {
    constexpr std::size_t kBatch = 4096;
    std::vector<unsigned char> buf(kBatch * kKeyBytes);
    for (std::uint64_t i = begin; i < end; i += kBatch) {
        const std::uint64_t n = std::min<std::uint64_t>(kBatch, end - i);
        const auto bytes = static_cast<std::size_t>(n * kKeyBytes);
        if (::pread(fd_, buf.data(), bytes, static_cast<off_t>(i * kKeyBytes)) != static_cast<ssize_t>(bytes)) {
            throw Error(ErrorKind::Storage, "read failed: " + path_.string());
        }
        for (std::uint64_t j = 0; j < n; ++j) fn(decode_key(buf.data() + j * kKeyBytes));
    }
}

// ---------------------------------------------------------------------------

struct DedupStore::Shard {
    mutable std::mutex mu;
    KeySet mem;
    std::vector<std::unique_ptr<SortedRun>> runs;
    std::uint64_t count = 0;
    std::uint64_t run_seq = 0;
};

namespace {

// Buffered sequential reader over a SortedRun.
class RunCursor {
   public:
    explicit RunCursor(const SortedRun &run) : run_(run) { refill(); }
    [[nodiscard]] bool done() const { return pos_ >= buf_.size() && next_ >= run_.size(); }
    [[nodiscard]] const Hash128 &head() const { return buf_[pos_]; }
    void advance() {
        if (++pos_ >= buf_.size()) refill();
    }

   private:
    void refill() {
        buf_.clear();
        pos_ = 0;
        const std::uint64_t end = std::min<std::uint64_t>(next_ + 4096, run_.size());
        run_.for_each_range(next_, end, [&](const Hash128 &k) { buf_.push_back(k); });
        next_ = end;
    }

    const SortedRun &run_;
    std::vector<Hash128> buf_;
    std::size_t pos_ = 0;
    std::uint64_t next_ = 0;
};

// Streams the sorted union of `runs` and `mem` (sorted) into `out`
// without materializing the runs.
void merge_sorted(const std::vector<const SortedRun *> &runs, const std::vector<Hash128> &mem,
                  const std::function<void(const Hash128 &)> &out) {
    std::vector<RunCursor> cursors;
    cursors.reserve(runs.size());
    for (const auto *r : runs) cursors.emplace_back(*r);
    std::size_t mi = 0;
    std::optional<Hash128> last;
    for (;;) {
        const Hash128 *best = nullptr;
        int best_src = -2;
        if (mi < mem.size()) {
            best = &mem[mi];
            best_src = -1;
        }
        for (std::size_t c = 0; c < cursors.size(); ++c) {
            if (cursors[c].done()) continue;
            if (!best || cursors[c].head() < *best) {
                best = &cursors[c].head();
                best_src = static_cast<int>(c);
            }
        }
        if (!best) break;
        const Hash128 k = *best;
        if (best_src == -1) {
            ++mi;
        } else {
            cursors[static_cast<std::size_t>(best_src)].advance();
        }
        if (!last || *last != k) out(k);
        last = k;
    }
}

// Writes a sorted key stream to `path`.
class RunWriter {
   public:
    explicit RunWriter(const std::filesystem::path &path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw Error(ErrorKind::Storage, "cannot create " + path.string());
    }
    void add(const Hash128 &k) {
        unsigned char enc[kKeyBytes];
        encode_key(k, enc);
        buf_.insert(buf_.end(), enc, enc + kKeyBytes);
        ++count_;
        if (buf_.size() >= kKeyBytes * 4096) flush();
    }
    std::uint64_t finish() {
        flush();
        out_.close();
        if (!out_) throw Error(ErrorKind::Storage, "write failed: " + path_.string());
        return count_;
    }

   private:
    void flush() {
        out_.write(reinterpret_cast<const char *>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
        buf_.clear();
    }
    std::filesystem::path path_;
    std::ofstream out_;
    std::vector<unsigned char> buf_;
    std::uint64_t count_ = 0;
};

}  // namespace

DedupStore::DedupStore(DedupOptions options) : options_(std::move(options)) {
    if (options_.shard_count == 0) throw Error(ErrorKind::InvalidInput, "shard_count must be >= 1");
    if (options_.spill_path) std::filesystem::create_directories(*options_.spill_path);
    for (std::size_t i = 0; i < options_.shard_count; ++i) shards_.push_back(std::make_unique<Shard>());
}

DedupStore::~DedupStore() = default;
DedupStore::DedupStore(DedupStore &&) noexcept = default;
DedupStore &DedupStore::operator=(DedupStore &&) noexcept = default;

bool DedupStore::insert_key(const Hash128 &key) {
    const std::size_t index = shard_of(key);
    Shard &s = *shards_[index];
    std::lock_guard<std::mutex> lock(s.mu);
    for (const auto &r : s.runs) {
        if (r->contains(key)) return false;
    }
    if (!s.mem.insert(key)) return false;
    ++s.count;
    if (options_.spill_path && options_.memory_limit_keys > 0 &&
        s.mem.size() * shards_.size() >= options_.memory_limit_keys) {
        spill(s, index);
    }
    return true;
}

void DedupStore::spill(Shard &s, std::size_t index) {
    const auto dir = *options_.spill_path;
    char name[64];
    std::snprintf(name, sizeof(name), "shard-%04zu-run-%06llu.keys", index,
                  static_cast<unsigned long long>(s.run_seq++));
    s.runs.push_back(SortedRun::write(dir / name, s.mem.sorted_keys()));
    s.mem.clear();
    if (s.runs.size() > kMaxRunsPerShard) {
        // compact every run of this shard into one
        std::vector<const SortedRun *> runs;
        for (const auto &r : s.runs) runs.push_back(r.get());
        std::snprintf(name, sizeof(name), "shard-%04zu-run-%06llu.keys", index,
                      static_cast<unsigned long long>(s.run_seq++));
        RunWriter writer(dir / name);
        merge_sorted(runs, {}, [&](const Hash128 &k) { writer.add(k); });
        writer.finish();
        auto compacted = SortedRun::open(dir / name);
        for (const auto &r : s.runs) std::filesystem::remove(r->path());
        s.runs.clear();
        s.runs.push_back(std::move(compacted));
    }
}

bool DedupStore::contains(std::string_view line) const {
    const Hash128 key = line_key(line);
    const Shard &s = *shards_[shard_of(key)];
    std::lock_guard<std::mutex> lock(s.mu);
    if (s.mem.contains(key)) return true;
    for (const auto &r : s.runs) {
        if (r->contains(key)) return true;
    }
    return false;
}

std::uint64_t DedupStore::size() const {
    std::uint64_t n = 0;
    for (const auto &s : shards_) {
        std::lock_guard<std::mutex> lock(s->mu);
        n += s->count;
    }
    return n;
}

std::size_t DedupStore::resident_keys() const {
    std::size_t n = 0;
    for (const auto &s : shards_) {
        std::lock_guard<std::mutex> lock(s->mu);
        n += s->mem.size();
    }
    return n;
}

void DedupStore::save(const std::filesystem::path &dir) const {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["version"] = 1;
    manifest["shard_count"] = shards_.size();
    manifest["key_count"] = size();
    manifest["shards"] = nlohmann::json::array();
    for (std::size_t i = 0; i < shards_.size(); ++i) {
        const Shard &s = *shards_[i];
        std::lock_guard<std::mutex> lock(s.mu);
        char name[32];
        std::snprintf(name, sizeof(name), "shard-%04zu.keys", i);
        std::vector<const SortedRun *> runs;
        for (const auto &r : s.runs) runs.push_back(r.get());
        RunWriter writer(dir / name);
        merge_sorted(runs, s.mem.sorted_keys(), [&](const Hash128 &k) { writer.add(k); });
        manifest["shards"].push_back({{"file", name}, {"keys", writer.finish()}});
    }
    std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::Storage, "cannot write manifest in " + dir.string());
}

DedupStore DedupStore::load(const std::filesystem::path &dir, DedupOptions options) {
    std::ifstream in(dir / "manifest.json", std::ios::binary);
    if (!in) throw Error(ErrorKind::Storage, "no dedup store manifest in " + dir.string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const std::exception &e) {
        throw Error(ErrorKind::Storage, std::string("bad dedup manifest: ") + e.what());
    }
    if (manifest.value("version", 0) != 1) throw Error(ErrorKind::Storage, "unsupported dedup store version");
    options.shard_count = manifest.at("shard_count").get<std::size_t>();
    DedupStore store(options);
    const auto &shards = manifest.at("shards");
    if (shards.size() != options.shard_count) throw Error(ErrorKind::Storage, "manifest shard list mismatch");
    for (std::size_t i = 0; i < shards.size(); ++i) {
        const auto file = dir / shards[i].at("file").get<std::string>();
        auto run = SortedRun::open(file);
        if (run->size() != shards[i].at("keys").get<std::uint64_t>()) {
            throw Error(ErrorKind::Storage, "key count mismatch in " + file.string());
        }
        Shard &s = *store.shards_[i];
        s.count = run->size();
        if (options.spill_path) {
            char name[64];
            std::snprintf(name, sizeof(name), "shard-%04zu-run-%06llu.keys", i,
                          static_cast<unsigned long long>(s.run_seq++));
            const auto copy = *options.spill_path / name;
            std::filesystem::copy_file(file, copy, std::filesystem::copy_options::overwrite_existing);
            s.runs.push_back(SortedRun::open(copy));
        } else {
            run->for_each([&](const Hash128 &k) { s.mem.insert(k); });
        }
    }
    if (manifest.at("key_count").get<std::uint64_t>() != store.size()) {
        throw Error(ErrorKind::Storage, "manifest key_count mismatch");
    }
    return store;
}

void DedupStore::reset() {
    for (auto &s : shards_) {
        std::lock_guard<std::mutex> lock(s->mu);
        for (const auto &r : s->runs) std::filesystem::remove(r->path());
        s->runs.clear();
        s->mem = KeySet{};
        s->count = 0;
    }
}

// ---------------------------------------------------------------------------

namespace {

std::optional<CleanDocument> finish_document(CleanDocument doc, const std::vector<char> &keep,
                                             const CleaningConfig &config, DropAudit &audit) {
    std::vector<std::string> kept;
    kept.reserve(doc.lines.size());
    std::uint64_t removed = 0;
    for (std::size_t i = 0; i < doc.lines.size(); ++i) {
        if (keep[i]) {
            kept.push_back(std::move(doc.lines[i]));
        } else {
            ++removed;
        }
    }
    if (removed > 0) {
        audit[std::string(rule::kDuplicateLine)] += removed;
        doc.drop_audit[std::string(rule::kDuplicateLine)] += removed;
    }
    doc.lines = std::move(kept);
    doc.sentence_count = sentence_count(doc.lines, config.terminal_marks);
    if (doc.sentence_count < config.min_sentences_per_page) {
        ++audit[std::string(rule::kDedupMinSentences)];
        return std::nullopt;
    }
    return doc;
}

}  // namespace

std::optional<CleanDocument> dedup_document(CleanDocument doc, DedupStore &store, const CleaningConfig &config,
                                            DropAudit &audit) {
    std::vector<char> keep(doc.lines.size());
    for (std::size_t i = 0; i < doc.lines.size(); ++i) keep[i] = store.insert(doc.lines[i]) ? 1 : 0;
    return finish_document(std::move(doc), keep, config, audit);
}

std::vector<CleanDocument> dedup_corpus(std::vector<CleanDocument> docs, DedupStore &store,
                                        const CleaningConfig &config, DropAudit &audit) {
    std::vector<CleanDocument> out;
    for (auto &d : docs) {
        if (auto kept = dedup_document(std::move(d), store, config, audit)) out.push_back(std::move(*kept));
    }
    return out;
}

std::vector<CleanDocument> dedup_corpus_parallel(std::vector<CleanDocument> docs, DedupStore &store,
                                                 const CleaningConfig &config, DropAudit &audit,
                                                 std::size_t workers) {
    workers = std::max<std::size_t>(1, workers);
    // phase 1: key every line and route it to a worker by key
    struct Ref {
        Hash128 key;
        std::uint32_t doc;
        std::uint32_t line;
    };
    std::vector<std::vector<Ref>> routes(workers);
    std::vector<std::vector<char>> keep(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
        keep[d].assign(docs[d].lines.size(), 0);
        for (std::size_t l = 0; l < docs[d].lines.size(); ++l) {
            const Hash128 k = line_key(docs[d].lines[l]);
            routes[k.hi % workers].push_back({k, static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(l)});
        }
    }
    // phase 2: each worker owns a disjoint key range, so decisions are exact
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            for (const Ref &r : routes[w]) keep[r.doc][r.line] = store.insert_key(r.key) ? 1 : 0;
        });
    }
    for (auto &t : threads) t.join();

    std::vector<CleanDocument> out;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        if (auto kept = finish_document(std::move(docs[d]), keep[d], config, audit)) out.push_back(std::move(*kept));
    }
    return out;
}

}  // namespace c5
