#include "c5/pipeline.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <future>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "c5/dedup.hpp"
#include "c5/error.hpp"
#include "c5/hash128.hpp"
#include "c5/langid.hpp"
#include "c5/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace c5 {

namespace {

json audit_json(const DropAudit &audit) {
    json j = json::object();
    for (const auto &[k, v] : audit) j[k] = v;
    return j;
}

DropAudit audit_from(const json &j) {
    DropAudit a;
    for (const auto &[k, v] : j.items()) a[k] = v.get<std::uint64_t>();
    return a;
}

json parse_json(const std::string &text, const char *what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error &e) {
        throw ParseError(e.byte, std::string("invalid JSON in ") + what);
    }
}

std::string read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    out.close();
    if (!out) throw Error(ErrorKind::Storage, "cannot write " + path.string());
}

std::ofstream open_output(const fs::path &path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Storage, "cannot write " + path.string());
    return out;
}

void close_output(std::ofstream &out, const fs::path &path) {
    out.close();
    if (!out) throw Error(ErrorKind::Storage, "write failed: " + path.string());
}

std::uint64_t text_bytes(const std::vector<std::string> &lines) {
    std::uint64_t n = 0;
    for (const auto &l : lines) n += l.size() + 1;
    return n;
}

void note(const StageContext &ctx, const std::string &msg) {
    if (ctx.progress) *ctx.progress << msg << '\n' << std::flush;
}

}  // namespace

// ---------------------------------------------------------------------------

double RunStats::removal_fraction() const {
    if (input_bytes == 0) return 0.0;
    return 1.0 - static_cast<double>(retained_bytes) / static_cast<double>(input_bytes);
}

std::string RunStats::to_json() const {
    json j;
    j["bytes_downloaded"] = bytes_downloaded;
    j["records_parsed"] = records_parsed;
    j["records_skipped"] = records_skipped;
    j["pages_in"] = pages_in;
    j["pages_kept"] = pages_kept;
    j["pages_dropped_by_rule"] = audit_json(pages_dropped_by_rule);
    j["lines_in"] = lines_in;
    j["lines_kept"] = lines_kept;
    j["lines_in_dropped_pages"] = lines_in_dropped_pages;
    j["lines_dropped_by_rule"] = audit_json(lines_dropped_by_rule);
    j["dedup_removed"] = dedup_removed;
    j["input_bytes"] = input_bytes;
    j["retained_bytes"] = retained_bytes;
    j["removal_percentage"] = removal_fraction();
    return j.dump(2) + "\n";
}

RunStats RunStats::from_json(const std::string &text) {
    const json j = parse_json(text, "run stats");
    RunStats s;
    try {
        s.bytes_downloaded = j.at("bytes_downloaded").get<std::uint64_t>();
        s.records_parsed = j.at("records_parsed").get<std::uint64_t>();
        s.records_skipped = j.at("records_skipped").get<std::uint64_t>();
        s.pages_in = j.at("pages_in").get<std::uint64_t>();
        s.pages_kept = j.at("pages_kept").get<std::uint64_t>();
        s.pages_dropped_by_rule = audit_from(j.at("pages_dropped_by_rule"));
        s.lines_in = j.at("lines_in").get<std::uint64_t>();
        s.lines_kept = j.at("lines_kept").get<std::uint64_t>();
        s.lines_in_dropped_pages = j.at("lines_in_dropped_pages").get<std::uint64_t>();
        s.lines_dropped_by_rule = audit_from(j.at("lines_dropped_by_rule"));
        s.dedup_removed = j.at("dedup_removed").get<std::uint64_t>();
        s.input_bytes = j.at("input_bytes").get<std::uint64_t>();
        s.retained_bytes = j.at("retained_bytes").get<std::uint64_t>();
    } catch (const json::exception &e) {
        throw Error(ErrorKind::Corrupt, std::string("malformed run stats: ") + e.what());
    }
    return s;
}

std::string report_stats(const RunStats &s) {
    std::ostringstream out;
    out << "records parsed: " << s.records_parsed << " (non-conversion skipped: " << s.records_skipped << ")\n";
    out << "bytes downloaded: " << s.bytes_downloaded << "\n";
    out << "pages: " << s.pages_in << " in, " << s.pages_kept << " kept\n";
    for (const auto &[rule, n] : s.pages_dropped_by_rule) out << "  dropped by " << rule << ": " << n << "\n";
    out << "lines: " << s.lines_in << " in, " << s.lines_kept << " kept, " << s.lines_in_dropped_pages
        << " lost with dropped pages\n";
    for (const auto &[rule, n] : s.lines_dropped_by_rule) out << "  dropped by " << rule << ": " << n << "\n";
    out << "duplicate lines removed: " << s.dedup_removed << "\n";
    out << "text bytes: " << s.input_bytes << " in, " << s.retained_bytes << " retained\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "removal: %.1f%%", s.removal_fraction() * 100.0);
    out << buf;
    if (s.input_bytes == 0) out << " (empty input: no text bytes were read)";
    out << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------

std::string record_to_json(const WetRecord &r) {
    json j;
    j["uri"] = r.target_uri;
    j["date"] = r.warc_date;
    j["text"] = r.body;
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

WetRecord record_from_json(const std::string &line) {
    const json j = parse_json(line, "record line");
    WetRecord r;
    try {
        r.target_uri = j.at("uri").get<std::string>();
        r.warc_date = j.value("date", std::string());
        r.body = j.at("text").get<std::string>();
    } catch (const json::exception &e) {
        throw Error(ErrorKind::Corrupt, std::string("malformed record line: ") + e.what());
    }
    r.byte_length = r.body.size();
    return r;
}

std::string document_to_json(const CleanDocument &doc) {
    json j;
    j["uri"] = doc.uri;
    j["lines"] = doc.lines;
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

CleanDocument document_from_json(const std::string &line) {
    const json j = parse_json(line, "document line");
    CleanDocument d;
    try {
        d.uri = j.at("uri").get<std::string>();
        d.lines = j.at("lines").get<std::vector<std::string>>();
    } catch (const json::exception &e) {
        throw Error(ErrorKind::Corrupt, std::string("malformed document line: ") + e.what());
    }
    return d;
}

void for_each_line(const fs::path &path, const std::function<void(const std::string &)> &fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) fn(line);
    }
}

std::vector<CleanDocument> read_documents(const fs::path &path, std::u32string_view terminal_marks) {
    std::vector<CleanDocument> docs;
    for_each_line(path, [&](const std::string &line) {
        docs.push_back(document_from_json(line));
        docs.back().sentence_count = sentence_count(docs.back().lines, terminal_marks);
    });
    return docs;
}

// ---------------------------------------------------------------------------

const std::vector<std::string> &path_config_keys() {
    static const std::vector<std::string> keys = {
        "run.dir",          "ingest.index_dir",   "ingest.archive_dir", "ingest.cache_dir",
        "clean.language_model", "clean.offensive_wordlist", "dedup.load_store", "dedup.spill_dir",
        "eval.predictions", "eval.folds"};
    return keys;
}

void resolve_config_paths(Config &config, const fs::path &base) {
    auto resolve = [&](const std::string &v) {
        if (v.empty() || v.find("://") != std::string::npos) return v;
        fs::path p(v);
        return p.is_absolute() ? v : (base / p).lexically_normal().string();
    };
    for (const auto &key : path_config_keys()) {
        if (auto v = config.get(key)) config.set(key, resolve(*v));
    }
    if (auto v = config.get("ingest.archives")) {
        std::string joined;
        for (const auto &item : split_list(*v)) {
            if (!joined.empty()) joined += ", ";
            joined += "\"" + resolve(item) + "\"";
        }
        config.set("ingest.archives", joined);
    }
}

namespace {

FetchOptions fetch_options(const Config &cfg) {
    FetchOptions o;
    o.attempts = static_cast<int>(cfg.get_int("ingest.retry_attempts", o.attempts));
    o.backoff = std::chrono::milliseconds(cfg.get_int("ingest.retry_backoff_ms", o.backoff.count()));
    o.timeout = std::chrono::seconds(cfg.get_int("ingest.timeout_s", o.timeout.count()));
    if (o.attempts < 1) throw Error(ErrorKind::InvalidInput, "ingest.retry_attempts must be >= 1");
    return o;
}

}  // namespace

IngestStats stage_ingest(const StageContext &ctx, const fs::path &output) {
    const Config &cfg = ctx.config;
    std::ofstream out = open_output(output);
    auto sink = [&](WetRecord &&r) { out << record_to_json(r) << '\n'; };

    IngestStats stats;
    const auto archives = cfg.get_list("ingest.archives", {});
    if (!archives.empty()) {
        std::vector<fs::path> paths(archives.begin(), archives.end());
        stats = ingest_archives(paths, sink);
    } else {
        const auto crawls = cfg.get_list("ingest.crawls", {});
        if (crawls.empty()) throw Error(ErrorKind::InvalidInput, "ingest needs ingest.crawls or ingest.archives");
        const std::string language = cfg.get_string("ingest.language", "ces");
        std::optional<std::uint64_t> limit;
        if (cfg.has("ingest.limit")) limit = static_cast<std::uint64_t>(cfg.get_int("ingest.limit", 0));
        const FetchOptions options = fetch_options(cfg);
        const std::string kind = cfg.get_string("ingest.index", "local");

        std::unique_ptr<IndexBackend> backend;
        fs::path base_dir;
        if (kind == "local") {
            const fs::path dir = cfg.require_string("ingest.index_dir");
            backend = std::make_unique<LocalIndex>(dir);
            base_dir = cfg.get_string("ingest.archive_dir", dir.string());
        } else if (kind == "http") {
            backend = std::make_unique<HttpIndex>(
                cfg.get_string("ingest.index_url", "https://index.commoncrawl.org"),
                cfg.get_string("ingest.url_pattern", "*.cz"),
                cfg.get_string("ingest.data_url", "https://data.commoncrawl.org"), options);
            base_dir = cfg.get_string("ingest.archive_dir", ".");
        } else {
            throw Error(ErrorKind::InvalidInput, "ingest.index must be local or http");
        }
        const fs::path cache = cache_dir_from_env(cfg.get_string("ingest.cache_dir", ".c5-cache"));
        for (const auto &crawl : crawls) {
            const auto pointers = query_index(*backend, crawl, language, limit);
            note(ctx, "[ingest] " + crawl + ": " + std::to_string(pointers.size()) + " pointers");
            const IngestStats s = ingest_pointers(pointers, base_dir, cache, options, sink);
            stats.bytes_downloaded += s.bytes_downloaded;
            stats.records_parsed += s.records_parsed;
            stats.records_selected += s.records_selected;
            stats.records_skipped += s.records_skipped;
        }
    }
    close_output(out, output);
    note(ctx, "[ingest] " + std::to_string(stats.records_selected) + " records");
    return stats;
}

// ---------------------------------------------------------------------------

std::string CleanSummary::to_json() const {
    json j;
    j["pages_in"] = stats.pages_in;
    j["pages_kept"] = stats.pages_kept;
    j["lines_in"] = stats.lines_in;
    j["lines_kept"] = stats.lines_kept;
    j["lines_in_dropped_pages"] = stats.lines_in_dropped_pages;
    j["input_bytes"] = stats.input_bytes;
    j["retained_bytes"] = retained_bytes;
    j["pages_dropped"] = audit_json(stats.pages_dropped);
    j["lines_dropped"] = audit_json(stats.lines_dropped);
    return j.dump(2) + "\n";
}

CleanSummary CleanSummary::from_json(const std::string &text) {
    const json j = parse_json(text, "clean stats");
    CleanSummary c;
    try {
        c.stats.pages_in = j.at("pages_in").get<std::uint64_t>();
        c.stats.pages_kept = j.at("pages_kept").get<std::uint64_t>();
        c.stats.lines_in = j.at("lines_in").get<std::uint64_t>();
        c.stats.lines_kept = j.at("lines_kept").get<std::uint64_t>();
        c.stats.lines_in_dropped_pages = j.at("lines_in_dropped_pages").get<std::uint64_t>();
        c.stats.input_bytes = j.at("input_bytes").get<std::uint64_t>();
        c.retained_bytes = j.at("retained_bytes").get<std::uint64_t>();
        c.stats.pages_dropped = audit_from(j.at("pages_dropped"));
        c.stats.lines_dropped = audit_from(j.at("lines_dropped"));
    } catch (const json::exception &e) {
        throw Error(ErrorKind::Corrupt, std::string("malformed clean stats: ") + e.what());
    }
    return c;
}

CleanSummary stage_clean(const StageContext &ctx, const std::vector<fs::path> &inputs, const fs::path &output) {
    const CleaningConfig config = CleaningConfig::from_config(ctx.config);
    const LanguageModel lang = LanguageModel::load(ctx.config.require_string("clean.language_model"));
    const std::size_t workers = std::max<std::size_t>(1, ctx.workers);
    constexpr std::size_t kBatch = 256;

    std::ofstream out = open_output(output);
    CleanStats stats;
    CleanSummary summary;
    std::vector<WetRecord> batch;
    std::uint64_t next_report = 10000;

    auto flush = [&] {
        std::vector<PageOutcome> outcomes(batch.size());
        if (workers == 1 || batch.size() < 2) {
            for (std::size_t i = 0; i < batch.size(); ++i) outcomes[i] = clean_page(batch[i], config, lang);
        } else {
            std::vector<std::future<void>> jobs;
            for (std::size_t w = 0; w < workers; ++w) {
                jobs.push_back(std::async(std::launch::async, [&, w] {
                    for (std::size_t i = w; i < batch.size(); i += workers) outcomes[i] = clean_page(batch[i], config, lang);
                }));
            }
            for (auto &j : jobs) j.get();
        }
        for (const auto &o : outcomes) {
            stats.add(o);
            if (o.document) {
                out << document_to_json(*o.document) << '\n';
                summary.retained_bytes += text_bytes(o.document->lines);
            }
        }
        batch.clear();
        const auto pages = stats.snapshot().pages_in;
        if (pages >= next_report) {
            note(ctx, "[clean] " + std::to_string(pages) + " pages");
            next_report += 10000;
        }
    };
    auto add = [&](WetRecord &&r) {
        batch.push_back(std::move(r));
        if (batch.size() == kBatch) flush();
    };

    for (const auto &input : inputs) {
        if (input.extension() == ".jsonl") {
            for_each_line(input, [&](const std::string &line) { add(record_from_json(line)); });
        } else {
            ingest_archives({input}, add);
        }
    }
    flush();
    close_output(out, output);
    summary.stats = stats.snapshot();
    note(ctx, "[clean] " + std::to_string(summary.stats.pages_kept) + " of " + std::to_string(summary.stats.pages_in) +
                  " pages kept");
    return summary;
}

// ---------------------------------------------------------------------------

std::string DedupSummary::to_json() const {
    json j;
    j["pages_in"] = pages_in;
    j["pages_kept"] = pages_kept;
    j["lines_in"] = lines_in;
    j["lines_kept"] = lines_kept;
    j["lines_in_dropped_pages"] = lines_in_dropped_pages;
    j["retained_bytes"] = retained_bytes;
    j["dropped"] = audit_json(audit);
    return j.dump(2) + "\n";
}

DedupSummary DedupSummary::from_json(const std::string &text) {
    const json j = parse_json(text, "dedup stats");
    DedupSummary d;
    try {
        d.pages_in = j.at("pages_in").get<std::uint64_t>();
        d.pages_kept = j.at("pages_kept").get<std::uint64_t>();
        d.lines_in = j.at("lines_in").get<std::uint64_t>();
        d.lines_kept = j.at("lines_kept").get<std::uint64_t>();
        d.lines_in_dropped_pages = j.at("lines_in_dropped_pages").get<std::uint64_t>();
        d.retained_bytes = j.at("retained_bytes").get<std::uint64_t>();
        d.audit = audit_from(j.at("dropped"));
    } catch (const json::exception &e) {
        throw Error(ErrorKind::Corrupt, std::string("malformed dedup stats: ") + e.what());
    }
    return d;
}

DedupSummary stage_dedup(const StageContext &ctx, const fs::path &input, const fs::path &output,
                         const std::optional<fs::path> &store_dir) {
    const Config &cfg = ctx.config;
    const CleaningConfig config = CleaningConfig::from_config(cfg);
    DedupOptions options;
    options.shard_count = static_cast<std::size_t>(cfg.get_int("dedup.shard_count", 16));
    options.memory_limit_keys = static_cast<std::size_t>(cfg.get_int("dedup.memory_limit_keys", 0));
    if (auto spill = cfg.get("dedup.spill_dir"); spill && !spill->empty()) options.spill_path = fs::path(*spill);
    if (options.shard_count == 0) throw Error(ErrorKind::InvalidInput, "dedup.shard_count must be >= 1");

    DedupStore store = [&] {
        if (auto from = cfg.get("dedup.load_store"); from && !from->empty()) return DedupStore::load(*from, options);
        return DedupStore(options);
    }();
    const std::size_t workers = std::max<std::size_t>(1, ctx.workers);
    constexpr std::size_t kBatch = 4096;

    std::ofstream out = open_output(output);
    DedupSummary summary;
    std::vector<CleanDocument> batch;
    auto flush = [&] {
        std::vector<CleanDocument> kept;
        if (workers == 1) {
            for (auto &d : batch) {
                if (auto k = dedup_document(std::move(d), store, config, summary.audit)) kept.push_back(std::move(*k));
            }
        } else {
            kept = dedup_corpus_parallel(std::move(batch), store, config, summary.audit, workers);
        }
        for (const auto &d : kept) {
            ++summary.pages_kept;
            summary.lines_kept += d.lines.size();
            summary.retained_bytes += text_bytes(d.lines);
            out << document_to_json(d) << '\n';
        }
        batch.clear();
    };
    for_each_line(input, [&](const std::string &line) {
        batch.push_back(document_from_json(line));
        ++summary.pages_in;
        summary.lines_in += batch.back().lines.size();
        if (batch.size() == kBatch) flush();
    });
    flush();
    close_output(out, output);

    const std::uint64_t duplicates =
        summary.audit.count(std::string(rule::kDuplicateLine)) ? summary.audit.at(std::string(rule::kDuplicateLine)) : 0;
    summary.lines_in_dropped_pages = summary.lines_in - summary.lines_kept - duplicates;
    if (store_dir) {
        fs::remove_all(*store_dir);
        store.save(*store_dir);
    }
    note(ctx, "[dedup] " + std::to_string(duplicates) + " duplicate lines, " + std::to_string(summary.pages_kept) +
                  " pages kept");
    return summary;
}

// ---------------------------------------------------------------------------

namespace {

BpeTrainOptions tokenizer_options(const Config &cfg) {
    BpeTrainOptions o;
    o.mode = parse_bpe_mode(cfg.get_string("tokenizer.mode", "char-level"));
    const auto vocab = cfg.get_int("tokenizer.vocab_size", 0);
    if (vocab <= 0) throw Error(ErrorKind::InvalidInput, "tokenizer.vocab_size must be set and positive");
    o.vocab_size = static_cast<std::size_t>(vocab);
    if (o.mode == BpeMode::CharLevel) {
        if (!cfg.has("tokenizer.character_coverage")) {
            throw Error(ErrorKind::InvalidInput, "char-level tokenizer needs tokenizer.character_coverage");
        }
        o.coverage = cfg.get_double("tokenizer.character_coverage", 1.0);
    }
    return o;
}

}  // namespace

BpeModel stage_train_tokenizer(const StageContext &ctx, const fs::path &input, const fs::path &output) {
    BpeTrainer trainer(tokenizer_options(ctx.config));
    for_each_line(input, [&](const std::string &line) {
        for (const auto &l : document_from_json(line).lines) trainer.add_text(l);
    });
    BpeModel model = trainer.train();
    if (output.has_parent_path()) fs::create_directories(output.parent_path());
    model.save(output);
    note(ctx, "[tokenize] " + std::to_string(model.size()) + " tokens, " + std::to_string(model.merges().size()) +
                  " merges");
    return model;
}

PrepSummary stage_prep(const StageContext &ctx, const BpeModel &model, const fs::path &input, const fs::path &output,
                       const std::optional<fs::path> &debug_dump) {
    const PretrainConfig config = PretrainConfig::from_config(ctx.config);
    const auto docs = read_documents(input);
    const auto corpus = tokenize_documents(docs, model);

    if (output.has_parent_path()) fs::create_directories(output.parent_path());
    InstanceWriter writer(output, config.seq_len);
    std::optional<std::ofstream> dump;
    if (debug_dump) dump.emplace(open_output(*debug_dump));
    generate_instances(
        corpus, model, config,
        [&](PretrainInstance &&inst) {
            writer.add(inst);
            if (dump) *dump << debug_string(inst, model) << '\n';
        },
        ctx.workers);
    PrepSummary summary;
    summary.crc32 = writer.finish();
    summary.documents = docs.size();
    summary.instances = writer.count();
    summary.masked_tokens = writer.masked_tokens();
    if (dump) close_output(*dump, *debug_dump);

    json side;
    side["format"] = "c5-pretrain v1";
    side["config"] = {{"seq_len", config.seq_len},
                      {"dup_factor", config.dup_factor},
                      {"mask_prob", config.mask_prob},
                      {"max_predictions", config.effective_max_predictions()},
                      {"short_seq_prob", config.short_seq_prob},
                      {"nsp", config.nsp_enabled},
                      {"cross_documents", config.cross_documents},
                      {"seed", config.rng_seed}};
    side["tokenizer"] = {{"mode", to_string(model.mode())}, {"size", model.size()}};
    side["documents"] = summary.documents;
    side["instances"] = summary.instances;
    side["masked_tokens"] = summary.masked_tokens;
    char crc[16];
    std::snprintf(crc, sizeof crc, "%08" PRIx32, summary.crc32);
    side["crc32"] = crc;
    write_file(fs::path(output.string() + ".json"), side.dump(2) + "\n");
    note(ctx, "[prep] " + std::to_string(summary.instances) + " instances from " + std::to_string(summary.documents) +
                  " documents");
    return summary;
}

MetricReport stage_evaluate(const StageContext &ctx, const fs::path &output) {
    const Config &cfg = ctx.config;
    const auto rows = read_predictions(fs::path(cfg.require_string("eval.predictions")));
    const TaskKind task = parse_task_kind(cfg.get_string("eval.task", "multi-label"));
    const Averaging averaging = parse_averaging(cfg.get_string("eval.averaging", "macro"));

    std::optional<FoldPlan> plan;
    if (auto folds = cfg.get("eval.folds"); folds && !folds->empty()) {
        plan = FoldPlan::load(*folds);
    } else if (const auto k = cfg.get_int("eval.k", 10); k > 0) {
        std::vector<std::string> ids;
        std::vector<std::uint32_t> classes;
        for (const auto &r : rows) {
            ids.push_back(r.sample_id);
            classes.push_back(r.gold.empty() ? static_cast<std::uint32_t>(r.scores.size()) : r.gold.front());
        }
        const auto seed = static_cast<std::uint64_t>(cfg.get_int("eval.seed", 0));
        plan = cfg.get_bool("eval.stratified", true) ? stratified_kfold(ids, classes, static_cast<int>(k), seed)
                                                     : random_kfold(ids, static_cast<int>(k), seed);
    }
    MetricReport report = evaluate_predictions(rows, task, averaging, plan);
    if (output.has_parent_path()) fs::create_directories(output.parent_path());
    write_file(output, report.to_json());
    note(ctx, "[eval] " + report.metric + " " + report.formatted());
    return report;
}

// ---------------------------------------------------------------------------

std::string to_string(Stage s) {
    switch (s) {
        case Stage::Ingest: return "ingest";
        case Stage::Clean: return "clean";
        case Stage::Dedup: return "dedup";
        case Stage::Tokenize: return "tokenize";
        case Stage::Prep: return "prep";
        case Stage::Eval: return "eval";
    }
    return "?";
}

std::vector<Stage> parse_stage_list(const std::string &text) {
    static const std::vector<Stage> all = {Stage::Ingest, Stage::Clean, Stage::Dedup,
                                           Stage::Tokenize, Stage::Prep,  Stage::Eval};
    std::vector<Stage> out;
    for (const auto &name : split_list(text)) {
        auto it = std::find_if(all.begin(), all.end(), [&](Stage s) { return to_string(s) == name; });
        if (it == all.end()) throw Error(ErrorKind::InvalidInput, "unknown stage: " + name);
        if (!out.empty() && static_cast<int>(*it) != static_cast<int>(out.back()) + 1) {
            throw Error(ErrorKind::InvalidInput, "stages must be listed in pipeline order without gaps");
        }
        out.push_back(*it);
    }
    if (out.empty()) throw Error(ErrorKind::InvalidInput, "empty stage list");
    return out;
}

namespace {

Hash128 digest_path(const fs::path &p) {
    Hash128 h{0, 0};
    auto mix = [&](std::string_view bytes) { h = murmur3_128(bytes, h.hi ^ Rng::mix(h.lo)); };
    if (fs::is_directory(p)) {
        std::vector<std::pair<std::string, std::uintmax_t>> entries;
        for (const auto &e : fs::recursive_directory_iterator(p)) {
            if (e.is_regular_file()) entries.emplace_back(fs::relative(e.path(), p).generic_string(), e.file_size());
        }
        std::sort(entries.begin(), entries.end());
        for (const auto &[name, size] : entries) mix(name + "\t" + std::to_string(size));
        return h;
    }
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        mix("missing:" + p.generic_string());
        return h;
    }
    std::string chunk(1 << 20, '\0');
    while (in) {
        in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
        mix(std::string_view(chunk.data(), static_cast<std::size_t>(in.gcount())));
    }
    return h;
}

struct StagePlan {
    Stage stage;
    std::vector<std::string> prefixes;
    std::vector<fs::path> inputs;
    std::vector<std::string> outputs;  // relative to the run dir
};

std::string stage_hash(const StagePlan &plan, const Config &raw, const Config &resolved) {
    std::string material = to_string(plan.stage) + "\n" + kToolVersion + "\n";
    for (const auto &prefix : plan.prefixes) material += raw.canonical(prefix);
    for (const auto &key : path_config_keys()) {
        const bool relevant = std::any_of(plan.prefixes.begin(), plan.prefixes.end(),
                                          [&](const std::string &p) { return key.rfind(p, 0) == 0; });
        if (!relevant) continue;
        if (auto v = resolved.get(key); v && !v->empty() && fs::exists(*v)) {
            material += key + "#" + digest_path(*v).hex() + "\n";
        }
    }
    if (plan.stage == Stage::Ingest) {
        for (const auto &a : resolved.get_list("ingest.archives", {})) material += "archive#" + digest_path(a).hex() + "\n";
    }
    for (const auto &in : plan.inputs) material += "input#" + digest_path(in).hex() + "\n";
    return murmur3_128(material).hex();
}

}  // namespace

RunStats collect_run_stats(const fs::path &run_dir) {
    RunStats s;
    if (fs::exists(run_dir / "ingest_stats.json")) {
        const json j = parse_json(read_file(run_dir / "ingest_stats.json"), "ingest stats");
        s.bytes_downloaded = j.value("bytes_downloaded", std::uint64_t{0});
        s.records_parsed = j.value("records_parsed", std::uint64_t{0});
        s.records_skipped = j.value("records_skipped", std::uint64_t{0});
    }
    if (fs::exists(run_dir / "clean_stats.json")) {
        const CleanSummary c = CleanSummary::from_json(read_file(run_dir / "clean_stats.json"));
        s.pages_in = c.stats.pages_in;
        s.pages_kept = c.stats.pages_kept;
        s.pages_dropped_by_rule = c.stats.pages_dropped;
        s.lines_in = c.stats.lines_in;
        s.lines_kept = c.stats.lines_kept;
        s.lines_in_dropped_pages = c.stats.lines_in_dropped_pages;
        s.lines_dropped_by_rule = c.stats.lines_dropped;
        s.input_bytes = c.stats.input_bytes;
        s.retained_bytes = c.retained_bytes;
    }
    if (fs::exists(run_dir / "dedup_stats.json")) {
        const DedupSummary d = DedupSummary::from_json(read_file(run_dir / "dedup_stats.json"));
        s.pages_kept = d.pages_kept;
        s.lines_kept = d.lines_kept;
        s.lines_in_dropped_pages += d.lines_in_dropped_pages;
        s.retained_bytes = d.retained_bytes;
        for (const auto &[rule, n] : d.audit) {
            if (is_page_rule(rule)) {
                s.pages_dropped_by_rule[rule] += n;
            } else {
                s.lines_dropped_by_rule[rule] += n;
            }
        }
        if (auto it = d.audit.find(std::string(rule::kDuplicateLine)); it != d.audit.end()) s.dedup_removed = it->second;
    }
    return s;
}

RunResult run_pipeline(const RunOptions &options) {
    RunResult result;
    Config raw;
    Config cfg;
    std::vector<Stage> stages = options.stages;
    fs::path run_dir;
    StageContext ctx;

    // configuration problems: exit 2
    try {
        raw = Config::load(options.config_path);
        for (const auto &[k, v] : options.overrides) raw.set(k, v);
        cfg = raw;
        resolve_config_paths(cfg, fs::absolute(options.config_path).parent_path());
        if (stages.empty()) stages = parse_stage_list(cfg.get_string("run.stages", "ingest,clean,dedup,tokenize,prep,eval"));
        run_dir = options.run_dir ? *options.run_dir : fs::path(cfg.get_string("run.dir", "run"));
        ctx.config = cfg;
        ctx.workers = static_cast<std::size_t>(std::max<std::int64_t>(1, cfg.get_int("run.workers", 1)));
        ctx.progress = options.progress;
        for (Stage s : stages) {
            switch (s) {
                case Stage::Ingest:
                    fetch_options(cfg);
                    break;
                case Stage::Clean:
                case Stage::Dedup:
                    (void)CleaningConfig::from_config(cfg);
                    if (s == Stage::Clean) (void)cfg.require_string("clean.language_model");
                    break;
                case Stage::Tokenize:
                    (void)tokenizer_options(cfg);
                    break;
                case Stage::Prep:
                    (void)PretrainConfig::from_config(cfg);
                    break;
                case Stage::Eval:
                    (void)cfg.require_string("eval.predictions");
                    (void)parse_task_kind(cfg.get_string("eval.task", "multi-label"));
                    (void)parse_averaging(cfg.get_string("eval.averaging", "macro"));
                    break;
            }
        }
    } catch (const std::exception &e) {
        result.exit_code = 2;
        result.error = e.what();
        return result;
    }

    try {
        fs::create_directories(run_dir);
        const fs::path manifest_path = run_dir / "manifest.json";
        json manifest;
        if (fs::exists(manifest_path)) manifest = parse_json(read_file(manifest_path), "run manifest");
        if (!manifest.is_object() || manifest.value("format", "") != "c5-run v1") manifest = json::object();
        manifest["format"] = "c5-run v1";
        manifest["tool_version"] = kToolVersion;
        manifest["seeds"] = {{"clean.detect_seed", cfg.get_int("clean.detect_seed", 0)},
                             {"prep.seed", cfg.get_int("prep.seed", 12345)},
                             {"eval.seed", cfg.get_int("eval.seed", 0)}};
        if (!manifest.contains("stages")) manifest["stages"] = json::object();

        auto corpus = [&] {
            const bool dedup_selected = std::find(stages.begin(), stages.end(), Stage::Dedup) != stages.end();
            return dedup_selected || fs::exists(run_dir / "dedup.jsonl") ? run_dir / "dedup.jsonl"
                                                                          : run_dir / "cleaned.jsonl";
        };

        for (Stage s : stages) {
            StagePlan plan{s, {}, {}, {}};
            switch (s) {
                case Stage::Ingest:
                    plan.prefixes = {"ingest."};
                    plan.outputs = {"records.jsonl", "ingest_stats.json"};
                    break;
                case Stage::Clean:
                    plan.prefixes = {"clean."};
                    plan.inputs = {run_dir / "records.jsonl"};
                    plan.outputs = {"cleaned.jsonl", "clean_stats.json"};
                    break;
                case Stage::Dedup:
                    plan.prefixes = {"clean.", "dedup."};
                    plan.inputs = {run_dir / "cleaned.jsonl"};
                    plan.outputs = {"dedup.jsonl", "dedup_stats.json", "dedup-store"};
                    break;
                case Stage::Tokenize:
                    plan.prefixes = {"tokenizer."};
                    plan.inputs = {corpus()};
                    plan.outputs = {"tokenizer.model"};
                    break;
                case Stage::Prep:
                    plan.prefixes = {"prep."};
                    plan.inputs = {corpus(), run_dir / "tokenizer.model"};
                    plan.outputs = {"instances.bin", "instances.bin.json"};
                    break;
                case Stage::Eval:
                    plan.prefixes = {"eval."};
                    plan.outputs = {"report.json"};
                    break;
            }
            for (const auto &in : plan.inputs) {
                if (!fs::exists(in)) {
                    throw Error(ErrorKind::NotFound, to_string(s) + " needs " + in.filename().string() +
                                                         "; run the earlier stage first");
                }
            }
            const std::string hash = stage_hash(plan, raw, cfg);
            const std::string name = to_string(s);
            const bool outputs_present = std::all_of(plan.outputs.begin(), plan.outputs.end(),
                                                     [&](const std::string &o) { return fs::exists(run_dir / o); });
            if (!options.force && outputs_present && manifest["stages"].contains(name) &&
                manifest["stages"][name].value("config_hash", "") == hash) {
                result.skipped_stages.push_back(name);
                note(ctx, "[" + name + "] up to date");
                continue;
            }
            // an interrupted stage must not look complete on the next run
            manifest["stages"][name] = {{"config_hash", ""}, {"outputs", plan.outputs}};
            write_file(manifest_path, manifest.dump(2) + "\n");

            switch (s) {
                case Stage::Ingest: {
                    const IngestStats st = stage_ingest(ctx, run_dir / "records.jsonl");
                    json j;
                    j["bytes_downloaded"] = st.bytes_downloaded;
                    j["records_parsed"] = st.records_parsed;
                    j["records_selected"] = st.records_selected;
                    j["records_skipped"] = st.records_skipped;
                    write_file(run_dir / "ingest_stats.json", j.dump(2) + "\n");
                    break;
                }
                case Stage::Clean:
                    write_file(run_dir / "clean_stats.json",
                               stage_clean(ctx, {run_dir / "records.jsonl"}, run_dir / "cleaned.jsonl").to_json());
                    break;
                case Stage::Dedup:
                    write_file(run_dir / "dedup_stats.json",
                               stage_dedup(ctx, run_dir / "cleaned.jsonl", run_dir / "dedup.jsonl", run_dir / "dedup-store")
                                   .to_json());
                    break;
                case Stage::Tokenize:
                    stage_train_tokenizer(ctx, corpus(), run_dir / "tokenizer.model");
                    break;
                case Stage::Prep:
                    stage_prep(ctx, BpeModel::load(run_dir / "tokenizer.model"), corpus(), run_dir / "instances.bin");
                    break;
                case Stage::Eval:
                    stage_evaluate(ctx, run_dir / "report.json");
                    break;
            }
            manifest["stages"][name] = {{"config_hash", hash}, {"outputs", plan.outputs}};
            write_file(manifest_path, manifest.dump(2) + "\n");
        }
        write_file(manifest_path, manifest.dump(2) + "\n");
        result.stats = collect_run_stats(run_dir);
        write_file(run_dir / "stats.json", result.stats.to_json());
        write_file(run_dir / "stats.txt", report_stats(result.stats));
    } catch (const std::exception &e) {
        result.exit_code = 1;
        result.error = e.what();
    }
    return result;
}

}  // namespace c5
