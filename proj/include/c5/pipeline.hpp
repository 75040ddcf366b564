#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "c5/bpe.hpp"
#include "c5/clean.hpp"
#include "c5/config.hpp"
#include "c5/eval.hpp"
#include "c5/ingest.hpp"
#include "c5/pretrain.hpp"

namespace c5 {

inline constexpr const char *kToolVersion = "1.0.0";

/// Exact end-of-run counters.
struct RunStats {
    std::uint64_t bytes_downloaded = 0;
    std::uint64_t records_parsed = 0;
    std::uint64_t records_skipped = 0;
    std::uint64_t pages_in = 0;
    std::uint64_t pages_kept = 0;
    DropAudit pages_dropped_by_rule;
    std::uint64_t lines_in = 0;
    std::uint64_t lines_kept = 0;
    std::uint64_t lines_in_dropped_pages = 0;
    DropAudit lines_dropped_by_rule;
    std::uint64_t dedup_removed = 0;
    std::uint64_t input_bytes = 0;     // body bytes of cleaned records
    std::uint64_t retained_bytes = 0;  // final lines, one newline each

    /// 1 - retained / input, as a fraction; 0 for empty input.
    [[nodiscard]] double removal_fraction() const;
    [[nodiscard]] std::string to_json() const;
    static RunStats from_json(const std::string &text);

    bool operator==(const RunStats &) const = default;
};

/// Human summary; the removal line reads "removal: 98.0%".
std::string report_stats(const RunStats &stats);

// ---------------------------------------------------------------------------
// JSON-lines artifacts

std::string record_to_json(const WetRecord &record);
WetRecord record_from_json(const std::string &line);
std::string document_to_json(const CleanDocument &doc);
CleanDocument document_from_json(const std::string &line);

/// Calls `fn` for each non-empty line of a file.
void for_each_line(const std::filesystem::path &path, const std::function<void(const std::string &)> &fn);

/// Documents of a cleaned JSON-lines file, with sentence counts filled in.
std::vector<CleanDocument> read_documents(const std::filesystem::path &path,
                                          std::u32string_view terminal_marks = U".?!");

// ---------------------------------------------------------------------------
// Stages. Each reads and writes explicit paths; relative paths inside the
// config must already be resolved (see resolve_config_paths).

struct StageContext {
    Config config;
    std::size_t workers = 1;
    std::ostream *progress = nullptr;  // stage progress lines, or none
};

/// Config keys holding file or directory paths.
const std::vector<std::string> &path_config_keys();

/// Rewrites relative path values against `base`.
void resolve_config_paths(Config &config, const std::filesystem::path &base);

/// Index lookup (or the explicit `ingest.archives` list) and archive
/// parsing into {uri, date, text} JSON lines.
IngestStats stage_ingest(const StageContext &ctx, const std::filesystem::path &output);

struct CleanSummary {
    CleanStats::Snapshot stats;
    std::uint64_t retained_bytes = 0;

    [[nodiscard]] std::string to_json() const;
    static CleanSummary from_json(const std::string &text);
};

/// Inputs may be record JSON-lines files or WET archives. Writes
/// {uri, lines} JSON lines.
CleanSummary stage_clean(const StageContext &ctx, const std::vector<std::filesystem::path> &inputs,
                                 const std::filesystem::path &output);

struct DedupSummary {
    std::uint64_t pages_in = 0;
    std::uint64_t pages_kept = 0;
    std::uint64_t lines_in = 0;
    std::uint64_t lines_kept = 0;
    std::uint64_t lines_in_dropped_pages = 0;
    std::uint64_t retained_bytes = 0;
    DropAudit audit;  // duplicate-line and dedup-min-sentences

    [[nodiscard]] std::string to_json() const;
    static DedupSummary from_json(const std::string &text);
};

/// Global first-occurrence line dedup. The store starts from
/// `dedup.load_store` when set and is saved to `store_dir` when given.
DedupSummary stage_dedup(const StageContext &ctx, const std::filesystem::path &input,
                         const std::filesystem::path &output, const std::optional<std::filesystem::path> &store_dir);

/// Trains on every line of a cleaned corpus and writes the model file.
BpeModel stage_train_tokenizer(const StageContext &ctx, const std::filesystem::path &input,
                               const std::filesystem::path &output);

struct PrepSummary {
    std::uint64_t documents = 0;
    std::uint64_t instances = 0;
    std::uint64_t masked_tokens = 0;
    std::uint32_t crc32 = 0;
};

/// Writes `output` plus `output + ".json"`; `debug_dump` gets one
/// readable instance per line.
PrepSummary stage_prep(const StageContext &ctx, const BpeModel &model, const std::filesystem::path &input,
                       const std::filesystem::path &output,
                       const std::optional<std::filesystem::path> &debug_dump = std::nullopt);

/// Scores `eval.predictions` against `eval.folds` (or a plan built from
/// eval.k / eval.seed / eval.stratified) and writes the report JSON.
MetricReport stage_evaluate(const StageContext &ctx, const std::filesystem::path &output);

// ---------------------------------------------------------------------------
// Run directory

enum class Stage { Ingest, Clean, Dedup, Tokenize, Prep, Eval };

std::string to_string(Stage s);
/// Parses a comma-separated stage list. Unknown names, duplicates,
/// out-of-order or non-contiguous lists are InvalidInput.
std::vector<Stage> parse_stage_list(const std::string &text);

struct RunOptions {
    std::filesystem::path config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    std::vector<Stage> stages;
    std::optional<std::filesystem::path> run_dir;  // overrides run.dir
    std::ostream *progress = nullptr;
    bool force = false;  // rerun stages even when up to date
};

struct RunResult {
    int exit_code = 0;
    RunStats stats;
    std::vector<std::string> skipped_stages;  // already up to date
    std::string error;
};

/// Runs the stages into the run directory, recording per-stage config
/// hashes in manifest.json. A stage whose hash and outputs are unchanged
/// is skipped. Exit code 2 for config or usage errors, 1 for stage
/// failures.
RunResult run_pipeline(const RunOptions &options);

/// RunStats from the stage statistics found in a run directory.
RunStats collect_run_stats(const std::filesystem::path &run_dir);

}  // namespace c5
