#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "c5/bpe.hpp"
#include "c5/config.hpp"
#include "c5/error.hpp"
#include "c5/eval.hpp"
#include "c5/langid.hpp"
#include "c5/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    int workers = 0;
    bool quiet = false;
};

void add_common(CLI::App *cmd, Common &c, bool with_config = true) {
    if (with_config) {
        cmd->add_option("-c,--config", c.config_path, "Config file")->check(CLI::ExistingFile);
        cmd->add_option("--set", c.overrides, "Override a config key (key=value)");
        cmd->add_option("-w,--workers", c.workers, "Worker threads (run.workers)");
    }
    cmd->add_flag("-q,--quiet", c.quiet, "No progress output");
}

/// Config file (paths relative to its directory) plus command-line
/// overrides (paths relative to the working directory).
c5::Config load_config(const Common &c, const std::map<std::string, std::string> &flags = {}) {
    c5::Config cfg;
    if (!c.config_path.empty()) {
        cfg = c5::Config::load(c.config_path);
        c5::resolve_config_paths(cfg, fs::absolute(c.config_path).parent_path());
    }
    c5::Config extra;
    for (const auto &o : c.overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw c5::Error(c5::ErrorKind::InvalidInput, "--set expects key=value: " + o);
        extra.set(o.substr(0, eq), o.substr(eq + 1));
    }
    for (const auto &[k, v] : flags) extra.set(k, v);
    c5::resolve_config_paths(extra, fs::current_path());
    for (const auto &[k, v] : extra.values()) cfg.set(k, v);
    return cfg;
}

c5::StageContext context(const Common &c, c5::Config cfg) {
    c5::StageContext ctx;
    ctx.workers = c.workers > 0 ? static_cast<std::size_t>(c.workers)
                                : static_cast<std::size_t>(std::max<std::int64_t>(1, cfg.get_int("run.workers", 1)));
    ctx.config = std::move(cfg);
    ctx.progress = c.quiet ? nullptr : &std::cerr;
    return ctx;
}

/// Errors raised by `setup` are usage errors, errors raised by `work`
/// are runtime failures.
int guarded(const std::function<void()> &setup, const std::function<void()> &work) {
    try {
        setup();
    } catch (const std::exception &e) {
        std::cerr << "c5: " << e.what() << '\n';
        return kUsageError;
    }
    try {
        work();
    } catch (const std::exception &e) {
        std::cerr << "c5: " << e.what() << '\n';
        return kRuntimeFailure;
    }
    return 0;
}

void write_text(const std::string &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    out.close();
    if (!out) throw c5::Error(c5::ErrorKind::Storage, "cannot write " + path);
}

std::string join(const std::vector<std::string> &items) {
    std::string out;
    for (const auto &i : items) {
        if (!out.empty()) out += ", ";
        out += "\"" + i + "\"";
    }
    return out;
}

/// id TAB labels [TAB ...]; only the first two fields are read.
void read_gold(const std::string &path, std::vector<std::string> &ids, std::vector<std::uint32_t> &classes) {
    std::ifstream in(path);
    if (!in) throw c5::Error(c5::ErrorKind::NotFound, "cannot open " + path);
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t at = offset;
        offset += line.size() + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw c5::ParseError(at, "gold row needs an id and labels");
        const std::string labels = line.substr(tab + 1, line.find('\t', tab + 1) - tab - 1);
        ids.push_back(line.substr(0, tab));
        std::uint32_t cls = UINT32_MAX;
        if (!labels.empty()) {
            try {
                cls = static_cast<std::uint32_t>(std::stoul(labels.substr(0, labels.find(','))));
            } catch (const std::logic_error &) {
                throw c5::ParseError(at, "malformed gold label");
            }
        }
        classes.push_back(cls);
    }
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Czech web corpus construction and evaluation toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", c5::kToolVersion);
    int status = 0;

    // run ------------------------------------------------------------------
    Common run_c;
    std::string stages;
    std::string run_dir;
    bool force = false;
    auto *run = app.add_subcommand("run", "Run pipeline stages into a run directory");
    add_common(run, run_c);
    run->get_option("--config")->required();
    run->add_option("--stages", stages, "Comma-separated stages: ingest,clean,dedup,tokenize,prep,eval");
    run->add_option("--run-dir", run_dir, "Run directory (run.dir)");
    run->add_flag("--force", force, "Rerun stages that are up to date");
    run->callback([&] {
        c5::RunOptions o;
        status = guarded(
            [&] {
                o.config_path = run_c.config_path;
                for (const auto &s : run_c.overrides) {
                    const auto eq = s.find('=');
                    if (eq == std::string::npos || eq == 0) throw c5::Error(c5::ErrorKind::InvalidInput, "--set expects key=value");
                    o.overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
                }
                if (run_c.workers > 0) o.overrides.emplace_back("run.workers", std::to_string(run_c.workers));
                if (run->count("--stages")) o.stages = c5::parse_stage_list(stages);
                if (!run_dir.empty()) o.run_dir = fs::path(run_dir);
                o.force = force;
                o.progress = run_c.quiet ? nullptr : &std::cerr;
            },
            [] {});
        if (status != 0) return;
        const c5::RunResult r = c5::run_pipeline(o);
        if (r.exit_code != 0) {
            std::cerr << "c5: " << r.error << '\n';
            status = r.exit_code;
            return;
        }
        std::cout << c5::report_stats(r.stats);
    });

    // ingest ---------------------------------------------------------------
    Common ing_c;
    std::string ing_out;
    std::vector<std::string> crawls;
    std::vector<std::string> archives;
    std::string index_kind;
    std::string index_dir;
    std::string limit;
    auto *ingest = app.add_subcommand("ingest", "Select and parse WET records into JSON lines");
    add_common(ingest, ing_c);
    ingest->add_option("-o,--output", ing_out, "Record JSON-lines output")->required();
    ingest->add_option("--crawl", crawls, "Crawl id, e.g. CC-MAIN-2019-35");
    ingest->add_option("--archive", archives, "Read these WET archives instead of an index")->check(CLI::ExistingFile);
    ingest->add_option("--index", index_kind, "Index backend")->check(CLI::IsMember({"local", "http"}));
    ingest->add_option("--index-dir", index_dir, "Local index directory");
    ingest->add_option("--limit", limit, "Maximum pointers per crawl");
    ingest->callback([&] {
        c5::StageContext ctx;
        status = guarded(
            [&] {
                std::map<std::string, std::string> flags;
                if (!crawls.empty()) flags["ingest.crawls"] = join(crawls);
                if (!archives.empty()) flags["ingest.archives"] = join(archives);
                if (!index_kind.empty()) flags["ingest.index"] = index_kind;
                if (!index_dir.empty()) flags["ingest.index_dir"] = index_dir;
                if (!limit.empty()) flags["ingest.limit"] = limit;
                ctx = context(ing_c, load_config(ing_c, flags));
                for (const auto &crawl : ctx.config.get_list("ingest.crawls", {})) c5::validate_crawl_id(crawl);
            },
            [&] {
                const auto s = c5::stage_ingest(ctx, ing_out);
                std::cerr << "records parsed: " << s.records_parsed << ", selected: " << s.records_selected
                          << ", non-conversion skipped: " << s.records_skipped
                          << ", bytes downloaded: " << s.bytes_downloaded << '\n';
            });
    });

    // clean ----------------------------------------------------------------
    Common cl_c;
    std::vector<std::string> cl_in;
    std::string cl_out;
    std::string cl_stats;
    auto *clean = app.add_subcommand("clean", "Apply line and page cleaning rules");
    add_common(clean, cl_c);
    clean->add_option("-i,--input", cl_in, "Record JSON lines (.jsonl) or WET archives")->required()->check(CLI::ExistingFile);
    clean->add_option("-o,--output", cl_out, "Cleaned JSON-lines output")->required();
    clean->add_option("--stats", cl_stats, "Write clean statistics JSON here");
    clean->callback([&] {
        c5::StageContext ctx;
        status = guarded(
            [&] {
                ctx = context(cl_c, load_config(cl_c));
                (void)c5::CleaningConfig::from_config(ctx.config);
                (void)ctx.config.require_string("clean.language_model");
            },
            [&] {
                std::vector<fs::path> inputs(cl_in.begin(), cl_in.end());
                const auto summary = c5::stage_clean(ctx, inputs, cl_out);
                if (!cl_stats.empty()) write_text(cl_stats, summary.to_json());
                c5::RunStats rs;
                rs.pages_in = summary.stats.pages_in;
                rs.pages_kept = summary.stats.pages_kept;
                rs.pages_dropped_by_rule = summary.stats.pages_dropped;
                rs.lines_in = summary.stats.lines_in;
                rs.lines_kept = summary.stats.lines_kept;
                rs.lines_in_dropped_pages = summary.stats.lines_in_dropped_pages;
                rs.lines_dropped_by_rule = summary.stats.lines_dropped;
                rs.input_bytes = summary.stats.input_bytes;
                rs.retained_bytes = summary.retained_bytes;
                std::cout << c5::report_stats(rs);
            });
    });

    // dedup ----------------------------------------------------------------
    Common dd_c;
    std::string dd_in;
    std::string dd_out;
    std::string dd_store;
    std::string dd_load;
    std::string dd_stats;
    auto *dedup = app.add_subcommand("dedup", "Remove repeated lines across the corpus");
    add_common(dedup, dd_c);
    dedup->add_option("-i,--input", dd_in, "Cleaned JSON lines")->required()->check(CLI::ExistingFile);
    dedup->add_option("-o,--output", dd_out, "Deduplicated JSON-lines output")->required();
    dedup->add_option("--store", dd_store, "Save the line store to this directory");
    dedup->add_option("--load-store", dd_load, "Start from a saved line store")->check(CLI::ExistingDirectory);
    dedup->add_option("--stats", dd_stats, "Write dedup statistics JSON here");
    dedup->callback([&] {
        c5::StageContext ctx;
        status = guarded(
            [&] {
                std::map<std::string, std::string> flags;
                if (!dd_load.empty()) flags["dedup.load_store"] = dd_load;
                ctx = context(dd_c, load_config(dd_c, flags));
                (void)c5::CleaningConfig::from_config(ctx.config);
            },
            [&] {
                std::optional<fs::path> store;
                if (!dd_store.empty()) store = fs::path(dd_store);
                const auto s = c5::stage_dedup(ctx, dd_in, dd_out, store);
                if (!dd_stats.empty()) write_text(dd_stats, s.to_json());
                std::cout << s.to_json();
            });
    });

    // train-tokenizer --------------------------------------------------------
    Common tt_c;
    std::string tt_in;
    std::string tt_out;
    std::string tt_mode;
    std::string tt_vocab;
    std::string tt_cov;
    auto *train_tok = app.add_subcommand("train-tokenizer", "Learn a BPE vocabulary");
    add_common(train_tok, tt_c);
    train_tok->add_option("-i,--input", tt_in, "Cleaned JSON lines")->required()->check(CLI::ExistingFile);
    train_tok->add_option("-o,--output", tt_out, "Model file")->required();
    train_tok->add_option("--mode", tt_mode, "char-level or byte-level")->check(CLI::IsMember({"char-level", "byte-level"}));
    train_tok->add_option("--vocab-size", tt_vocab, "Vocabulary size including special tokens");
    train_tok->add_option("--coverage", tt_cov, "Character coverage (char mode)");
    train_tok->callback([&] {
        c5::StageContext ctx;
        status = guarded(
            [&] {
                std::map<std::string, std::string> flags;
                if (!tt_mode.empty()) flags["tokenizer.mode"] = tt_mode;
                if (!tt_vocab.empty()) flags["tokenizer.vocab_size"] = tt_vocab;
                if (!tt_cov.empty()) flags["tokenizer.character_coverage"] = tt_cov;
                ctx = context(tt_c, load_config(tt_c, flags));
            },
            [&] { c5::stage_train_tokenizer(ctx, tt_in, tt_out); });
    });

    // encode -----------------------------------------------------------------
    Common en_c;
    std::string en_model;
    std::string en_in;
    bool en_decode = false;
    bool en_tokens = false;
    auto *encode = app.add_subcommand("encode", "Encode text lines to ids, or decode ids to text");
    add_common(encode, en_c, false);
    encode->add_option("-m,--model", en_model, "Model file")->required()->check(CLI::ExistingFile);
    encode->add_option("-i,--input", en_in, "Input file (default: stdin)")->check(CLI::ExistingFile);
    encode->add_flag("--decode", en_decode, "Read space-separated ids, print text");
    encode->add_flag("--tokens", en_tokens, "Print token strings instead of ids");
    encode->callback([&] {
        std::optional<c5::BpeModel> model;
        status = guarded([&] { model = c5::BpeModel::load(en_model); },
                         [&] {
                             std::ifstream file;
                             if (!en_in.empty()) file.open(en_in, std::ios::binary);
                             std::istream &in = en_in.empty() ? std::cin : file;
                             std::string line;
                             while (std::getline(in, line)) {
                                 if (en_decode) {
                                     std::istringstream ids(line);
                                     std::vector<std::uint32_t> v;
                                     std::uint32_t id;
                                     while (ids >> id) v.push_back(id);
                                     std::cout << model->decode(v) << '\n';
                                     continue;
                                 }
                                 const auto seq = model->encode(line);
                                 for (std::size_t i = 0; i < seq.ids.size(); ++i) {
                                     if (i) std::cout << ' ';
                                     if (en_tokens) {
                                         std::cout << model->token(seq.ids[i]);
                                     } else {
                                         std::cout << seq.ids[i];
                                     }
                                 }
                                 std::cout << '\n';
                             }
                         });
    });

    // prep -------------------------------------------------------------------
    Common pp_c;
    std::string pp_model;
    std::string pp_in;
    std::string pp_out;
    std::string pp_debug;
    auto *prep = app.add_subcommand("prep", "Generate masked pre-training instances");
    add_common(prep, pp_c);
    prep->add_option("-m,--model", pp_model, "Tokenizer model")->required()->check(CLI::ExistingFile);
    prep->add_option("-i,--input", pp_in, "Corpus JSON lines")->required()->check(CLI::ExistingFile);
    prep->add_option("-o,--output", pp_out, "Binary instance file (sidecar gets .json)")->required();
    prep->add_option("--debug", pp_debug, "Also write one readable instance per line here");
    prep->callback([&] {
        c5::StageContext ctx;
        std::optional<c5::BpeModel> model;
        status = guarded(
            [&] {
                ctx = context(pp_c, load_config(pp_c));
                (void)c5::PretrainConfig::from_config(ctx.config);
                model = c5::BpeModel::load(pp_model);
            },
            [&] {
                std::optional<fs::path> debug;
                if (!pp_debug.empty()) debug = fs::path(pp_debug);
                c5::stage_prep(ctx, *model, pp_in, pp_out, debug);
            });
    });

    // split-folds ------------------------------------------------------------
    Common sf_c;
    std::string sf_in;
    std::string sf_out;
    int sf_k = 10;
    std::uint64_t sf_seed = 0;
    bool sf_random = false;
    auto *split = app.add_subcommand("split-folds", "Write a k-fold plan for a labelled sample file");
    add_common(split, sf_c, false);
    split->add_option("-i,--input", sf_in, "TSV: id, comma-separated labels")->required()->check(CLI::ExistingFile);
    split->add_option("-o,--output", sf_out, "Fold plan JSON")->required();
    split->add_option("-k", sf_k, "Number of folds");
    split->add_option("--seed", sf_seed, "Shuffle seed");
    split->add_flag("--random", sf_random, "Plain shuffled folds instead of stratified");
    split->callback([&] {
        status = guarded([&] {
            if (sf_k < 2) throw c5::Error(c5::ErrorKind::InvalidInput, "-k must be at least 2");
        },
                         [&] {
                             std::vector<std::string> ids;
                             std::vector<std::uint32_t> classes;
                             read_gold(sf_in, ids, classes);
                             const auto plan = sf_random ? c5::random_kfold(ids, sf_k, sf_seed)
                                                         : c5::stratified_kfold(ids, classes, sf_k, sf_seed);
                             plan.save(sf_out);
                         });
    });

    // evaluate ---------------------------------------------------------------
    Common ev_c;
    std::string ev_in;
    std::string ev_folds;
    std::string ev_task = "multi-label";
    std::string ev_avg = "macro";
    std::string ev_out;
    auto *evaluate = app.add_subcommand("evaluate", "Score a prediction file");
    add_common(evaluate, ev_c, false);
    evaluate->add_option("-i,--input", ev_in, "Prediction TSV: id, gold labels, scores")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--folds", ev_folds, "Fold plan JSON")->check(CLI::ExistingFile);
    evaluate->add_option("--task", ev_task, "multi-label or single-label")->check(CLI::IsMember({"multi-label", "single-label"}));
    evaluate->add_option("--averaging", ev_avg, "macro, micro or weighted (single-label)")
        ->check(CLI::IsMember({"macro", "micro", "weighted"}));
    evaluate->add_option("-o,--output", ev_out, "Write the report JSON here");
    evaluate->callback([&] {
        status = guarded([] {},
                         [&] {
                             const auto rows = c5::read_predictions(fs::path(ev_in));
                             std::optional<c5::FoldPlan> plan;
                             if (!ev_folds.empty()) plan = c5::FoldPlan::load(ev_folds);
                             const auto report = c5::evaluate_predictions(rows, c5::parse_task_kind(ev_task),
                                                                          c5::parse_averaging(ev_avg), plan);
                             std::vector<c5::LabelSet> gold;
                             for (const auto &r : rows) gold.push_back(r.gold);
                             std::cout << c5::render_report(report);
                             std::cout << "samples       " << rows.size() << "\n";
                             std::cout << "label card.   " << c5::label_cardinality(gold) << "\n";
                             if (!ev_out.empty()) write_text(ev_out, report.to_json());
                         });
    });

    // stats ------------------------------------------------------------------
    Common st_c;
    std::string st_path;
    bool st_json = false;
    auto *stats = app.add_subcommand("stats", "Summarize a run directory or stats.json");
    add_common(stats, st_c, false);
    stats->add_option("path", st_path, "Run directory or stats.json")->required()->check(CLI::ExistingPath);
    stats->add_flag("--json", st_json, "Print JSON instead of text");
    stats->callback([&] {
        status = guarded([] {},
                         [&] {
                             c5::RunStats s;
                             if (fs::is_directory(st_path)) {
                                 s = c5::collect_run_stats(st_path);
                             } else {
                                 std::ifstream in(st_path);
                                 std::ostringstream buf;
                                 buf << in.rdbuf();
                                 s = c5::RunStats::from_json(buf.str());
                             }
                             std::cout << (st_json ? s.to_json() : c5::report_stats(s));
                         });
    });

    // train-langid -----------------------------------------------------------
    Common tl_c;
    std::string tl_out;
    std::vector<std::string> tl_pairs;
    auto *train_lang = app.add_subcommand("train-langid", "Build a language model from lang=path samples");
    add_common(train_lang, tl_c, false);
    train_lang->add_option("-o,--output", tl_out, "Model file")->required();
    train_lang->add_option("samples", tl_pairs, "code=path pairs, e.g. ces=ces.txt")->required();
    train_lang->callback([&] {
        std::map<std::string, std::string> corpora;
        status = guarded(
            [&] {
                for (const auto &p : tl_pairs) {
                    const auto eq = p.find('=');
                    if (eq == std::string::npos) throw c5::Error(c5::ErrorKind::InvalidInput, "expected code=path: " + p);
                    std::ifstream in(p.substr(eq + 1), std::ios::binary);
                    if (!in) throw c5::Error(c5::ErrorKind::NotFound, "cannot open " + p.substr(eq + 1));
                    std::ostringstream buf;
                    buf << in.rdbuf();
                    corpora[p.substr(0, eq)] = buf.str();
                }
            },
            [&] { c5::LanguageModel::train(corpora).save(tl_out); });
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }
    return status;
}
