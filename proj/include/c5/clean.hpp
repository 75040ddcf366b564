#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "c5/config.hpp"
#include "c5/ingest.hpp"
#include "c5/langid.hpp"

namespace c5 {

/// rule name -> number of lines or pages dropped by it
using DropAudit = std::map<std::string, std::uint64_t>;

namespace rule {
inline constexpr std::string_view kTerminalPunctuation = "terminal-punctuation";
inline constexpr std::string_view kBannedSubstring = "banned-substring";
inline constexpr std::string_view kMinWords = "min-words";
inline constexpr std::string_view kOffensiveWord = "offensive-word";
inline constexpr std::string_view kPageKillString = "page-kill-string";
inline constexpr std::string_view kLanguage = "language";
inline constexpr std::string_view kMinSentences = "min-sentences";
inline constexpr std::string_view kDuplicateLine = "duplicate-line";
inline constexpr std::string_view kDedupMinSentences = "dedup-min-sentences";
}  // namespace rule

struct CleaningConfig {
    std::u32string terminal_marks = U".?!";
    std::vector<std::string> banned_substrings = {"javascript", "cookies"};
    std::vector<std::string> page_kill_strings = {"lorem ipsum", "{"};
    std::filesystem::path offensive_wordlist;
    std::vector<std::string> offensive_words;  // loaded from the wordlist, case-folded
    std::string language_code = "ces";
    double language_threshold = 0.99;
    int min_words_per_line = 3;
    int min_sentences_per_page = 5;
    DetectOptions detect;

    /// Reads `clean.*` keys and loads the offensive wordlist. Throws
    /// InvalidInput when an invariant is violated.
    static CleaningConfig from_config(const Config &cfg);
    void load_wordlist(const std::filesystem::path &path);
    void validate() const;
};

/// Keep, or the name of the first violated line rule.
struct LineVerdict {
    bool keep = true;
    std::string_view rule;
};

LineVerdict filter_line(std::string_view line, const CleaningConfig &config);

int sentence_count(const std::vector<std::string> &lines, std::u32string_view terminal_marks = U".?!");

struct CleanDocument {
    std::string uri;
    std::vector<std::string> lines;
    int sentence_count = 0;
    DropAudit drop_audit;

    bool operator==(const CleanDocument &) const = default;
};

struct PageOutcome {
    std::optional<CleanDocument> document;
    DropAudit audit;  // line drops plus, for a dropped page, its page rule
    std::uint64_t input_lines = 0;
    std::uint64_t input_bytes = 0;
};

/// Applies the line rules, then the page rules in order: offensive word
/// or kill string, language, minimum sentence count.
PageOutcome clean_page(const WetRecord &record, const CleaningConfig &config, const LanguageModel &lang);

/// Counter aggregation shared between cleaning workers.
class CleanStats {
   public:
    void add(const PageOutcome &outcome);

    struct Snapshot {
        std::uint64_t pages_in = 0;
        std::uint64_t pages_kept = 0;
        std::uint64_t lines_in = 0;
        std::uint64_t lines_kept = 0;
        std::uint64_t lines_in_dropped_pages = 0;  // passed the line rules, lost with their page
        std::uint64_t input_bytes = 0;
        DropAudit pages_dropped;
        DropAudit lines_dropped;
    };
    [[nodiscard]] Snapshot snapshot() const;

   private:
    mutable std::mutex mu_;
    Snapshot s_;
};

bool is_page_rule(std::string_view rule_name);

}  // namespace c5
