#include "c5/clean.hpp"

#include <fstream>

#include "c5/error.hpp"
#include "c5/utf8.hpp"

namespace c5 {

namespace {

std::string_view trim_ws(std::string_view s) {
    const auto last = utf8::last_non_space(s);
    if (last == std::string_view::npos) return {};
    std::size_t end = last;
    utf8::next(s, end);
    std::size_t pos = 0;
    std::size_t first = 0;
    while (pos < end) {
        first = pos;
        if (!utf8::is_space(utf8::next(s, pos))) break;
    }
    return s.substr(first, end - first);
}

bool contains_whole_word(const std::string &folded, const std::string &needle) {
    if (needle.empty()) return false;
    std::size_t from = 0;
    while ((from = folded.find(needle, from)) != std::string::npos) {
        bool left_ok = true;
        if (from > 0) {
            // step back to the start of the previous code point
            std::size_t p = from - 1;
            while (p > 0 && (static_cast<unsigned char>(folded[p]) & 0xC0) == 0x80) --p;
            std::size_t q = p;
            left_ok = !utf8::is_word_char(utf8::next(folded, q));
        }
        bool right_ok = true;
        const std::size_t end = from + needle.size();
        if (end < folded.size()) {
            std::size_t q = end;
            right_ok = !utf8::is_word_char(utf8::next(folded, q));
        }
        if (left_ok && right_ok) return true;
        ++from;
    }
    return false;
}

}  // namespace

void CleaningConfig::load_wordlist(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::NotFound, "cannot open offensive wordlist " + path.string());
    offensive_wordlist = path;
    offensive_words.clear();
    std::string line;
    while (std::getline(in, line)) {
        const std::string decoded = utf8::decode_lossy(line);
        const auto word = trim_ws(decoded);
        if (word.empty() || word.front() == '#') continue;
        offensive_words.push_back(utf8::fold_case(word));
    }
}

void CleaningConfig::validate() const {
    if (!(language_threshold >= 0.0 && language_threshold <= 1.0)) {
        throw Error(ErrorKind::InvalidInput, "language_threshold must be in [0, 1]");
    }
    if (min_words_per_line < 1) throw Error(ErrorKind::InvalidInput, "min_words_per_line must be >= 1");
    if (min_sentences_per_page < 1) throw Error(ErrorKind::InvalidInput, "min_sentences_per_page must be >= 1");
    if (terminal_marks.empty()) throw Error(ErrorKind::InvalidInput, "terminal_marks must not be empty");
}

CleaningConfig CleaningConfig::from_config(const Config &cfg) {
    CleaningConfig c;
    if (auto v = cfg.get("clean.terminal_marks")) c.terminal_marks = utf8::to_u32(*v);
    c.banned_substrings = cfg.get_list("clean.banned_substrings", c.banned_substrings);
    c.page_kill_strings = cfg.get_list("clean.page_kill_strings", c.page_kill_strings);
    c.language_code = cfg.get_string("clean.language_code", c.language_code);
    c.language_threshold = cfg.get_double("clean.language_threshold", c.language_threshold);
    c.min_words_per_line = static_cast<int>(cfg.get_int("clean.min_words_per_line", c.min_words_per_line));
    c.min_sentences_per_page =
        static_cast<int>(cfg.get_int("clean.min_sentences_per_page", c.min_sentences_per_page));
    c.detect.seed = static_cast<std::uint64_t>(cfg.get_int("clean.detect_seed", 0));
    for (auto &s : c.banned_substrings) s = utf8::fold_case(s);
    for (auto &s : c.page_kill_strings) s = utf8::fold_case(s);
    if (auto path = cfg.get("clean.offensive_wordlist"); path && !path->empty()) c.load_wordlist(*path);
    c.validate();
    return c;
}

LineVerdict filter_line(std::string_view line, const CleaningConfig &config) {
    const auto last = utf8::last_non_space(line);
    if (last == std::string_view::npos) return {false, rule::kTerminalPunctuation};
    std::size_t p = last;
    if (config.terminal_marks.find(utf8::next(line, p)) == std::u32string::npos) {
        return {false, rule::kTerminalPunctuation};
    }
    if (!config.banned_substrings.empty()) {
        const std::string folded = utf8::fold_case(line);
        for (const auto &banned : config.banned_substrings) {
            if (!banned.empty() && folded.find(banned) != std::string::npos) return {false, rule::kBannedSubstring};
        }
    }
    if (utf8::split_whitespace(line).size() < static_cast<std::size_t>(config.min_words_per_line)) {
        return {false, rule::kMinWords};
    }
    return {};
}

int sentence_count(const std::vector<std::string> &lines, std::u32string_view terminal_marks) {
    int count = 0;
    for (const auto &line : lines) {
        for (std::string_view token : utf8::split_whitespace(line)) {
            std::size_t p = token.size() - 1;
            while (p > 0 && (static_cast<unsigned char>(token[p]) & 0xC0) == 0x80) --p;
            if (terminal_marks.find(utf8::next(token, p)) != std::u32string_view::npos) ++count;
        }
    }
    return count;
}

PageOutcome clean_page(const WetRecord &record, const CleaningConfig &config, const LanguageModel &lang) {
    PageOutcome out;
    out.input_bytes = record.body.size();
    CleanDocument doc;
    doc.uri = record.target_uri;

    std::string_view body = record.body;
    std::size_t start = 0;
    while (start < body.size()) {
        auto nl = body.find('\n', start);
        if (nl == std::string_view::npos) nl = body.size();
        std::string_view line = body.substr(start, nl - start);
        start = nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++out.input_lines;
        const LineVerdict v = filter_line(line, config);
        if (v.keep) {
            doc.lines.emplace_back(trim_ws(line));
        } else {
            ++doc.drop_audit[std::string(v.rule)];
        }
    }
    out.audit = doc.drop_audit;

    auto drop = [&](std::string_view page_rule) {
        ++out.audit[std::string(page_rule)];
        return out;
    };

    if (!doc.lines.empty()) {
        std::string text;
        for (const auto &l : doc.lines) {
            text += l;
            text += '\n';
        }
        const std::string folded = utf8::fold_case(text);
        for (const auto &w : config.offensive_words) {
            if (contains_whole_word(folded, w)) return drop(rule::kOffensiveWord);
        }
        for (const auto &k : config.page_kill_strings) {
            if (!k.empty() && folded.find(k) != std::string::npos) return drop(rule::kPageKillString);
        }
        const LangVerdict verdict = lang.detect(text, config.detect);
        if (verdict.language != config.language_code || verdict.probability < config.language_threshold) {
            return drop(rule::kLanguage);
        }
    }
    doc.sentence_count = sentence_count(doc.lines, config.terminal_marks);
    if (doc.sentence_count < config.min_sentences_per_page) return drop(rule::kMinSentences);
    out.document = std::move(doc);
    return out;
}

bool is_page_rule(std::string_view r) {
    return r == rule::kOffensiveWord || r == rule::kPageKillString || r == rule::kLanguage ||
           r == rule::kMinSentences || r == rule::kDedupMinSentences;
}

void CleanStats::add(const PageOutcome &outcome) {
    std::lock_guard<std::mutex> lock(mu_);
    ++s_.pages_in;
    s_.lines_in += outcome.input_lines;
    s_.input_bytes += outcome.input_bytes;
    std::uint64_t line_drops = 0;
    for (const auto &[r, n] : outcome.audit) {
        if (is_page_rule(r)) {
            s_.pages_dropped[r] += n;
        } else {
            s_.lines_dropped[r] += n;
            line_drops += n;
        }
    }
    if (outcome.document) {
        ++s_.pages_kept;
        s_.lines_kept += outcome.document->lines.size();
    } else {
        s_.lines_in_dropped_pages += outcome.input_lines - line_drops;
    }
}

CleanStats::Snapshot CleanStats::snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return s_;
}

}  // namespace c5
