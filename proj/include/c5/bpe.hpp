#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace c5 {

enum class BpeMode { CharLevel, ByteLevel };

const char *to_string(BpeMode mode);
BpeMode parse_bpe_mode(std::string_view name);

/// Word-initial marker of char-level models (U+2581).
inline constexpr std::string_view kWordMarker = "\xE2\x96\x81";

/// GPT-2 style printable stand-in for each byte value.
const std::string &byte_symbol(unsigned char b);

struct TokenSequence {
    std::vector<std::uint32_t> ids;
    std::vector<bool> word_start;  // same length as ids

    bool operator==(const TokenSequence &) const = default;
};

/// Splits text into merge units. Char-level: whitespace-collapsed words
/// prefixed with the word marker. Byte-level: non-whitespace runs
/// carrying at most one leading ASCII space, and leftover whitespace
/// runs, so that concatenating the pieces restores the input exactly.
std::vector<std::string> pretokenize(std::string_view text, BpeMode mode);

/// Frequency-ranked characters (ties by code point) forming the smallest
/// prefix whose cumulative share of non-whitespace characters reaches
/// `coverage`.
std::vector<std::string> compute_alphabet(const std::vector<std::string> &corpus, double coverage);

class BpeModel {
   public:
    BpeModel() = default;

    [[nodiscard]] BpeMode mode() const { return mode_; }
    [[nodiscard]] double character_coverage() const { return coverage_; }
    [[nodiscard]] const std::vector<std::string> &special_tokens() const { return specials_; }
    [[nodiscard]] const std::vector<std::string> &alphabet() const { return alphabet_; }
    [[nodiscard]] const std::vector<std::pair<std::string, std::string>> &merges() const { return merges_; }
    [[nodiscard]] std::size_t size() const { return tokens_.size(); }
    [[nodiscard]] const std::string &token(std::uint32_t id) const { return tokens_.at(id); }
    /// -1 if absent.
    [[nodiscard]] std::int64_t id_of(std::string_view token) const;

    [[nodiscard]] std::uint32_t pad_id() const { return pad_; }
    [[nodiscard]] std::uint32_t unk_id() const { return unk_; }
    [[nodiscard]] std::uint32_t mask_id() const { return mask_; }
    /// [CLS] for char-level models, <s> for byte-level ones.
    [[nodiscard]] std::uint32_t begin_id() const { return begin_; }
    /// [SEP] for char-level models, </s> for byte-level ones.
    [[nodiscard]] std::uint32_t sep_id() const { return sep_; }
    [[nodiscard]] bool is_special(std::uint32_t id) const { return id < specials_.size(); }

    [[nodiscard]] TokenSequence encode(std::string_view text) const;
    /// Throws InvalidInput on an id outside the vocabulary.
    [[nodiscard]] std::string decode(const std::vector<std::uint32_t> &ids) const;

    [[nodiscard]] std::string serialize() const;
    static BpeModel parse(std::string_view text);
    void save(const std::filesystem::path &path) const;
    static BpeModel load(const std::filesystem::path &path);

    /// Builds a model from its parts; validates that every merge refers
    /// to existing tokens.
    static BpeModel assemble(BpeMode mode, double coverage, std::vector<std::string> alphabet,
                             std::vector<std::pair<std::string, std::string>> merges);

    static std::vector<std::string> default_specials(BpeMode mode);

   private:
    void encode_piece(std::string_view piece, std::vector<std::uint32_t> &out) const;

    BpeMode mode_ = BpeMode::CharLevel;
    double coverage_ = 1.0;
    std::vector<std::string> specials_;
    std::vector<std::string> alphabet_;
    std::vector<std::pair<std::string, std::string>> merges_;
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::uint32_t> vocab_;
    // (left id << 32 | right id) -> (rank, merged id)
    std::unordered_map<std::uint64_t, std::pair<std::uint32_t, std::uint32_t>> merge_rank_;
    std::unordered_map<std::string, unsigned char> symbol_byte_;
    std::uint32_t pad_ = 0, unk_ = 0, mask_ = 0, begin_ = 0, sep_ = 0;
};

struct BpeTrainOptions {
    std::size_t vocab_size = 0;
    BpeMode mode = BpeMode::CharLevel;
    double coverage = 1.0;  // char-level only
};

/// Accumulates word counts from a text stream, then learns merges.
class BpeTrainer {
   public:
    explicit BpeTrainer(BpeTrainOptions options);

    void add_text(std::string_view text);

    /// Throws InvalidInput when vocab_size leaves no room for merges or
    /// the corpus is empty.
    [[nodiscard]] BpeModel train() const;

   private:
    BpeTrainOptions options_;
    std::map<std::string, std::uint64_t> words_;
    std::map<char32_t, std::uint64_t> char_counts_;
};

BpeModel train_bpe(const std::vector<std::string> &corpus, const BpeTrainOptions &options);

}  // namespace c5
