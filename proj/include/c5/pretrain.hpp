#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "c5/bpe.hpp"
#include "c5/clean.hpp"
#include "c5/config.hpp"
#include "c5/rng.hpp"

namespace c5 {

struct PretrainConfig {
    int seq_len = 128;
    int dup_factor = 5;
    double mask_prob = 0.15;
    int max_predictions = -1;  // -1: ceil(mask_prob * seq_len)
    double short_seq_prob = 0.10;
    bool nsp_enabled = true;
    bool cross_documents = false;  // MLM-only packing across document boundaries
    std::uint64_t rng_seed = 12345;

    [[nodiscard]] int effective_max_predictions() const;
    void validate() const;
    static PretrainConfig from_config(const Config &cfg);
};

struct PretrainInstance {
    std::vector<std::uint32_t> token_ids;  // padded to seq_len
    std::vector<std::uint8_t> segment_ids;
    std::vector<std::uint32_t> masked_positions;
    std::vector<std::uint32_t> masked_labels;
    std::optional<bool> is_next;

    bool operator==(const PretrainInstance &) const = default;
};

/// Splits lines after every token that ends with a terminal mark.
std::vector<std::string> segment_sentences(const CleanDocument &doc, std::u32string_view terminal_marks = U".?!");

/// Sentences of one document, each tokenized.
struct TokenizedDocument {
    std::vector<TokenSequence> sentences;
};

std::vector<TokenizedDocument> tokenize_documents(const std::vector<CleanDocument> &docs, const BpeModel &model);

struct NspPair {
    TokenSequence a;
    TokenSequence b;
    bool is_next = false;
};

/// Segment pairs drawn from document `doc_index`. Negatives take a
/// random span from another document. Throws Unsupported when the corpus
/// has no second non-empty document.
std::vector<NspPair> build_nsp_pairs(const std::vector<TokenizedDocument> &corpus, std::size_t doc_index,
                                     const PretrainConfig &config, Rng &rng);

struct MaskedSequence {
    std::vector<std::uint32_t> ids;
    std::vector<std::uint32_t> positions;
    std::vector<std::uint32_t> labels;
};

/// Whole-word masking over `tokens`; special-token positions never form
/// part of a word. The 80/10/10 replacement is drawn once per word.
MaskedSequence apply_whole_word_masking(const TokenSequence &tokens, const BpeModel &model,
                                        const PretrainConfig &config, Rng &rng);

using InstanceSink = std::function<void(PretrainInstance &&)>;

/// NSP mode (`nsp_enabled`): pairs per document, each emitted dup_factor
/// times with independent masks. MLM-only mode: sentences packed into
/// seq_len windows, each window masked dup_factor times. Output order is
/// fixed by document ordinal regardless of `workers`.
void generate_instances(const std::vector<TokenizedDocument> &corpus, const BpeModel &model,
                        const PretrainConfig &config, const InstanceSink &sink, std::size_t workers = 1);

/// Length-prefixed binary instance file with a running CRC-32.
class InstanceWriter {
   public:
    InstanceWriter(const std::filesystem::path &path, int seq_len);
    void add(const PretrainInstance &instance);
    /// Returns the CRC-32 of the whole file.
    std::uint32_t finish();
    [[nodiscard]] std::uint64_t count() const { return count_; }
    [[nodiscard]] std::uint64_t masked_tokens() const { return masked_; }

   private:
    void write(const std::string &bytes);

    std::filesystem::path path_;
    std::ofstream out_;
    std::uint32_t crc_ = 0;
    std::uint64_t count_ = 0;
    std::uint64_t masked_ = 0;
};

std::vector<PretrainInstance> read_instances(const std::filesystem::path &path);

std::string debug_string(const PretrainInstance &instance, const BpeModel &model);

}  // namespace c5
