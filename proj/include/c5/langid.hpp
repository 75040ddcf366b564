#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace c5 {

struct LangVerdict {
    std::string language;
    double probability = 0.0;
};

struct DetectOptions {
    int trials = 7;
    double alpha = 0.5;
    double alpha_width = 0.05;
    int iteration_limit = 10000;
    double convergence = 0.99999;
    std::size_t max_text_chars = 10000;
    std::uint64_t seed = 0;
};

/// Character 1-3-gram naive Bayes language identifier.
///
/// Detection follows the randomized scheme of the langdetect family:
/// several trials each draw n-grams from the text at random and update a
/// posterior until it converges; the reported distribution is the mean of
/// the trial posteriors. Pure single-language text converges to the same
/// language in every trial, while mixed text splits the trials, which is
/// what gives the 0.99 threshold its meaning.
class LanguageModel {
   public:
    static constexpr std::size_t kMinTrainingBytes = 100 * 1024;

    /// Throws Unsupported for fewer than two languages and InvalidInput
    /// when a language has less than `min_bytes` of text.
    static LanguageModel train(const std::map<std::string, std::string> &corpora,
                               std::size_t min_bytes = kMinTrainingBytes);

    static LanguageModel parse(std::string_view text);
    static LanguageModel load(const std::filesystem::path &path);
    [[nodiscard]] std::string serialize() const;
    void save(const std::filesystem::path &path) const;

    [[nodiscard]] const std::vector<std::string> &languages() const { return languages_; }

    /// Full posterior over every language, highest first (ties by
    /// language order). Sums to 1. Throws InvalidInput on blank text.
    [[nodiscard]] std::vector<LangVerdict> detect_all(std::string_view text, const DetectOptions &opts = {}) const;

    [[nodiscard]] LangVerdict detect(std::string_view text, const DetectOptions &opts = {}) const;

   private:
    void finalize();

    std::vector<std::string> languages_;
    std::map<std::string, std::vector<std::uint64_t>> counts_;
    std::unordered_map<std::string, std::vector<double>> probs_;
};

/// Normalized character n-grams (n = 1..3) of `text`, in text order.
std::vector<std::string> extract_ngrams(std::string_view text, std::size_t max_chars = SIZE_MAX);

LangVerdict detect_language(std::string_view text, const LanguageModel &model, const DetectOptions &opts = {});

}  // namespace c5
