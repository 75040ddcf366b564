#include "c5/langid.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "c5/error.hpp"
#include "c5/rng.hpp"
#include "c5/utf8.hpp"

namespace c5 {

namespace {

bool is_letter(char32_t cp) {
    if (cp < 0x80) return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    return utf8::is_word_char(cp);
}

}  // namespace

std::vector<std::string> extract_ngrams(std::string_view text, std::size_t max_chars) {
    // letters lowercased, everything else becomes a single space
    std::u32string norm;
    norm.push_back(U' ');
    std::size_t pos = 0;
    std::size_t chars = 0;
    while (pos < text.size() && chars < max_chars) {
        char32_t cp = utf8::next(text, pos);
        ++chars;
        if (is_letter(cp)) {
            norm.push_back(utf8::fold_case(cp));
        } else if (norm.back() != U' ') {
            norm.push_back(U' ');
        }
    }
    if (norm.back() != U' ') norm.push_back(U' ');

    std::vector<std::string> grams;
    grams.reserve(norm.size() * 3);
    for (std::size_t i = 0; i < norm.size(); ++i) {
        for (std::size_t n = 1; n <= 3 && i + n <= norm.size(); ++n) {
            const std::u32string_view g(norm.data() + i, n);
            if (n == 1 && g[0] == U' ') continue;
            // n-grams may start or end at a boundary but never span two words
            if (n == 3 && g[1] == U' ') continue;
            grams.push_back(utf8::from_u32(g));
        }
    }
    return grams;
}

LanguageModel LanguageModel::train(const std::map<std::string, std::string> &corpora, std::size_t min_bytes) {
    if (corpora.size() < 2) {
        throw Error(ErrorKind::Unsupported, "language model needs at least two languages");
    }
    LanguageModel model;
    for (const auto &[lang, text] : corpora) {
        if (text.size() < min_bytes) {
            throw Error(ErrorKind::InvalidInput, "language '" + lang + "' has " + std::to_string(text.size()) +
                                                     " bytes of training text, need " + std::to_string(min_bytes));
        }
        model.languages_.push_back(lang);
    }
    const std::size_t L = model.languages_.size();
    std::size_t li = 0;
    for (const auto &[lang, text] : corpora) {
        const std::string clean = utf8::decode_lossy(text);
        for (auto &g : extract_ngrams(clean)) {
            auto [it, inserted] = model.counts_.try_emplace(std::move(g));
            if (inserted) it->second.assign(L, 0);
            ++it->second[li];
        }
        ++li;
    }
    model.finalize();
    return model;
}

void LanguageModel::finalize() {
    const std::size_t L = languages_.size();
    std::vector<std::array<double, 3>> totals(L, {0, 0, 0});
    for (const auto &[g, c] : counts_) {
        const std::size_t n = utf8::to_u32(g).size();
        for (std::size_t l = 0; l < L; ++l) totals[l][n - 1] += static_cast<double>(c[l]);
    }
    probs_.clear();
    probs_.reserve(counts_.size());
    for (const auto &[g, c] : counts_) {
        const std::size_t n = utf8::to_u32(g).size();
        std::vector<double> p(L);
        for (std::size_t l = 0; l < L; ++l) {
            p[l] = totals[l][n - 1] > 0 ? static_cast<double>(c[l]) / totals[l][n - 1] : 0.0;
        }
        probs_.emplace(g, std::move(p));
    }
}

std::string LanguageModel::serialize() const {
    std::string out = "c5-langid v1\nlanguages";
    for (const auto &l : languages_) out += " " + l;
    out += "\nngrams " + std::to_string(counts_.size()) + "\n";
    for (const auto &[g, c] : counts_) {
        out += g;
        for (auto v : c) {
            out += '\t';
            out += std::to_string(v);
        }
        out += '\n';
    }
    return out;
}

LanguageModel LanguageModel::parse(std::string_view text) {
    LanguageModel model;
    std::size_t pos = 0;
    auto next_line = [&](std::string_view &line) {
        if (pos >= text.size()) return false;
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        line = text.substr(pos, nl - pos);
        pos = nl + 1;
        return true;
    };
    auto corrupt = [](const std::string &why) { return Error(ErrorKind::Corrupt, "language model: " + why); };
    std::string_view line;
    if (!next_line(line) || line != "c5-langid v1") throw corrupt("bad header");
    if (!next_line(line) || line.rfind("languages", 0) != 0) throw corrupt("missing languages");
    std::istringstream ls{std::string(line.substr(9))};
    for (std::string l; ls >> l;) model.languages_.push_back(l);
    if (model.languages_.size() < 2) throw corrupt("fewer than two languages");
    if (!next_line(line) || line.rfind("ngrams ", 0) != 0) throw corrupt("missing ngram count");
    const std::size_t L = model.languages_.size();
    while (next_line(line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos) throw corrupt("bad ngram line");
        std::vector<std::uint64_t> c;
        std::size_t start = tab + 1;
        while (start <= line.size()) {
            auto end = line.find('\t', start);
            if (end == std::string_view::npos) end = line.size();
            std::uint64_t v = 0;
            if (std::from_chars(line.data() + start, line.data() + end, v).ptr != line.data() + end) {
                throw corrupt("bad count");
            }
            c.push_back(v);
            start = end + 1;
        }
        if (c.size() != L) throw corrupt("wrong number of counts");
        model.counts_.emplace(std::string(line.substr(0, tab)), std::move(c));
    }
    model.finalize();
    return model;
}

LanguageModel LanguageModel::load(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::NotFound, "cannot open language model " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

void LanguageModel::save(const std::filesystem::path &path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Storage, "cannot write " + path.string());
    out << serialize();
}

std::vector<LangVerdict> LanguageModel::detect_all(std::string_view text, const DetectOptions &opts) const {
    if (utf8::last_non_space(text) == std::string_view::npos) {
        throw Error(ErrorKind::InvalidInput, "cannot detect the language of empty text");
    }
    const std::size_t L = languages_.size();
    std::vector<const std::vector<double> *> features;
    for (const auto &g : extract_ngrams(text, opts.max_text_chars)) {
        auto it = probs_.find(g);
        if (it != probs_.end()) features.push_back(&it->second);
    }

    std::vector<double> result(L, 1.0 / static_cast<double>(L));
    if (!features.empty()) {
        std::fill(result.begin(), result.end(), 0.0);
        Rng rng(opts.seed);
        std::vector<double> prob(L);
        auto normalize = [&] {
            double sum = 0, best = 0;
            for (double p : prob) sum += p;
            for (double &p : prob) {
                p /= sum;
                best = std::max(best, p);
            }
            return best;
        };
        for (int t = 0; t < opts.trials; ++t) {
            std::fill(prob.begin(), prob.end(), 1.0 / static_cast<double>(L));
            const double alpha = opts.alpha + rng.gaussian() * opts.alpha_width;
            const double weight = alpha / 10000.0;
            for (int i = 0;; ++i) {
                const auto &p = *features[rng.below(features.size())];
                for (std::size_t l = 0; l < L; ++l) prob[l] *= weight + p[l];
                if (i % 5 == 0 && (normalize() > opts.convergence || i >= opts.iteration_limit)) break;
            }
            for (std::size_t l = 0; l < L; ++l) result[l] += prob[l] / opts.trials;
        }
    }

    std::vector<LangVerdict> out;
    for (std::size_t l = 0; l < L; ++l) out.push_back({languages_[l], result[l]});
    std::stable_sort(out.begin(), out.end(),
                     [](const LangVerdict &a, const LangVerdict &b) { return a.probability > b.probability; });
    return out;
}

LangVerdict LanguageModel::detect(std::string_view text, const DetectOptions &opts) const {
    return detect_all(text, opts).front();
}

LangVerdict detect_language(std::string_view text, const LanguageModel &model, const DetectOptions &opts) {
    return model.detect(text, opts);
}

}  // namespace c5
