#include "c5/bpe.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <queue>
#include <sstream>
#include <unordered_set>

#include "c5/error.hpp"
#include "c5/utf8.hpp"

namespace c5 {

namespace {

constexpr std::uint32_t kBarrier = UINT32_MAX;

bool is_ascii_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) { return (std::uint64_t(a) << 32) | b; }

const std::array<std::string, 256> &byte_symbols() {
    static const std::array<std::string, 256> table = [] {
        std::array<std::string, 256> t;
        std::array<bool, 256> printable{};
        for (int b = '!'; b <= '~'; ++b) printable[b] = true;
        for (int b = 0xA1; b <= 0xAC; ++b) printable[b] = true;
        for (int b = 0xAE; b <= 0xFF; ++b) printable[b] = true;
        char32_t extra = 256;
        for (int b = 0; b < 256; ++b) {
            std::string s;
            utf8::append(s, printable[b] ? static_cast<char32_t>(b) : extra++);
            t[b] = s;
        }
        return t;
    }();
    return table;
}

std::vector<std::string> alphabet_from_counts(const std::map<char32_t, std::uint64_t> &counts, double coverage) {
    if (!(coverage > 0.0 && coverage <= 1.0)) throw Error(ErrorKind::InvalidInput, "coverage must be in (0, 1]");
    std::uint64_t total = 0;
    std::vector<std::pair<char32_t, std::uint64_t>> ranked(counts.begin(), counts.end());
    for (const auto &[cp, n] : ranked) total += n;
    if (total == 0) throw Error(ErrorKind::InvalidInput, "empty corpus");
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto &a, const auto &b) { return a.second > b.second; });
    std::vector<std::string> out;
    std::uint64_t cum = 0;
    const double target = coverage * static_cast<double>(total);
    for (const auto &[cp, n] : ranked) {
        std::string s;
        utf8::append(s, cp);
        out.push_back(std::move(s));
        cum += n;
        // relative slack absorbs the rounding of coverage * total
        if (static_cast<double>(cum) >= target * (1.0 - 1e-12)) break;
    }
    return out;
}

void count_chars(std::string_view text, std::map<char32_t, std::uint64_t> &counts) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        const char32_t cp = utf8::next(text, pos);
        if (!utf8::is_space(cp)) ++counts[cp];
    }
}

std::string escape_token(std::string_view s) {
    std::string out;
    for (unsigned char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case ' ': out += "\\s"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (c < 0x20 || c == 0x7F) {
                    static constexpr char kHex[] = "0123456789abcdef";
                    out += "\\x";
                    out.push_back(kHex[c >> 4]);
                    out.push_back(kHex[c & 0xF]);
                } else {
                    out.push_back(static_cast<char>(c));
                }
        }
    }
    return out;
}

std::string unescape_token(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\') {
            out.push_back(s[i]);
            continue;
        }
        if (++i >= s.size()) throw Error(ErrorKind::Corrupt, "dangling escape in token");
        switch (s[i]) {
            case '\\': out.push_back('\\'); break;
            case 's': out.push_back(' '); break;
            case 'n': out.push_back('\n'); break;
            case 't': out.push_back('\t'); break;
            case 'r': out.push_back('\r'); break;
            case 'x': {
                if (i + 2 >= s.size()) throw Error(ErrorKind::Corrupt, "bad \\x escape");
                out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
                i += 2;
                break;
            }
            default: throw Error(ErrorKind::Corrupt, "unknown escape in token");
        }
    }
    return out;
}

}  // namespace

const char *to_string(BpeMode mode) { return mode == BpeMode::CharLevel ? "char-level" : "byte-level"; }

BpeMode parse_bpe_mode(std::string_view name) {
    if (name == "char-level") return BpeMode::CharLevel;
    if (name == "byte-level") return BpeMode::ByteLevel;
    throw Error(ErrorKind::InvalidInput, "unknown tokenizer mode '" + std::string(name) + "'");
}

const std::string &byte_symbol(unsigned char b) { return byte_symbols()[b]; }

std::vector<std::string> pretokenize(std::string_view text, BpeMode mode) {
    std::vector<std::string> pieces;
    if (mode == BpeMode::CharLevel) {
        for (std::string_view w : utf8::split_whitespace(text)) {
            std::string piece(kWordMarker);
            piece.append(w);
            pieces.push_back(std::move(piece));
        }
        return pieces;
    }
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t ws_end = i;
        while (ws_end < text.size() && is_ascii_space(static_cast<unsigned char>(text[ws_end]))) ++ws_end;
        std::size_t word_end = ws_end;
        while (word_end < text.size() && !is_ascii_space(static_cast<unsigned char>(text[word_end]))) ++word_end;
        if (ws_end == word_end) {  // trailing whitespace
            pieces.emplace_back(text.substr(i, ws_end - i));
            break;
        }
        std::size_t word_start = ws_end;
        if (ws_end > i && text[ws_end - 1] == ' ') --word_start;
        if (word_start > i) pieces.emplace_back(text.substr(i, word_start - i));
        pieces.emplace_back(text.substr(word_start, word_end - word_start));
        i = word_end;
    }
    return pieces;
}

std::vector<std::string> compute_alphabet(const std::vector<std::string> &corpus, double coverage) {
    std::map<char32_t, std::uint64_t> counts;
    for (const auto &text : corpus) count_chars(utf8::decode_lossy(text), counts);
    return alphabet_from_counts(counts, coverage);
}

// ---------------------------------------------------------------------------

std::vector<std::string> BpeModel::default_specials(BpeMode mode) {
    if (mode == BpeMode::CharLevel) return {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
    return {"<s>", "</s>", "<pad>", "<unk>", "<mask>"};
}

std::int64_t BpeModel::id_of(std::string_view token) const {
    auto it = vocab_.find(std::string(token));
    return it == vocab_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

BpeModel BpeModel::assemble(BpeMode mode, double coverage, std::vector<std::string> alphabet,
                            std::vector<std::pair<std::string, std::string>> merges) {
    BpeModel m;
    m.mode_ = mode;
    m.coverage_ = coverage;
    m.specials_ = default_specials(mode);
    m.alphabet_ = std::move(alphabet);
    m.merges_ = std::move(merges);
    auto add = [&](const std::string &tok) {
        auto [it, inserted] = m.vocab_.try_emplace(tok, static_cast<std::uint32_t>(m.tokens_.size()));
        if (inserted) m.tokens_.push_back(tok);
        return it->second;
    };
    for (const auto &s : m.specials_) add(s);
    for (const auto &a : m.alphabet_) {
        if (m.vocab_.count(a)) throw Error(ErrorKind::Corrupt, "duplicate alphabet symbol '" + a + "'");
        add(a);
    }
    for (std::uint32_t rank = 0; rank < m.merges_.size(); ++rank) {
        const auto &[l, r] = m.merges_[rank];
        auto li = m.vocab_.find(l);
        auto ri = m.vocab_.find(r);
        if (li == m.vocab_.end() || ri == m.vocab_.end() || li->second < m.specials_.size() ||
            ri->second < m.specials_.size()) {
            throw Error(ErrorKind::Corrupt, "merge " + std::to_string(rank) + " refers to an unknown token");
        }
        const std::uint64_t key = pair_key(li->second, ri->second);
        const std::uint32_t merged = add(l + r);
        m.merge_rank_.try_emplace(key, rank, merged);
    }
    if (mode == BpeMode::ByteLevel) {
        for (int b = 0; b < 256; ++b) m.symbol_byte_.emplace(byte_symbol(static_cast<unsigned char>(b)), b);
    }
    auto special = [&](std::size_t i) { return static_cast<std::uint32_t>(i); };
    if (mode == BpeMode::CharLevel) {
        m.pad_ = special(0), m.unk_ = special(1), m.begin_ = special(2), m.sep_ = special(3), m.mask_ = special(4);
    } else {
        m.begin_ = special(0), m.sep_ = special(1), m.pad_ = special(2), m.unk_ = special(3), m.mask_ = special(4);
    }
    return m;
}

void BpeModel::encode_piece(std::string_view piece, std::vector<std::uint32_t> &out) const {
    std::vector<std::uint32_t> sym;
    if (mode_ == BpeMode::ByteLevel) {
        for (unsigned char b : piece) sym.push_back(vocab_.at(byte_symbol(b)));
    } else {
        std::size_t pos = 0;
        std::string buf;
        while (pos < piece.size()) {
            const std::size_t start = pos;
            utf8::next(piece, pos);
            buf.assign(piece.substr(start, pos - start));
            auto it = vocab_.find(buf);
            // only alphabet symbols may start a char-level piece
            sym.push_back(it != vocab_.end() && it->second >= specials_.size() &&
                                  it->second < specials_.size() + alphabet_.size()
                              ? it->second
                              : unk_);
        }
    }
    // lowest-ranked adjacent pair first, all its occurrences left to right
    while (sym.size() > 1) {
        std::uint32_t best_rank = UINT32_MAX;
        std::uint32_t best_left = 0, best_right = 0, merged = 0;
        for (std::size_t i = 0; i + 1 < sym.size(); ++i) {
            auto it = merge_rank_.find(pair_key(sym[i], sym[i + 1]));
            if (it != merge_rank_.end() && it->second.first < best_rank) {
                best_rank = it->second.first;
                best_left = sym[i];
                best_right = sym[i + 1];
                merged = it->second.second;
            }
        }
        if (best_rank == UINT32_MAX) break;
        std::vector<std::uint32_t> next;
        next.reserve(sym.size());
        for (std::size_t i = 0; i < sym.size();) {
            if (i + 1 < sym.size() && sym[i] == best_left && sym[i + 1] == best_right) {
                next.push_back(merged);
                i += 2;
            } else {
                next.push_back(sym[i++]);
            }
        }
        sym.swap(next);
    }
    out.insert(out.end(), sym.begin(), sym.end());
}

TokenSequence BpeModel::encode(std::string_view text) const {
    TokenSequence seq;
    const std::string valid = utf8::is_valid(text) || mode_ == BpeMode::ByteLevel ? std::string(text)
                                                                                   : utf8::decode_lossy(text);
    for (const auto &piece : pretokenize(valid, mode_)) {
        const std::size_t before = seq.ids.size();
        encode_piece(piece, seq.ids);
        bool starts_word = true;
        if (mode_ == BpeMode::ByteLevel) {
            starts_word = std::any_of(piece.begin(), piece.end(),
                                      [](char c) { return !is_ascii_space(static_cast<unsigned char>(c)); });
        }
        for (std::size_t i = before; i < seq.ids.size(); ++i) seq.word_start.push_back(starts_word && i == before);
    }
    return seq;
}

std::string BpeModel::decode(const std::vector<std::uint32_t> &ids) const {
    std::string joined;
    for (auto id : ids) {
        if (id >= tokens_.size()) {
            throw Error(ErrorKind::InvalidInput,
                        "token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(tokens_.size()));
        }
        if (is_special(id)) continue;
        joined += tokens_[id];
    }
    std::string out;
    if (mode_ == BpeMode::ByteLevel) {
        std::size_t pos = 0;
        while (pos < joined.size()) {
            const std::size_t start = pos;
            utf8::next(joined, pos);
            out.push_back(static_cast<char>(symbol_byte_.at(joined.substr(start, pos - start))));
        }
        return out;
    }
    std::size_t pos = 0;
    while (pos < joined.size()) {
        const std::size_t hit = joined.find(kWordMarker, pos);
        if (hit == std::string::npos) {
            out.append(joined, pos, std::string::npos);
            break;
        }
        out.append(joined, pos, hit - pos);
        if (!out.empty()) out.push_back(' ');
        pos = hit + kWordMarker.size();
    }
    return out;
}

std::string BpeModel::serialize() const {
    std::ostringstream out;
    char cov[64];
    std::snprintf(cov, sizeof(cov), "%.17g", coverage_);
    out << "c5-bpe v1\n"
        << "mode " << to_string(mode_) << "\n"
        << "coverage " << cov << "\n"
        << "specials " << specials_.size() << "\n"
        << "alphabet " << alphabet_.size() << "\n"
        << "merges " << merges_.size() << "\n";
    for (const auto &s : specials_) out << escape_token(s) << '\n';
    for (const auto &a : alphabet_) out << escape_token(a) << '\n';
    for (const auto &[l, r] : merges_) out << escape_token(l) << ' ' << escape_token(r) << '\n';
    return out.str();
}

BpeModel BpeModel::parse(std::string_view text) {
    std::size_t pos = 0;
    auto line = [&]() -> std::string_view {
        if (pos >= text.size()) throw Error(ErrorKind::Corrupt, "tokenizer model truncated");
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto l = text.substr(pos, nl - pos);
        pos = nl + 1;
        return l;
    };
    auto field = [&](std::string_view name) {
        auto l = line();
        if (l.rfind(name, 0) != 0 || l.size() <= name.size() + 1) {
            throw Error(ErrorKind::Corrupt, "tokenizer model: expected '" + std::string(name) + "'");
        }
        return std::string(l.substr(name.size() + 1));
    };
    if (line() != "c5-bpe v1") throw Error(ErrorKind::Corrupt, "tokenizer model: bad header");
    const BpeMode mode = parse_bpe_mode(field("mode"));
    const double coverage = std::stod(field("coverage"));
    const auto n_specials = std::stoull(field("specials"));
    const auto n_alphabet = std::stoull(field("alphabet"));
    const auto n_merges = std::stoull(field("merges"));
    std::vector<std::string> specials;
    for (std::size_t i = 0; i < n_specials; ++i) specials.push_back(unescape_token(line()));
    if (specials != default_specials(mode)) throw Error(ErrorKind::Corrupt, "tokenizer model: unexpected specials");
    std::vector<std::string> alphabet;
    for (std::size_t i = 0; i < n_alphabet; ++i) alphabet.push_back(unescape_token(line()));
    std::vector<std::pair<std::string, std::string>> merges;
    for (std::size_t i = 0; i < n_merges; ++i) {
        auto l = line();
        auto sp = l.find(' ');
        if (sp == std::string_view::npos) throw Error(ErrorKind::Corrupt, "tokenizer model: bad merge line");
        merges.emplace_back(unescape_token(l.substr(0, sp)), unescape_token(l.substr(sp + 1)));
    }
    return assemble(mode, coverage, std::move(alphabet), std::move(merges));
}

void BpeModel::save(const std::filesystem::path &path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Storage, "cannot write " + path.string());
    out << serialize();
}

BpeModel BpeModel::load(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::NotFound, "cannot open tokenizer model " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

// ---------------------------------------------------------------------------

BpeTrainer::BpeTrainer(BpeTrainOptions options) : options_(options) {
    if (options_.mode == BpeMode::ByteLevel) options_.coverage = 1.0;
    if (!(options_.coverage > 0.0 && options_.coverage <= 1.0)) {
        throw Error(ErrorKind::InvalidInput, "coverage must be in (0, 1]");
    }
}

void BpeTrainer::add_text(std::string_view raw) {
    const std::string text = options_.mode == BpeMode::ByteLevel || utf8::is_valid(raw) ? std::string(raw)
                                                                                         : utf8::decode_lossy(raw);
    for (auto &piece : pretokenize(text, options_.mode)) ++words_[std::move(piece)];
    if (options_.mode == BpeMode::CharLevel) count_chars(text, char_counts_);
}

namespace {

struct Word {
    std::vector<std::uint32_t> sym;
    std::uint64_t count = 0;
};

struct Candidate {
    std::uint64_t count;
    std::uint64_t pair;
};

}  // namespace

BpeModel BpeTrainer::train() const {
    if (words_.empty()) throw Error(ErrorKind::InvalidInput, "empty corpus");
    const std::size_t n_specials = BpeModel::default_specials(options_.mode).size();

    std::vector<std::string> alphabet;
    if (options_.mode == BpeMode::ByteLevel) {
        for (int b = 0; b < 256; ++b) alphabet.push_back(byte_symbol(static_cast<unsigned char>(b)));
    } else {
        alphabet.emplace_back(kWordMarker);
        for (auto &a : alphabet_from_counts(char_counts_, options_.coverage)) {
            if (a != kWordMarker) alphabet.push_back(std::move(a));
        }
    }
    if (options_.vocab_size <= n_specials + alphabet.size()) {
        throw Error(ErrorKind::InvalidInput, "vocab_size " + std::to_string(options_.vocab_size) +
                                                 " leaves no room for merges (specials + alphabet = " +
                                                 std::to_string(n_specials + alphabet.size()) + ")");
    }

    // training-local symbol table; ids here exclude the specials
    std::vector<std::string> tokens = alphabet;
    std::unordered_map<std::string, std::uint32_t> index;
    for (std::uint32_t i = 0; i < tokens.size(); ++i) index.emplace(tokens[i], i);

    std::vector<Word> words;
    words.reserve(words_.size());
    for (const auto &[piece, count] : words_) {
        Word w;
        w.count = count;
        if (options_.mode == BpeMode::ByteLevel) {
            for (unsigned char b : piece) w.sym.push_back(b);
        } else {
            std::size_t pos = 0;
            while (pos < piece.size()) {
                const std::size_t start = pos;
                utf8::next(piece, pos);
                auto it = index.find(std::string(piece.substr(start, pos - start)));
                w.sym.push_back(it == index.end() ? kBarrier : it->second);
            }
        }
        words.push_back(std::move(w));
    }

    std::unordered_map<std::uint64_t, std::int64_t> counts;
    std::unordered_map<std::uint64_t, std::unordered_set<std::uint32_t>> where;
    auto for_pairs = [](const std::vector<std::uint32_t> &sym, auto &&fn) {
        for (std::size_t i = 0; i + 1 < sym.size(); ++i) {
            if (sym[i] != kBarrier && sym[i + 1] != kBarrier) fn(pair_key(sym[i], sym[i + 1]));
        }
    };
    for (std::uint32_t wi = 0; wi < words.size(); ++wi) {
        for_pairs(words[wi].sym, [&](std::uint64_t p) {
            counts[p] += static_cast<std::int64_t>(words[wi].count);
            where[p].insert(wi);
        });
    }

    // max count first; among equal counts the lexicographically smaller
    // (left, right) token pair
    auto worse = [&](const Candidate &a, const Candidate &b) {
        if (a.count != b.count) return a.count < b.count;
        const std::string &al = tokens[a.pair >> 32], &bl = tokens[b.pair >> 32];
        if (al != bl) return al > bl;
        return tokens[a.pair & 0xFFFFFFFFu] > tokens[b.pair & 0xFFFFFFFFu];
    };
    std::priority_queue<Candidate, std::vector<Candidate>, decltype(worse)> heap(worse);
    for (const auto &[p, c] : counts) heap.push({static_cast<std::uint64_t>(c), p});

    std::vector<std::pair<std::string, std::string>> merges;
    std::size_t vocab = n_specials + tokens.size();
    std::unordered_map<std::uint64_t, std::int64_t> delta;

    while (vocab < options_.vocab_size && !heap.empty()) {
        const Candidate top = heap.top();
        heap.pop();
        auto cit = counts.find(top.pair);
        if (cit == counts.end() || static_cast<std::uint64_t>(cit->second) != top.count) continue;  // stale
        if (top.count < 2) break;

        const auto left = static_cast<std::uint32_t>(top.pair >> 32);
        const auto right = static_cast<std::uint32_t>(top.pair & 0xFFFFFFFFu);
        std::string merged_str = tokens[left] + tokens[right];
        merges.emplace_back(tokens[left], tokens[right]);
        std::uint32_t merged;
        if (auto it = index.find(merged_str); it != index.end()) {
            merged = it->second;
        } else {
            merged = static_cast<std::uint32_t>(tokens.size());
            tokens.push_back(merged_str);
            index.emplace(std::move(merged_str), merged);
            ++vocab;
        }

        delta.clear();
        const auto affected = std::move(where[top.pair]);
        where.erase(top.pair);
        std::vector<std::uint32_t> ordered(affected.begin(), affected.end());
        std::sort(ordered.begin(), ordered.end());
        for (std::uint32_t wi : ordered) {
            Word &w = words[wi];
            bool present = false;
            for (std::size_t i = 0; i + 1 < w.sym.size(); ++i) {
                if (w.sym[i] == left && w.sym[i + 1] == right) {
                    present = true;
                    break;
                }
            }
            if (!present) continue;
            const auto c = static_cast<std::int64_t>(w.count);
            for_pairs(w.sym, [&](std::uint64_t p) { delta[p] -= c; });
            std::vector<std::uint32_t> next;
            next.reserve(w.sym.size());
            for (std::size_t i = 0; i < w.sym.size();) {
                if (i + 1 < w.sym.size() && w.sym[i] == left && w.sym[i + 1] == right) {
                    next.push_back(merged);
                    i += 2;
                } else {
                    next.push_back(w.sym[i++]);
                }
            }
            w.sym.swap(next);
            for_pairs(w.sym, [&](std::uint64_t p) {
                delta[p] += c;
                where[p].insert(wi);
            });
        }
        for (const auto &[p, d] : delta) {
            if (d == 0) continue;
            auto &c = counts[p];
            c += d;
            if (c <= 0) {
                counts.erase(p);
            } else {
                heap.push({static_cast<std::uint64_t>(c), p});
            }
        }
    }

    return BpeModel::assemble(options_.mode, options_.coverage, std::move(alphabet), std::move(merges));
}

BpeModel train_bpe(const std::vector<std::string> &corpus, const BpeTrainOptions &options) {
    BpeTrainer trainer(options);
    for (const auto &text : corpus) trainer.add_text(text);
    return trainer.train();
}

}  // namespace c5
