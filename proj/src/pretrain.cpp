#include "c5/pretrain.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>

#include "c5/error.hpp"
#include "c5/utf8.hpp"

namespace c5 {

int PretrainConfig::effective_max_predictions() const {
    if (max_predictions >= 0) return max_predictions;
    return static_cast<int>(std::ceil(mask_prob * seq_len - 1e-9));
}

void PretrainConfig::validate() const {
    if (seq_len < 8) throw Error(ErrorKind::InvalidInput, "seq_len must be at least 8");
    if (!(mask_prob > 0.0 && mask_prob < 1.0)) throw Error(ErrorKind::InvalidInput, "mask_prob must be in (0, 1)");
    if (dup_factor < 1) throw Error(ErrorKind::InvalidInput, "dup_factor must be >= 1");
    if (effective_max_predictions() > seq_len) throw Error(ErrorKind::InvalidInput, "max_predictions exceeds seq_len");
    if (!(short_seq_prob >= 0.0 && short_seq_prob <= 1.0)) {
        throw Error(ErrorKind::InvalidInput, "short_seq_prob must be in [0, 1]");
    }
}

PretrainConfig PretrainConfig::from_config(const Config &cfg) {
    PretrainConfig c;
    c.seq_len = static_cast<int>(cfg.get_int("prep.seq_len", c.seq_len));
    c.dup_factor = static_cast<int>(cfg.get_int("prep.dup_factor", c.dup_factor));
    c.mask_prob = cfg.get_double("prep.mask_prob", c.mask_prob);
    c.max_predictions = static_cast<int>(cfg.get_int("prep.max_predictions", c.max_predictions));
    c.short_seq_prob = cfg.get_double("prep.short_seq_prob", c.short_seq_prob);
    c.nsp_enabled = cfg.get_bool("prep.nsp", c.nsp_enabled);
    c.cross_documents = cfg.get_bool("prep.cross_documents", c.cross_documents);
    c.rng_seed = static_cast<std::uint64_t>(cfg.get_int("prep.seed", static_cast<std::int64_t>(c.rng_seed)));
    c.validate();
    return c;
}

std::vector<std::string> segment_sentences(const CleanDocument &doc, std::u32string_view terminal_marks) {
    std::vector<std::string> out;
    for (const auto &line : doc.lines) {
        const char *sentence_begin = nullptr;
        const char *last_end = nullptr;
        for (std::string_view token : utf8::split_whitespace(line)) {
            if (!sentence_begin) sentence_begin = token.data();
            last_end = token.data() + token.size();
            std::size_t p = token.size() - 1;
            while (p > 0 && (static_cast<unsigned char>(token[p]) & 0xC0) == 0x80) --p;
            if (terminal_marks.find(utf8::next(token, p)) != std::u32string_view::npos) {
                out.emplace_back(sentence_begin, last_end);
                sentence_begin = nullptr;
            }
        }
        if (sentence_begin) out.emplace_back(sentence_begin, last_end);
    }
    return out;
}

std::vector<TokenizedDocument> tokenize_documents(const std::vector<CleanDocument> &docs, const BpeModel &model) {
    std::vector<TokenizedDocument> out;
    out.reserve(docs.size());
    for (const auto &d : docs) {
        TokenizedDocument td;
        for (const auto &s : segment_sentences(d)) {
            TokenSequence seq = model.encode(s);
            if (!seq.ids.empty()) td.sentences.push_back(std::move(seq));
        }
        out.push_back(std::move(td));
    }
    return out;
}

namespace {

void append(TokenSequence &into, const TokenSequence &from) {
    into.ids.insert(into.ids.end(), from.ids.begin(), from.ids.end());
    into.word_start.insert(into.word_start.end(), from.word_start.begin(), from.word_start.end());
}

TokenSequence slice(const TokenSequence &s, std::size_t begin, std::size_t end) {
    TokenSequence out;
    out.ids.assign(s.ids.begin() + static_cast<std::ptrdiff_t>(begin), s.ids.begin() + static_cast<std::ptrdiff_t>(end));
    out.word_start.assign(s.word_start.begin() + static_cast<std::ptrdiff_t>(begin),
                          s.word_start.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

void truncate_pair(TokenSequence &a, TokenSequence &b, std::size_t max_tokens, Rng &rng) {
    while (a.ids.size() + b.ids.size() > max_tokens) {
        TokenSequence &t = a.ids.size() > b.ids.size() ? a : b;
        if (rng.bernoulli(0.5)) {
            t.ids.erase(t.ids.begin());
            t.word_start.erase(t.word_start.begin());
        } else {
            t.ids.pop_back();
            t.word_start.pop_back();
        }
    }
}

}  // namespace

std::vector<NspPair> build_nsp_pairs(const std::vector<TokenizedDocument> &corpus, std::size_t doc_index,
                                     const PretrainConfig &config, Rng &rng) {
    std::vector<std::size_t> others;
    for (std::size_t d = 0; d < corpus.size(); ++d) {
        if (d != doc_index && !corpus[d].sentences.empty()) others.push_back(d);
    }
    if (others.empty()) {
        throw Error(ErrorKind::Unsupported, "negative next-sentence sampling needs a second non-empty document");
    }
    const auto &sentences = corpus.at(doc_index).sentences;
    const std::size_t max_tokens = static_cast<std::size_t>(config.seq_len) - 3;
    std::size_t target = max_tokens;
    if (rng.bernoulli(config.short_seq_prob)) target = static_cast<std::size_t>(rng.between(2, static_cast<std::int64_t>(max_tokens)));

    std::vector<NspPair> pairs;
    std::vector<const TokenSequence *> chunk;
    std::size_t chunk_len = 0;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        chunk.push_back(&sentences[i]);
        chunk_len += sentences[i].ids.size();
        if (i + 1 != sentences.size() && chunk_len < target) continue;

        NspPair pair;
        pair.is_next = rng.bernoulli(0.5);
        std::size_t a_end = 1;
        if (chunk.size() >= 2) a_end = static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(chunk.size()) - 1));
        for (std::size_t j = 0; j < a_end; ++j) append(pair.a, *chunk[j]);

        if (chunk.size() == 1 && pair.is_next) {
            // a lone segment is split inside so positives stay available
            const TokenSequence &only = *chunk[0];
            if (only.ids.size() >= 2) {
                const auto cut = static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(only.ids.size()) - 1));
                pair.a = slice(only, 0, cut);
                pair.b = slice(only, cut, only.ids.size());
            } else {
                pair.is_next = false;
            }
        }
        if (!pair.is_next) {
            const std::size_t target_b = target > pair.a.ids.size() ? target - pair.a.ids.size() : 1;
            const auto &other = corpus[others[rng.below(others.size())]].sentences;
            for (std::size_t j = rng.below(other.size()); j < other.size(); ++j) {
                append(pair.b, other[j]);
                if (pair.b.ids.size() >= target_b) break;
            }
            // the unused tail of the chunk goes back to the pool
            i -= chunk.size() - a_end;
        } else if (chunk.size() >= 2) {
            for (std::size_t j = a_end; j < chunk.size(); ++j) append(pair.b, *chunk[j]);
        }
        truncate_pair(pair.a, pair.b, max_tokens, rng);
        if (!pair.a.ids.empty() && !pair.b.ids.empty()) pairs.push_back(std::move(pair));

        chunk.clear();
        chunk_len = 0;
        target = max_tokens;
        if (rng.bernoulli(config.short_seq_prob)) target = static_cast<std::size_t>(rng.between(2, static_cast<std::int64_t>(max_tokens)));
    }
    return pairs;
}

MaskedSequence apply_whole_word_masking(const TokenSequence &tokens, const BpeModel &model,
                                        const PretrainConfig &config, Rng &rng) {
    MaskedSequence out;
    out.ids = tokens.ids;

    std::vector<std::vector<std::uint32_t>> words;
    bool after_special = true;
    std::size_t maskable = 0;
    for (std::uint32_t i = 0; i < tokens.ids.size(); ++i) {
        if (model.is_special(tokens.ids[i])) {
            after_special = true;
            continue;
        }
        ++maskable;
        if (after_special || tokens.word_start[i] || words.empty()) {
            words.emplace_back();
        }
        words.back().push_back(i);
        after_special = false;
    }

    const auto budget = static_cast<std::size_t>(std::min<long>(
        config.effective_max_predictions(),
        std::max<long>(1, std::lround(static_cast<double>(maskable) * config.mask_prob))));
    if (maskable == 0 || budget == 0) return out;

    rng.shuffle(words);
    const auto first_regular = static_cast<std::uint32_t>(model.special_tokens().size());
    const std::uint64_t regular = model.size() - first_regular;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> masked;  // position, label
    for (const auto &word : words) {
        if (masked.size() >= budget) break;
        if (masked.size() + word.size() > budget) continue;
        const double r = rng.uniform();
        for (std::uint32_t pos : word) {
            masked.emplace_back(pos, tokens.ids[pos]);
            if (r < 0.8) {
                out.ids[pos] = model.mask_id();
            } else if (r >= 0.9) {
                out.ids[pos] = first_regular + static_cast<std::uint32_t>(rng.below(regular));
            }
        }
    }
    std::sort(masked.begin(), masked.end());
    for (const auto &[pos, label] : masked) {
        out.positions.push_back(pos);
        out.labels.push_back(label);
    }
    return out;
}

namespace {

PretrainInstance finish_instance(const TokenSequence &seq, const std::vector<std::uint8_t> &segments,
                                 std::optional<bool> is_next, const BpeModel &model, const PretrainConfig &config,
                                 Rng &rng) {
    MaskedSequence m = apply_whole_word_masking(seq, model, config, rng);
    PretrainInstance inst;
    inst.token_ids = std::move(m.ids);
    inst.segment_ids = segments;
    inst.token_ids.resize(static_cast<std::size_t>(config.seq_len), model.pad_id());
    inst.segment_ids.resize(static_cast<std::size_t>(config.seq_len), 0);
    inst.masked_positions = std::move(m.positions);
    inst.masked_labels = std::move(m.labels);
    inst.is_next = is_next;
    return inst;
}

std::vector<PretrainInstance> nsp_document(const std::vector<TokenizedDocument> &corpus, std::size_t d,
                                           const BpeModel &model, const PretrainConfig &config) {
    std::vector<PretrainInstance> out;
    if (corpus[d].sentences.empty()) return out;
    Rng pair_rng = Rng::derive(Rng::derive(config.rng_seed, d).next_u64(), 0);
    Rng mask_rng = Rng::derive(Rng::derive(config.rng_seed, d).next_u64(), 1);
    for (const auto &pair : build_nsp_pairs(corpus, d, config, pair_rng)) {
        TokenSequence seq;
        seq.ids.push_back(model.begin_id());
        seq.word_start.push_back(false);
        append(seq, pair.a);
        seq.ids.push_back(model.sep_id());
        seq.word_start.push_back(false);
        const std::size_t first_b = seq.ids.size();
        append(seq, pair.b);
        seq.ids.push_back(model.sep_id());
        seq.word_start.push_back(false);
        std::vector<std::uint8_t> segments(seq.ids.size(), 0);
        std::fill(segments.begin() + static_cast<std::ptrdiff_t>(first_b), segments.end(), 1);
        for (int dup = 0; dup < config.dup_factor; ++dup) {
            out.push_back(finish_instance(seq, segments, pair.is_next, model, config, mask_rng));
        }
    }
    return out;
}

std::vector<PretrainInstance> pack_stream(const TokenSequence &stream, std::uint64_t ordinal, const BpeModel &model,
                                          const PretrainConfig &config) {
    std::vector<PretrainInstance> out;
    const std::size_t window = static_cast<std::size_t>(config.seq_len) - 2;
    Rng mask_rng = Rng::derive(Rng::derive(config.rng_seed, ordinal).next_u64(), 1);
    for (std::size_t start = 0; start < stream.ids.size(); start += window) {
        const std::size_t end = std::min(stream.ids.size(), start + window);
        TokenSequence seq;
        seq.ids.push_back(model.begin_id());
        seq.word_start.push_back(false);
        append(seq, slice(stream, start, end));
        seq.ids.push_back(model.sep_id());
        seq.word_start.push_back(false);
        const std::vector<std::uint8_t> segments(seq.ids.size(), 0);
        for (int dup = 0; dup < config.dup_factor; ++dup) {
            out.push_back(finish_instance(seq, segments, std::nullopt, model, config, mask_rng));
        }
    }
    return out;
}

}  // namespace

void generate_instances(const std::vector<TokenizedDocument> &corpus, const BpeModel &model,
                        const PretrainConfig &config, const InstanceSink &sink, std::size_t workers) {
    config.validate();
    workers = std::max<std::size_t>(1, workers);

    if (!config.nsp_enabled && config.cross_documents) {
        TokenSequence stream;
        for (const auto &doc : corpus) {
            if (doc.sentences.empty()) continue;
            if (!stream.ids.empty()) {
                stream.ids.push_back(model.sep_id());
                stream.word_start.push_back(false);
            }
            for (const auto &s : doc.sentences) append(stream, s);
        }
        for (auto &inst : pack_stream(stream, 0, model, config)) sink(std::move(inst));
        return;
    }

    auto per_document = [&](std::size_t d) {
        if (config.nsp_enabled) return nsp_document(corpus, d, model, config);
        TokenSequence stream;
        for (const auto &s : corpus[d].sentences) append(stream, s);
        return pack_stream(stream, d, model, config);
    };

    // documents are independent; emit in ordinal order
    const std::size_t block = std::max<std::size_t>(workers * 8, 1);
    for (std::size_t begin = 0; begin < corpus.size(); begin += block) {
        const std::size_t end = std::min(corpus.size(), begin + block);
        std::vector<std::vector<PretrainInstance>> results(end - begin);
        if (workers == 1) {
            for (std::size_t d = begin; d < end; ++d) results[d - begin] = per_document(d);
        } else {
            std::vector<std::future<void>> jobs;
            for (std::size_t w = 0; w < workers; ++w) {
                jobs.push_back(std::async(std::launch::async, [&, w] {
                    for (std::size_t d = begin + w; d < end; d += workers) results[d - begin] = per_document(d);
                }));
            }
            for (auto &j : jobs) j.get();
        }
        for (auto &r : results) {
            for (auto &inst : r) sink(std::move(inst));
        }
    }
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'C', '5', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::string &out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string &in, std::size_t &pos) {
    if (pos + 4 > in.size()) throw Error(ErrorKind::Corrupt, "instance file truncated");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)]);
    pos += 4;
    return v;
}

}  // namespace

InstanceWriter::InstanceWriter(const std::filesystem::path &path, int seq_len)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(ErrorKind::Storage, "cannot write " + path.string());
    crc_ = static_cast<std::uint32_t>(crc32(0L, Z_NULL, 0));
    std::string header(kMagic, 4);
    put_u32(header, kFormatVersion);
    put_u32(header, static_cast<std::uint32_t>(seq_len));
    write(header);
}

void InstanceWriter::write(const std::string &bytes) {
    out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    crc_ = static_cast<std::uint32_t>(
        crc32(crc_, reinterpret_cast<const Bytef *>(bytes.data()), static_cast<uInt>(bytes.size())));
}

void InstanceWriter::add(const PretrainInstance &inst) {
    std::string payload;
    put_u32(payload, static_cast<std::uint32_t>(inst.token_ids.size()));
    for (auto id : inst.token_ids) put_u32(payload, id);
    for (auto s : inst.segment_ids) payload.push_back(static_cast<char>(s));
    put_u32(payload, static_cast<std::uint32_t>(inst.masked_positions.size()));
    for (auto p : inst.masked_positions) put_u32(payload, p);
    for (auto l : inst.masked_labels) put_u32(payload, l);
    payload.push_back(static_cast<char>(inst.is_next ? (*inst.is_next ? 1 : 0) : 2));
    std::string record;
    put_u32(record, static_cast<std::uint32_t>(payload.size()));
    record += payload;
    write(record);
    ++count_;
    masked_ += inst.masked_positions.size();
}

std::uint32_t InstanceWriter::finish() {
    out_.close();
    if (!out_) throw Error(ErrorKind::Storage, "write failed: " + path_.string());
    return crc_;
}

std::vector<PretrainInstance> read_instances(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string data = buf.str();
    if (data.size() < 12 || data.compare(0, 4, kMagic, 4) != 0) throw Error(ErrorKind::Corrupt, "not an instance file");
    std::size_t pos = 4;
    if (get_u32(data, pos) != kFormatVersion) throw Error(ErrorKind::Corrupt, "unsupported instance file version");
    const std::uint32_t seq_len = get_u32(data, pos);
    std::vector<PretrainInstance> out;
    while (pos < data.size()) {
        const std::uint32_t len = get_u32(data, pos);
        const std::size_t end = pos + len;
        if (end > data.size()) throw Error(ErrorKind::Corrupt, "instance record truncated");
        PretrainInstance inst;
        const std::uint32_t n = get_u32(data, pos);
        if (n != seq_len) throw Error(ErrorKind::Corrupt, "instance length differs from header");
        for (std::uint32_t i = 0; i < n; ++i) inst.token_ids.push_back(get_u32(data, pos));
        for (std::uint32_t i = 0; i < n; ++i) inst.segment_ids.push_back(static_cast<std::uint8_t>(data.at(pos++)));
        const std::uint32_t m = get_u32(data, pos);
        for (std::uint32_t i = 0; i < m; ++i) inst.masked_positions.push_back(get_u32(data, pos));
        for (std::uint32_t i = 0; i < m; ++i) inst.masked_labels.push_back(get_u32(data, pos));
        const auto flag = static_cast<unsigned char>(data.at(pos++));
        if (flag <= 1) inst.is_next = flag == 1;
        if (pos != end) throw Error(ErrorKind::Corrupt, "instance record length mismatch");
        out.push_back(std::move(inst));
    }
    return out;
}

std::string debug_string(const PretrainInstance &inst, const BpeModel &model) {
    std::string out = "is_next=";
    out += inst.is_next ? (*inst.is_next ? "1" : "0") : "-";
    out += " tokens=";
    for (std::size_t i = 0; i < inst.token_ids.size(); ++i) {
        if (inst.token_ids[i] == model.pad_id()) break;
        if (i) out += ' ';
        out += model.token(inst.token_ids[i]);
    }
    out += " segments=";
    for (auto s : inst.segment_ids) out.push_back(static_cast<char>('0' + s));
    out += " masked=";
    for (std::size_t i = 0; i < inst.masked_positions.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(inst.masked_positions[i]) + ":" + model.token(inst.masked_labels[i]);
    }
    return out;
}

}  // namespace c5
