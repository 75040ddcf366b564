#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "c5/bpe.hpp"
#include "c5/error.hpp"
#include "c5/utf8.hpp"
#include "bpe_oracle.hpp"
#include "support.hpp"

namespace {

using namespace c5;
using namespace c5test::bpe_oracle;

// ---------------------------------------------------------------------------

TEST(ComputeAlphabet, Examples) {
    EXPECT_EQ(compute_alphabet({"aaab"}, 0.75), (std::vector<std::string>{"a"}));
    EXPECT_EQ(compute_alphabet({"aabc"}, 0.75), (std::vector<std::string>{"a", "b"}));
    auto full = compute_alphabet({"zebra ábc"}, 1.0);
    std::sort(full.begin(), full.end());
    EXPECT_EQ(full, (std::vector<std::string>{"a", "b", "c", "e", "r", "z", "á"}));
    try {
        compute_alphabet({"", "  "}, 1.0);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
    }
}

TEST(TrainBpe, FirstMergeOnLowCorpus) {
    BpeTrainOptions o;
    o.mode = BpeMode::CharLevel;
    o.coverage = 1.0;
    const auto alphabet_size = 1 + compute_alphabet({"low low low lower lowest"}, 1.0).size();
    o.vocab_size = 5 + alphabet_size + 4;
    const auto m = train_bpe({"low low low lower lowest"}, o);
    ASSERT_EQ(m.merges().size(), 4u);
    EXPECT_EQ(m.merges()[0], (std::pair<std::string, std::string>{"l", "o"}));
    EXPECT_EQ(m.size(), o.vocab_size);
}

TEST(TrainBpe, SingleSymbolCorpusHasNoMerges) {
    BpeTrainOptions o;
    o.vocab_size = 100;
    const auto m = train_bpe({"a"}, o);
    EXPECT_TRUE(m.merges().empty());
    // specials, the word marker and "a"
    EXPECT_EQ(m.size(), 5u + 2u);
    EXPECT_GE(m.id_of("a"), 5);
}

TEST(TrainBpe, VocabTooSmallOrEmptyCorpus) {
    BpeTrainOptions o;
    o.vocab_size = 5;
    try {
        train_bpe({"abc abc"}, o);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
    }
    o.vocab_size = 300;
    EXPECT_THROW(train_bpe({""}, o), Error);
    o.mode = BpeMode::ByteLevel;
    o.vocab_size = 261;
    EXPECT_THROW(train_bpe({"abc"}, o), Error);
}

TEST(TrainBpe, MatchesBruteForceTrainer) {
    std::mt19937_64 rng(31);
    for (int round = 0; round < 12; ++round) {
        const BpeMode mode = round % 2 ? BpeMode::ByteLevel : BpeMode::CharLevel;
        const double coverage = mode == BpeMode::CharLevel && round % 4 == 2 ? 0.9 : 1.0;
        std::vector<std::string> corpus = {random_corpus_text(rng, 400 + rng() % 600),
                                           random_corpus_text(rng, 200)};
        BpeTrainOptions o;
        o.mode = mode;
        o.coverage = coverage;
        o.vocab_size = mode == BpeMode::ByteLevel ? 300 + rng() % 100 : 60 + rng() % 200;
        const auto model = train_bpe(corpus, o);
        const auto oracle = oracle_train(corpus, o.vocab_size, mode, coverage);
        EXPECT_EQ(model.merges(), oracle.merges) << "round " << round;
    }
}

TEST(Encode, MatchesMergeOrderApplication) {
    std::mt19937_64 rng(32);
    for (const BpeMode mode : {BpeMode::CharLevel, BpeMode::ByteLevel}) {
        BpeTrainOptions o;
        o.mode = mode;
        o.vocab_size = mode == BpeMode::ByteLevel ? 400 : 150;
        const auto model = train_bpe({random_corpus_text(rng, 3000)}, o);
        for (int i = 0; i < 100; ++i) {
            const std::string text = random_corpus_text(rng, 60) + (i % 5 == 0 ? " qx€" : "");
            std::vector<std::uint32_t> expected;
            for (const auto &piece : oracle_pieces(text, mode)) {
                for (const auto &tok : oracle_encode_piece(model, piece)) {
                    expected.push_back(static_cast<std::uint32_t>(model.id_of(tok)));
                }
            }
            const auto seq = model.encode(text);
            EXPECT_EQ(seq.ids, expected) << text;
            EXPECT_EQ(seq.ids.size(), seq.word_start.size());
        }
    }
}

TEST(Encode, CharLevelRoundTripCanonicalizesWhitespace) {
    std::mt19937_64 rng(33);
    const std::string corpus = random_corpus_text(rng, 4000);
    BpeTrainOptions o;
    o.vocab_size = 200;
    const auto model = train_bpe({corpus}, o);
    std::size_t start = 0;
    while (start < corpus.size()) {
        auto nl = corpus.find('\n', start);
        if (nl == std::string::npos) nl = corpus.size();
        const std::string line = corpus.substr(start, nl - start);
        start = nl + 1;
        EXPECT_EQ(model.decode(model.encode(line).ids), utf8::collapse_whitespace(line));
    }
    EXPECT_EQ(model.decode(model.encode(corpus).ids), utf8::collapse_whitespace(corpus));
}

TEST(Encode, CharLevelUnknownCharacters) {
    BpeTrainOptions o;
    o.vocab_size = 40;
    const auto model = train_bpe({"abc abc abd"}, o);
    const auto seq = model.encode("abz");
    EXPECT_NE(std::find(seq.ids.begin(), seq.ids.end(), model.unk_id()), seq.ids.end());
}

TEST(Encode, WordStartFlags) {
    BpeTrainOptions o;
    o.vocab_size = 40;
    const auto model = train_bpe({"prší prší svítí slunce"}, o);
    const auto seq = model.encode("prší  svítí");
    std::size_t starts = std::count(seq.word_start.begin(), seq.word_start.end(), true);
    EXPECT_EQ(starts, 2u);
    EXPECT_TRUE(seq.word_start[0]);
    EXPECT_TRUE(model.encode("").ids.empty());
}

TEST(Encode, ByteLevelMultibyteRoundTrip) {
    BpeTrainOptions o;
    o.mode = BpeMode::ByteLevel;
    o.vocab_size = 320;
    const auto model = train_bpe({"Příliš žluťoučký kůň úpěl ďábelské ódy."}, o);
    const std::string text = "Žluťoučký kůň";
    const auto seq = model.encode(text);
    EXPECT_EQ(std::count(seq.ids.begin(), seq.ids.end(), model.unk_id()), 0);
    EXPECT_EQ(model.decode(seq.ids), text);
}

TEST(Encode, ByteLevelFuzzRoundTrip) {
    std::mt19937_64 rng(34);
    BpeTrainOptions o;
    o.mode = BpeMode::ByteLevel;
    o.vocab_size = 400;
    std::string corpus;
    for (int i = 0; i < 50; ++i) corpus += c5test::random_utf8(rng, 80) + "\n";
    const auto model = train_bpe({corpus}, o);
    for (int i = 0; i < 2000; ++i) {
        std::string s = c5test::random_utf8(rng, 60);
        if (i % 10 == 0) s += "\xFF\xC0 invalid";
        const auto seq = model.encode(s);
        ASSERT_EQ(model.decode(seq.ids), s);
        EXPECT_EQ(std::count(seq.ids.begin(), seq.ids.end(), model.unk_id()), 0);
    }
}

TEST(Decode, BoundsAndEmpty) {
    BpeTrainOptions o;
    o.vocab_size = 40;
    const auto model = train_bpe({"abc abc abd"}, o);
    EXPECT_EQ(model.decode({}), "");
    try {
        (void)model.decode({static_cast<std::uint32_t>(model.size())});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
    }
    // specials do not contribute text
    EXPECT_EQ(model.decode({model.begin_id(), model.sep_id()}), "");
}

TEST(Serialization, RoundTripPreservesBehaviour) {
    std::mt19937_64 rng(35);
    c5test::TempDir dir;
    for (const BpeMode mode : {BpeMode::CharLevel, BpeMode::ByteLevel}) {
        BpeTrainOptions o;
        o.mode = mode;
        o.vocab_size = mode == BpeMode::ByteLevel ? 350 : 120;
        o.coverage = mode == BpeMode::CharLevel ? 0.98 : 1.0;
        const std::string corpus = random_corpus_text(rng, 2000) + " \"tab\tquote\\";
        const auto model = train_bpe({corpus}, o);
        model.save(dir / "m.model");
        const auto loaded = BpeModel::load(dir / "m.model");
        EXPECT_EQ(loaded.serialize(), model.serialize());
        EXPECT_EQ(loaded.merges(), model.merges());
        EXPECT_EQ(loaded.size(), model.size());
        EXPECT_EQ(loaded.character_coverage(), model.character_coverage());
        EXPECT_EQ(loaded.encode(corpus), model.encode(corpus));
    }
    EXPECT_THROW(BpeModel::parse("not a model"), Error);
    EXPECT_THROW(BpeModel::load(dir / "missing"), Error);
}

TEST(Specials, LowestIdsAndModeNames) {
    BpeTrainOptions o;
    o.vocab_size = 40;
    const auto m = train_bpe({"abc abc"}, o);
    EXPECT_EQ(m.special_tokens(), BpeModel::default_specials(BpeMode::CharLevel));
    for (std::uint32_t id = 0; id < 5; ++id) EXPECT_TRUE(m.is_special(id));
    EXPECT_FALSE(m.is_special(5));
    EXPECT_EQ(m.token(m.mask_id()), "[MASK]");
    EXPECT_EQ(m.token(m.begin_id()), "[CLS]");
    EXPECT_EQ(parse_bpe_mode("byte-level"), BpeMode::ByteLevel);
    EXPECT_STREQ(to_string(BpeMode::CharLevel), "char-level");
    EXPECT_THROW(parse_bpe_mode("char"), Error);
}

TEST(Pretokenize, ByteLevelConcatenationIsIdentity) {
    std::mt19937_64 rng(36);
    for (int i = 0; i < 500; ++i) {
        std::string s = c5test::random_utf8(rng, 40);
        if (i % 3 == 0) s = "  " + s + " \n\t ";
        std::string joined;
        for (const auto &p : pretokenize(s, BpeMode::ByteLevel)) joined += p;
        EXPECT_EQ(joined, s);
    }
}

}  // namespace
