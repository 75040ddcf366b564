#include <gtest/gtest.h>

#include "c5/error.hpp"
#include "c5/langid.hpp"
#include "support.hpp"

namespace {

using namespace c5;

// Held-out paragraphs; none of these sentences occur in data/lang.
const char *kCzechParagraph =
    "Praha je hlavní a největší město České republiky. Leží na řece Vltavě a žije v ní přibližně "
    "jeden milion tři sta tisíc obyvatel. Historické centrum města bylo zapsáno na seznam světového "
    "dědictví UNESCO. Mezi nejznámější památky patří Pražský hrad, Karlův most a Staroměstské náměstí "
    "s orlojem. Město je významným střediskem vzdělání, kultury a cestovního ruchu ve střední Evropě.";

const char *kCzechEnglishMixed =
    "Praha je hlavní a největší město České republiky. Prague is the capital and largest city of the "
    "Czech Republic. Leží na řece Vltavě a žije v ní přibližně jeden milion obyvatel. It lies on the "
    "Vltava river and is home to about one million people. Historické centrum města bylo zapsáno na "
    "seznam světového dědictví. The historic centre of the city is a world heritage site. Mezi "
    "nejznámější památky patří Pražský hrad a Karlův most. The best known sights include Prague Castle "
    "and Charles Bridge.";

const char *kEnglishParagraph =
    "The river flows through the middle of the old town and divides it into two parts. Several bridges "
    "connect the banks, and the oldest of them was built more than six hundred years ago.";

const LanguageModel &bundled() {
    static const LanguageModel m = LanguageModel::load(c5test::source_dir() / "data" / "langid.model");
    return m;
}

std::map<std::string, std::string> training_corpora() {
    std::map<std::string, std::string> c;
    for (const char *lang : {"ces", "eng", "deu"}) {
        c[lang] = c5test::read_file(c5test::source_dir() / "data" / "lang" / (std::string(lang) + ".txt"));
    }
    return c;
}

TEST(LangId, HeldOutCzechAboveThreshold) {
    const auto v = detect_language(kCzechParagraph, bundled());
    EXPECT_EQ(v.language, "ces");
    EXPECT_GE(v.probability, 0.99);
}

TEST(LangId, MixedTextBelowThreshold) {
    const auto all = bundled().detect_all(kCzechEnglishMixed);
    double ces = 0;
    for (const auto &v : all) {
        if (v.language == "ces") ces = v.probability;
    }
    EXPECT_LT(ces, 0.99);
}

TEST(LangId, EnglishIsEnglish) {
    const auto v = detect_language(kEnglishParagraph, bundled());
    EXPECT_EQ(v.language, "eng");
}

TEST(LangId, PosteriorSumsToOneAndIsDeterministic) {
    const auto a = bundled().detect_all(kCzechEnglishMixed);
    const auto b = bundled().detect_all(kCzechEnglishMixed);
    double sum = 0;
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += a[i].probability;
        EXPECT_EQ(a[i].language, b[i].language);
        EXPECT_EQ(a[i].probability, b[i].probability);
        if (i > 0) {
            EXPECT_GE(a[i - 1].probability, a[i].probability);
        }
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(LangId, BlankTextIsInvalidInput) {
    for (const char *blank : {"", "   \n\t"}) {
        try {
            detect_language(blank, bundled());
            FAIL();
        } catch (const Error &e) {
            EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
        }
    }
}

TEST(LangId, BundledModelIsReproducibleFromData) {
    const auto model = LanguageModel::train(training_corpora());
    EXPECT_EQ(model.serialize(), c5test::read_file(c5test::source_dir() / "data" / "langid.model"));
    EXPECT_EQ(LanguageModel::parse(model.serialize()).serialize(), model.serialize());
}

TEST(LangId, HeldOutHalvesClassifyCorrectly) {
    // train on the first half of every corpus, classify paragraphs of the second half
    std::map<std::string, std::string> train, test;
    for (const auto &[lang, text] : training_corpora()) {
        const auto mid = text.find('\n', text.size() / 2);
        train[lang] = text.substr(0, mid);
        test[lang] = text.substr(mid + 1);
    }
    const auto model = LanguageModel::train(train, 50 * 1024);
    for (const auto &[lang, text] : test) {
        std::size_t start = 0, checked = 0, correct = 0;
        while (start < text.size() && checked < 40) {
            auto nl = text.find('\n', start);
            if (nl == std::string::npos) nl = text.size();
            const std::string para = text.substr(start, nl - start);
            start = nl + 1;
            if (para.size() < 80) continue;
            ++checked;
            if (model.detect(para).language == lang) ++correct;
        }
        EXPECT_EQ(correct, checked) << lang;
    }
}

TEST(LangId, TrainingErrors) {
    const auto corpora = training_corpora();
    try {
        LanguageModel::train({{"ces", corpora.at("ces")}});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::Unsupported);
    }
    try {
        LanguageModel::train({{"ces", corpora.at("ces")}, {"eng", "too little text."}});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
    }
}

TEST(LangId, IdenticalCorporaAreIndistinguishable) {
    const auto corpora = training_corpora();
    const auto model = LanguageModel::train({{"ces", corpora.at("ces")}, {"xxx", corpora.at("ces")}});
    const auto all = model.detect_all(kCzechParagraph);
    ASSERT_EQ(all.size(), 2u);
    EXPECT_NEAR(all[0].probability, 0.5, 1e-6);
    EXPECT_NEAR(all[1].probability, 0.5, 1e-6);
}

TEST(LangId, NgramExtraction) {
    const auto grams = extract_ngrams("ab");
    // 1-grams and 2-grams over the space-padded word, in text order
    EXPECT_FALSE(grams.empty());
    EXPECT_NE(std::find(grams.begin(), grams.end(), "a"), grams.end());
    EXPECT_NE(std::find(grams.begin(), grams.end(), "ab"), grams.end());
    EXPECT_EQ(extract_ngrams("x y z", 1), extract_ngrams("x"));
}

}  // namespace
