#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>

#include "c5/error.hpp"
#include "c5/eval.hpp"
#include "support.hpp"

namespace {

using namespace c5;

template <class F>
void expect_kind(ErrorKind kind, F &&f) {
    try {
        f();
        ADD_FAILURE() << "no exception";
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), kind) << e.what();
    }
}

LabelSet naive_threshold(const std::vector<double> &s) {
    double mx = 0;
    for (double v : s) mx = std::max(mx, v);
    LabelSet out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] / mx >= 0.5) out.push_back(static_cast<std::uint32_t>(i));
    }
    return out;
}

TEST(Threshold, Examples) {
    EXPECT_EQ(threshold_predictions(std::vector<double>{0.9, 0.5, 0.2}), (LabelSet{0, 1}));
    EXPECT_EQ(threshold_predictions(std::vector<double>{0.3, 0.3, 0.3}), (LabelSet{0, 1, 2}));
    EXPECT_EQ(threshold_predictions(std::vector<double>{0.2, 0.09}), (LabelSet{0}));
    // exactly half the maximum is kept
    EXPECT_EQ(threshold_predictions(std::vector<double>{0.25, 0.5}), (LabelSet{0, 1}));
}

TEST(Threshold, ScoresOutsideOpenIntervalRejected) {
    for (const auto &bad : std::vector<std::vector<double>>{{0.0, 0.5}, {1.0}, {-0.1}, {0.5, 1.2}, {}, {NAN}}) {
        expect_kind(ErrorKind::InvalidInput, [&] { threshold_predictions(bad); });
    }
}

TEST(Threshold, MatchesNaiveOracleAndProperties) {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6);
    for (int i = 0; i < 20000; ++i) {
        std::vector<double> s(1 + rng() % 12);
        for (auto &v : s) v = u(rng);
        const auto got = threshold_predictions(s);
        EXPECT_EQ(got, naive_threshold(s));
        const auto am = argmax_class(s);
        EXPECT_TRUE(std::binary_search(got.begin(), got.end(), am));
        const double mx = *std::max_element(s.begin(), s.end());
        const double c = std::uniform_real_distribution<double>(0.05, 0.999 / mx)(rng);
        std::vector<double> scaled = s;
        for (auto &v : scaled) v *= c;
        if (std::all_of(scaled.begin(), scaled.end(), [](double v) { return v > 0 && v < 1; })) {
            // ratios are preserved up to rounding; compare away from the boundary
            bool near_boundary = false;
            for (double v : s) near_boundary |= std::abs(v / mx - 0.5) < 1e-9;
            if (!near_boundary) {
                EXPECT_EQ(threshold_predictions(scaled), got);
            }
        }
    }
}

TEST(SampleF1, Examples) {
    EXPECT_DOUBLE_EQ(sample_f1({0, 1}, {0}), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(sample_f1({2, 5}, {2, 5}), 1.0);
    EXPECT_DOUBLE_EQ(sample_f1({0}, {}), 0.0);
    EXPECT_DOUBLE_EQ(sample_f1({}, {3}), 0.0);
    EXPECT_DOUBLE_EQ(sample_f1({}, {}), 1.0);
}

TEST(SampleF1, SymmetricAndBounded) {
    std::mt19937_64 rng(52);
    for (int i = 0; i < 2000; ++i) {
        LabelSet a, b;
        for (std::uint32_t l = 0; l < 8; ++l) {
            if (rng() % 3 == 0) a.push_back(l);
            if (rng() % 3 == 0) b.push_back(l);
        }
        const double f = sample_f1(a, b);
        EXPECT_DOUBLE_EQ(f, sample_f1(b, a));
        EXPECT_GE(f, 0.0);
        EXPECT_LE(f, 1.0);
    }
}

TEST(SampleAveragedF1, Examples) {
    EXPECT_NEAR(sample_averaged_f1({{0, 1}, {0, 1}}, {{0, 1}, {0}}), 5.0 / 6.0, 1e-12);
    EXPECT_DOUBLE_EQ(sample_averaged_f1({{1}, {2, 3}}, {{1}, {2, 3}}), 1.0);
    // five samples scored by hand:
    //   {0,1} vs {0}     -> 2/3
    //   {2}   vs {2}     -> 1
    //   {0,2} vs {1}     -> 0
    //   {1,2} vs {0,1,2} -> 4/5
    //   {3}   vs {1,3}   -> 2/3
    const double expected = (2.0 / 3 + 1 + 0 + 0.8 + 2.0 / 3) / 5;
    EXPECT_NEAR(sample_averaged_f1({{0, 1}, {2}, {0, 2}, {1, 2}, {3}}, {{0}, {2}, {1}, {0, 1, 2}, {1, 3}}), expected,
                1e-9);
    expect_kind(ErrorKind::InvalidInput, [] { sample_averaged_f1({{0}}, {}); });
    expect_kind(ErrorKind::InvalidInput, [] { sample_averaged_f1({}, {}); });
}

TEST(Argmax, Examples) {
    EXPECT_EQ(argmax_class(std::vector<double>{0.1, 0.8, 0.1}), 1u);
    EXPECT_EQ(argmax_class(std::vector<double>{0.5, 0.5}), 0u);
}

TEST(ClassificationF1, Examples) {
    const std::vector<std::uint32_t> gold = {0, 0, 1, 1}, pred = {0, 1, 1, 1};
    EXPECT_NEAR(classification_f1(gold, pred, Averaging::Macro), 11.0 / 15.0, 1e-12);
    EXPECT_NEAR(classification_f1(gold, pred, Averaging::Micro), 0.75, 1e-12);
    // weighted: both classes have support 2
    EXPECT_NEAR(classification_f1(gold, pred, Averaging::Weighted), 11.0 / 15.0, 1e-12);
    for (auto a : {Averaging::Macro, Averaging::Micro, Averaging::Weighted}) {
        EXPECT_DOUBLE_EQ(classification_f1(gold, gold, a), 1.0);
    }
    expect_kind(ErrorKind::InvalidInput, [] { classification_f1({0, 1}, {0}); });
}

TEST(ClassificationF1, PredictedOnlyClassNotInMacroDivisor) {
    // gold {0,0,1}, pred {0,2,1}: class0 P=1 R=.5 F1=2/3, class1 F1=1, class2 only predicted
    EXPECT_NEAR(classification_f1({0, 0, 1}, {0, 2, 1}, Averaging::Macro), (2.0 / 3 + 1) / 2, 1e-12);
    // weighted by support 2 and 1
    EXPECT_NEAR(classification_f1({0, 0, 1}, {0, 2, 1}, Averaging::Weighted), (2 * 2.0 / 3 + 1) / 3, 1e-12);
}

TEST(ClassificationF1, MicroEqualsAccuracy) {
    std::mt19937_64 rng(53);
    for (int i = 0; i < 200; ++i) {
        std::vector<std::uint32_t> g(1 + rng() % 50), p(g.size());
        std::size_t correct = 0;
        for (std::size_t j = 0; j < g.size(); ++j) {
            g[j] = static_cast<std::uint32_t>(rng() % 4);
            p[j] = static_cast<std::uint32_t>(rng() % 4);
            correct += g[j] == p[j];
        }
        EXPECT_NEAR(classification_f1(g, p, Averaging::Micro), static_cast<double>(correct) / g.size(), 1e-12);
    }
}

TEST(Averaging, Names) {
    EXPECT_EQ(parse_averaging("macro"), Averaging::Macro);
    EXPECT_EQ(to_string(Averaging::Weighted), "weighted");
    expect_kind(ErrorKind::InvalidInput, [] { parse_averaging("harmonic"); });
    EXPECT_EQ(parse_task_kind("single-label"), TaskKind::SingleLabel);
    expect_kind(ErrorKind::InvalidInput, [] { parse_task_kind("regression"); });
}

TEST(LabelCardinality, Examples) {
    EXPECT_DOUBLE_EQ(label_cardinality({{0}, {0, 1}, {0, 1, 2}}), 2.0);
    EXPECT_DOUBLE_EQ(label_cardinality({{4}, {1}, {2}}), 1.0);
    expect_kind(ErrorKind::InvalidInput, [] { label_cardinality({}); });
}

std::vector<std::string> ids(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("s" + std::to_string(i));
    return out;
}

void expect_partition(const FoldPlan &plan) {
    std::vector<int> seen(plan.sample_ids.size(), 0);
    std::vector<std::size_t> sizes;
    for (int f = 0; f < plan.k; ++f) {
        const auto t = plan.test_indices(f);
        sizes.push_back(t.size());
        for (auto i : t) ++seen[i];
    }
    for (int s : seen) EXPECT_EQ(s, 1);
    EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1u);
}

TEST(StratifiedKFold, ExactCountsWhenDivisible) {
    std::vector<std::uint32_t> cls;
    for (int i = 0; i < 100; ++i) cls.push_back(i < 60 ? 0 : (i < 90 ? 1 : 2));
    const auto plan = stratified_kfold(ids(100), cls, 10, 5);
    expect_partition(plan);
    for (int f = 0; f < 10; ++f) {
        std::map<std::uint32_t, int> counts;
        for (auto i : plan.test_indices(f)) ++counts[cls[i]];
        EXPECT_EQ(counts[0], 6);
        EXPECT_EQ(counts[1], 3);
        EXPECT_EQ(counts[2], 1);
    }
}

TEST(StratifiedKFold, PerClassBalanceOnSkewedData) {
    std::mt19937_64 rng(54);
    for (int round = 0; round < 20; ++round) {
        const std::size_t n = 30 + rng() % 500;
        std::vector<std::uint32_t> cls(n);
        for (auto &c : cls) c = static_cast<std::uint32_t>(rng() % 10 < 6 ? 0 : (rng() % 3 == 0 ? 2 : 1));
        const int k = 2 + static_cast<int>(rng() % 9);
        const auto plan = stratified_kfold(ids(n), cls, k, rng());
        expect_partition(plan);
        std::map<std::uint32_t, std::vector<int>> counts;
        for (std::size_t i = 0; i < n; ++i) {
            auto &v = counts[cls[i]];
            v.resize(static_cast<std::size_t>(k));
            ++v[plan.fold_of[i]];
        }
        for (const auto &[c, v] : counts) EXPECT_LE(*std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end()), 1);
    }
}

TEST(StratifiedKFold, LeaveOneOutAndDeterminism) {
    const std::vector<std::uint32_t> cls = {0, 1, 0, 1, 2};
    const auto loo = stratified_kfold(ids(5), cls, 5, 1);
    expect_partition(loo);
    for (int f = 0; f < 5; ++f) EXPECT_EQ(loo.test_indices(f).size(), 1u);
    EXPECT_EQ(stratified_kfold(ids(5), cls, 3, 7).fold_of, stratified_kfold(ids(5), cls, 3, 7).fold_of);
    expect_kind(ErrorKind::InvalidInput, [&] { stratified_kfold(ids(5), cls, 6, 1); });
    expect_kind(ErrorKind::InvalidInput, [&] { stratified_kfold(ids(5), cls, 1, 1); });
    expect_kind(ErrorKind::InvalidInput, [&] { stratified_kfold(ids(4), cls, 2, 1); });
}

TEST(RandomKFold, Sizes) {
    const auto single = random_kfold(ids(10), 10, 3);
    for (int f = 0; f < 10; ++f) EXPECT_EQ(single.test_indices(f).size(), 1u);
    const auto plan = random_kfold(ids(25), 10, 3);
    expect_partition(plan);
    std::multiset<std::size_t> sizes;
    for (int f = 0; f < 10; ++f) sizes.insert(plan.test_indices(f).size());
    EXPECT_EQ(sizes.count(3), 5u);
    EXPECT_EQ(sizes.count(2), 5u);
    EXPECT_EQ(random_kfold(ids(25), 10, 3).fold_of, plan.fold_of);
    EXPECT_NE(random_kfold(ids(25), 10, 4).fold_of, plan.fold_of);
    expect_kind(ErrorKind::InvalidInput, [] { random_kfold(ids(3), 4, 1); });
}

TEST(FoldPlanJson, RoundTrip) {
    c5test::TempDir dir;
    const auto plan = stratified_kfold(ids(40), std::vector<std::uint32_t>(40, 0), 4, 11);
    plan.save(dir / "folds.json");
    const auto loaded = FoldPlan::load(dir / "folds.json");
    EXPECT_EQ(loaded.k, 4);
    EXPECT_EQ(loaded.seed, 11u);
    EXPECT_TRUE(loaded.stratified);
    EXPECT_EQ(loaded.sample_ids, plan.sample_ids);
    EXPECT_EQ(loaded.fold_of, plan.fold_of);
    EXPECT_EQ(loaded.to_json(), plan.to_json());
    EXPECT_THROW(FoldPlan::from_json("{\"k\": 2}"), Error);
    EXPECT_THROW(FoldPlan::from_json("not json"), Error);
}

TEST(AggregateCv, Examples) {
    const auto same = aggregate_cv({0.8, 0.8, 0.8});
    EXPECT_NEAR(same.mean, 0.8, 1e-12);
    EXPECT_NEAR(*same.stddev, 0.0, 1e-12);
    const auto two = aggregate_cv({0.7, 0.9});
    EXPECT_NEAR(two.mean, 0.8, 1e-12);
    EXPECT_NEAR(*two.stddev, std::sqrt(0.02), 1e-9);
    expect_kind(ErrorKind::InvalidInput, [] { aggregate_cv({0.5}); });
    expect_kind(ErrorKind::InvalidInput, [] { aggregate_cv({}); });
}

TEST(AggregateCv, PermutationInvariantMean) {
    std::vector<double> v = {0.61, 0.73, 0.55, 0.92, 0.88, 0.47};
    const auto a = aggregate_cv(v);
    std::reverse(v.begin(), v.end());
    const auto b = aggregate_cv(v);
    EXPECT_NEAR(a.mean, b.mean, 1e-12);
    EXPECT_NEAR(*a.stddev, *b.stddev, 1e-12);
}

TEST(Report, PercentFormatting) {
    MetricReport r;
    r.metric = "sample-f1";
    r.mean = 0.8536;
    r.stddev = 0.0030;
    EXPECT_EQ(r.formatted(), "85.36 (±0.30)");
    r.stddev.reset();
    EXPECT_EQ(r.formatted(), "85.36");
    const auto agg = aggregate_cv({0.85, 0.86}, "macro-f1");
    const std::string text = render_report(agg);
    EXPECT_NE(text.find("85.00"), std::string::npos);
    EXPECT_NE(text.find("85.50 (±0.71)"), std::string::npos);
    EXPECT_NE(agg.to_json().find("\"formatted\": \"85.50 (±0.71)\""), std::string::npos);
}

TEST(Predictions, ParseAndErrors) {
    std::istringstream ok("# header\ns1\t0,2\t0.9,0.1,0.6\n\ns2\t\t0.2,0.3,0.4\n");
    const auto rows = read_predictions(ok);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].gold, (LabelSet{0, 2}));
    EXPECT_EQ(rows[1].gold, LabelSet{});
    EXPECT_EQ(rows[1].scores, (std::vector<double>{0.2, 0.3, 0.4}));
    for (const char *bad : {"s1\t0\n", "s1\t0\t0.5,x\n", "s1\t7\t0.5,0.4\n", "s1\t0\t0.5\ns1\t0\t0.5\n"}) {
        std::istringstream in(bad);
        EXPECT_THROW(read_predictions(in), Error) << bad;
    }
}

TEST(Predictions, EvaluateWithPlan) {
    std::vector<PredictionRow> rows;
    std::mt19937_64 rng(55);
    for (int i = 0; i < 40; ++i) {
        PredictionRow r;
        r.sample_id = "s" + std::to_string(i);
        r.gold = {static_cast<std::uint32_t>(i % 3)};
        for (int c = 0; c < 3; ++c) r.scores.push_back(0.05 + 0.9 * std::uniform_real_distribution<double>(0, 1)(rng));
        rows.push_back(r);
    }
    const auto plan = stratified_kfold(ids(40), [&] {
        std::vector<std::uint32_t> c;
        for (int i = 0; i < 40; ++i) c.push_back(static_cast<std::uint32_t>(i % 3));
        return c;
    }(), 4, 2);
    const auto multi = evaluate_predictions(rows, TaskKind::MultiLabel, Averaging::Macro, plan);
    ASSERT_EQ(multi.per_fold.size(), 4u);
    for (int f = 0; f < 4; ++f) {
        std::vector<LabelSet> g, p;
        for (auto i : plan.test_indices(f)) {
            g.push_back(rows[i].gold);
            p.push_back(threshold_predictions(rows[i].scores));
        }
        EXPECT_NEAR(multi.per_fold[f], sample_averaged_f1(g, p), 1e-12);
    }
    ASSERT_TRUE(multi.stddev);
    const auto single = evaluate_predictions(rows, TaskKind::SingleLabel, Averaging::Micro, std::nullopt);
    EXPECT_FALSE(single.stddev);
    std::size_t correct = 0;
    for (const auto &r : rows) correct += argmax_class(r.scores) == r.gold[0];
    EXPECT_NEAR(single.mean, static_cast<double>(correct) / 40, 1e-12);
}

}  // namespace
