#include "c5/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "c5/error.hpp"
#include "c5/rng.hpp"

namespace c5 {

LabelSet threshold_predictions(std::span<const double> scores, double ratio) {
    if (scores.empty()) throw Error(ErrorKind::InvalidInput, "empty score vector");
    double top = 0.0;
    for (double s : scores) {
        if (!(s > 0.0 && s < 1.0)) throw Error(ErrorKind::InvalidInput, "label score outside (0, 1)");
        top = std::max(top, s);
    }
    LabelSet out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] / top >= ratio) out.push_back(static_cast<std::uint32_t>(i));
    }
    return out;
}

double sample_f1(const LabelSet &gold, const LabelSet &predicted) {
    if (gold.empty() && predicted.empty()) return 1.0;
    if (gold.empty() || predicted.empty()) return 0.0;
    std::size_t tp = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < gold.size() && j < predicted.size()) {
        if (gold[i] == predicted[j]) {
            ++tp;
            ++i;
            ++j;
        } else if (gold[i] < predicted[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return 2.0 * static_cast<double>(tp) / static_cast<double>(gold.size() + predicted.size());
}

double sample_averaged_f1(const std::vector<LabelSet> &gold, const std::vector<LabelSet> &predicted) {
    if (gold.size() != predicted.size()) throw Error(ErrorKind::InvalidInput, "gold and predicted sizes differ");
    if (gold.empty()) throw Error(ErrorKind::InvalidInput, "no samples to score");
    double sum = 0.0;
    for (std::size_t i = 0; i < gold.size(); ++i) sum += sample_f1(gold[i], predicted[i]);
    return sum / static_cast<double>(gold.size());
}

std::uint32_t argmax_class(std::span<const double> scores) {
    if (scores.empty()) throw Error(ErrorKind::InvalidInput, "empty score vector");
    std::uint32_t best = 0;
    for (std::uint32_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = i;
    }
    return best;
}

std::string to_string(Averaging a) {
    switch (a) {
        case Averaging::Macro: return "macro";
        case Averaging::Micro: return "micro";
        case Averaging::Weighted: return "weighted";
    }
    return "?";
}

Averaging parse_averaging(const std::string &name) {
    if (name == "macro") return Averaging::Macro;
    if (name == "micro") return Averaging::Micro;
    if (name == "weighted") return Averaging::Weighted;
    throw Error(ErrorKind::InvalidInput, "unknown averaging: " + name);
}

double classification_f1(const std::vector<std::uint32_t> &gold, const std::vector<std::uint32_t> &predicted,
                         Averaging averaging) {
    if (gold.size() != predicted.size()) throw Error(ErrorKind::InvalidInput, "gold and predicted sizes differ");
    if (gold.empty()) throw Error(ErrorKind::InvalidInput, "no samples to score");
    struct Counts {
        std::size_t tp = 0, fp = 0, fn = 0, support = 0;
    };
    std::map<std::uint32_t, Counts> per_class;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        per_class[gold[i]].support++;
        if (gold[i] == predicted[i]) {
            per_class[gold[i]].tp++;
        } else {
            per_class[gold[i]].fn++;
            per_class[predicted[i]].fp++;
        }
    }
    auto f1 = [](std::size_t tp, std::size_t fp, std::size_t fn) {
        const double denom = static_cast<double>(2 * tp + fp + fn);
        return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
    };
    if (averaging == Averaging::Micro) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (const auto &[_, c] : per_class) {
            tp += c.tp;
            fp += c.fp;
            fn += c.fn;
        }
        return f1(tp, fp, fn);
    }
    double sum = 0.0;
    double weight = 0.0;
    for (const auto &[_, c] : per_class) {
        if (c.support == 0) continue;
        const double w = averaging == Averaging::Weighted ? static_cast<double>(c.support) : 1.0;
        sum += w * f1(c.tp, c.fp, c.fn);
        weight += w;
    }
    return sum / weight;
}

double label_cardinality(const std::vector<LabelSet> &gold) {
    if (gold.empty()) throw Error(ErrorKind::InvalidInput, "no samples");
    std::size_t total = 0;
    for (const auto &g : gold) total += g.size();
    return static_cast<double>(total) / static_cast<double>(gold.size());
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> FoldPlan::test_indices(int fold) const {
    if (fold < 0 || fold >= k) throw Error(ErrorKind::InvalidInput, "fold index out of range");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] == static_cast<std::uint32_t>(fold)) out.push_back(i);
    }
    return out;
}

std::string FoldPlan::to_json() const {
    nlohmann::ordered_json j;
    j["k"] = k;
    j["seed"] = seed;
    j["stratified"] = stratified;
    nlohmann::ordered_json folds = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < sample_ids.size(); ++i) folds[sample_ids[i]] = fold_of[i];
    j["assignments"] = std::move(folds);
    return j.dump(2) + "\n";
}

FoldPlan FoldPlan::from_json(const std::string &text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw ParseError(e.byte, "fold plan is not valid JSON");
    }
    FoldPlan p;
    try {
        p.k = j.at("k").get<int>();
        p.seed = j.at("seed").get<std::uint64_t>();
        p.stratified = j.at("stratified").get<bool>();
        for (const auto &[id, fold] : j.at("assignments").items()) {
            p.sample_ids.push_back(id);
            p.fold_of.push_back(fold.get<std::uint32_t>());
        }
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::Corrupt, std::string("malformed fold plan: ") + e.what());
    }
    for (auto f : p.fold_of) {
        if (f >= static_cast<std::uint32_t>(p.k)) throw Error(ErrorKind::Corrupt, "fold plan assignment out of range");
    }
    return p;
}

FoldPlan FoldPlan::load(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

void FoldPlan::save(const std::filesystem::path &path) const {
    std::ofstream out(path, std::ios::trunc);
    out << to_json();
    if (!out) throw Error(ErrorKind::Storage, "cannot write " + path.string());
}

namespace {

void check_k(int k, std::size_t n) {
    if (k < 2) throw Error(ErrorKind::InvalidInput, "k must be at least 2");
    if (n < static_cast<std::size_t>(k)) throw Error(ErrorKind::InvalidInput, "fewer samples than folds");
}

}  // namespace

FoldPlan stratified_kfold(const std::vector<std::string> &sample_ids, const std::vector<std::uint32_t> &class_of, int k,
                          std::uint64_t seed) {
    if (sample_ids.size() != class_of.size()) throw Error(ErrorKind::InvalidInput, "ids and classes differ in length");
    check_k(k, sample_ids.size());
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.stratified = true;
    plan.sample_ids = sample_ids;
    plan.fold_of.assign(sample_ids.size(), 0);

    std::map<std::uint32_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < class_of.size(); ++i) by_class[class_of[i]].push_back(i);
    std::size_t dealt = 0;
    for (auto &[cls, members] : by_class) {
        Rng rng = Rng::derive(seed, cls);
        rng.shuffle(members);
        for (std::size_t m : members) plan.fold_of[m] = static_cast<std::uint32_t>(dealt++ % static_cast<std::size_t>(k));
    }
    return plan;
}

FoldPlan random_kfold(const std::vector<std::string> &sample_ids, int k, std::uint64_t seed) {
    check_k(k, sample_ids.size());
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.stratified = false;
    plan.sample_ids = sample_ids;
    plan.fold_of.assign(sample_ids.size(), 0);
    std::vector<std::size_t> order(sample_ids.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    const std::size_t n = order.size();
    for (std::size_t pos = 0; pos < n; ++pos) {
        plan.fold_of[order[pos]] = static_cast<std::uint32_t>(pos * static_cast<std::size_t>(k) / n);
    }
    return plan;
}

// ---------------------------------------------------------------------------

std::string MetricReport::formatted() const {
    char buf[64];
    if (stddev) {
        std::snprintf(buf, sizeof buf, "%.2f (±%.2f)", mean * 100.0, *stddev * 100.0);
    } else {
        std::snprintf(buf, sizeof buf, "%.2f", mean * 100.0);
    }
    return buf;
}

std::string MetricReport::to_json() const {
    nlohmann::ordered_json j;
    j["metric"] = metric;
    j["per_fold"] = per_fold;
    j["mean"] = mean;
    j["std"] = stddev ? nlohmann::ordered_json(*stddev) : nlohmann::ordered_json(nullptr);
    j["formatted"] = formatted();
    return j.dump(2) + "\n";
}

std::string render_report(const MetricReport &report) {
    std::string out = "metric        " + report.metric + "\n";
    char buf[64];
    for (std::size_t i = 0; i < report.per_fold.size(); ++i) {
        std::snprintf(buf, sizeof buf, "fold %-8zu %.2f\n", i + 1, report.per_fold[i] * 100.0);
        out += buf;
    }
    out += (report.stddev ? "mean (±std)   " : "score         ") + report.formatted() + "\n";
    return out;
}

MetricReport aggregate_cv(const std::vector<double> &per_fold, std::string metric) {
    if (per_fold.size() < 2) throw Error(ErrorKind::InvalidInput, "aggregation needs at least 2 fold scores");
    MetricReport r;
    r.metric = std::move(metric);
    r.per_fold = per_fold;
    r.mean = std::accumulate(per_fold.begin(), per_fold.end(), 0.0) / static_cast<double>(per_fold.size());
    double ss = 0.0;
    for (double v : per_fold) ss += (v - r.mean) * (v - r.mean);
    r.stddev = std::sqrt(ss / static_cast<double>(per_fold.size() - 1));
    return r;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split(const std::string &s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t p = s.find(sep, start);
        out.push_back(s.substr(start, p - start));
        if (p == std::string::npos) break;
        start = p + 1;
    }
    return out;
}

}  // namespace

std::vector<PredictionRow> read_predictions(std::istream &in) {
    std::vector<PredictionRow> rows;
    std::unordered_map<std::string, std::size_t> seen;
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t line_offset = offset;
        offset += line.size() + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split(line, '\t');
        if (fields.size() != 3) throw ParseError(line_offset, "prediction row needs 3 tab-separated fields");
        PredictionRow row;
        row.sample_id = fields[0];
        if (!seen.emplace(row.sample_id, rows.size()).second) {
            throw ParseError(line_offset, "duplicate sample id " + row.sample_id);
        }
        try {
            if (!fields[1].empty()) {
                for (const auto &l : split(fields[1], ',')) {
                    std::size_t used = 0;
                    const long v = std::stol(l, &used);
                    if (used != l.size() || v < 0) throw std::invalid_argument(l);
                    row.gold.push_back(static_cast<std::uint32_t>(v));
                }
            }
            for (const auto &s : split(fields[2], ',')) {
                std::size_t used = 0;
                row.scores.push_back(std::stod(s, &used));
                if (used != s.size()) throw std::invalid_argument(s);
            }
        } catch (const std::logic_error &) {
            throw ParseError(line_offset, "malformed label or score in prediction row");
        }
        std::sort(row.gold.begin(), row.gold.end());
        row.gold.erase(std::unique(row.gold.begin(), row.gold.end()), row.gold.end());
        if (!rows.empty() && rows.front().scores.size() != row.scores.size()) {
            throw ParseError(line_offset, "score count differs from earlier rows");
        }
        for (auto g : row.gold) {
            if (g >= row.scores.size()) throw ParseError(line_offset, "gold label index exceeds score count");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<PredictionRow> read_predictions(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path.string());
    return read_predictions(in);
}

TaskKind parse_task_kind(const std::string &name) {
    if (name == "multi-label") return TaskKind::MultiLabel;
    if (name == "single-label") return TaskKind::SingleLabel;
    throw Error(ErrorKind::InvalidInput, "unknown task kind: " + name);
}

MetricReport evaluate_predictions(const std::vector<PredictionRow> &rows, TaskKind task, Averaging averaging,
                                  const std::optional<FoldPlan> &plan) {
    if (rows.empty()) throw Error(ErrorKind::InvalidInput, "no predictions");
    auto score = [&](const std::vector<std::size_t> &idx) {
        if (task == TaskKind::MultiLabel) {
            std::vector<LabelSet> gold, pred;
            for (auto i : idx) {
                gold.push_back(rows[i].gold);
                pred.push_back(threshold_predictions(rows[i].scores));
            }
            return sample_averaged_f1(gold, pred);
        }
        std::vector<std::uint32_t> gold, pred;
        for (auto i : idx) {
            if (rows[i].gold.size() != 1) {
                throw Error(ErrorKind::InvalidInput, "single-label row " + rows[i].sample_id + " needs exactly one gold label");
            }
            gold.push_back(rows[i].gold[0]);
            pred.push_back(argmax_class(rows[i].scores));
        }
        return classification_f1(gold, pred, averaging);
    };
    const std::string metric = task == TaskKind::MultiLabel ? "sample-f1" : to_string(averaging) + "-f1";

    if (!plan) {
        std::vector<std::size_t> all(rows.size());
        std::iota(all.begin(), all.end(), 0);
        MetricReport single;
        single.metric = metric;
        single.mean = score(all);
        single.per_fold = {single.mean};
        return single;
    }
    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < rows.size(); ++i) row_of.emplace(rows[i].sample_id, i);
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(plan->k));
    for (std::size_t s = 0; s < plan->sample_ids.size(); ++s) {
        auto it = row_of.find(plan->sample_ids[s]);
        if (it == row_of.end()) throw Error(ErrorKind::InvalidInput, "no prediction for sample " + plan->sample_ids[s]);
        folds[plan->fold_of[s]].push_back(it->second);
    }
    std::vector<double> per_fold;
    for (const auto &f : folds) {
        if (f.empty()) throw Error(ErrorKind::InvalidInput, "a fold has no predictions");
        per_fold.push_back(score(f));
    }
    return aggregate_cv(per_fold, metric);
}

}  // namespace c5
