#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace c5 {

/// Sorted, duplicate-free label indices.
using LabelSet = std::vector<std::uint32_t>;

/// Keeps label i when scores[i] / max(scores) >= ratio. Every score must
/// lie strictly inside (0, 1); anything else is InvalidInput.
LabelSet threshold_predictions(std::span<const double> scores, double ratio = 0.5);

/// Per-sample F1. Two empty sets score 1, one empty set scores 0.
double sample_f1(const LabelSet &gold, const LabelSet &predicted);

/// Mean of sample_f1 over aligned gold/predicted sets.
double sample_averaged_f1(const std::vector<LabelSet> &gold, const std::vector<LabelSet> &predicted);

/// Index of the highest score; ties go to the lowest index.
std::uint32_t argmax_class(std::span<const double> scores);

enum class Averaging { Macro, Micro, Weighted };

std::string to_string(Averaging a);
Averaging parse_averaging(const std::string &name);

/// Single-label F1. Macro and weighted averaging run over classes that
/// occur in `gold`; a class seen only in `predicted` lowers precision of
/// nothing but still counts as a false positive for micro.
double classification_f1(const std::vector<std::uint32_t> &gold, const std::vector<std::uint32_t> &predicted,
                         Averaging averaging = Averaging::Macro);

/// Mean number of labels per sample.
double label_cardinality(const std::vector<LabelSet> &gold);

struct FoldPlan {
    int k = 10;
    std::uint64_t seed = 0;
    bool stratified = true;
    std::vector<std::string> sample_ids;
    std::vector<std::uint32_t> fold_of;  // aligned with sample_ids

    /// Sample indices held out in `fold`.
    [[nodiscard]] std::vector<std::size_t> test_indices(int fold) const;
    [[nodiscard]] std::string to_json() const;
    static FoldPlan from_json(const std::string &text);
    static FoldPlan load(const std::filesystem::path &path);
    void save(const std::filesystem::path &path) const;
};

/// Each class is shuffled by `seed` and dealt round-robin across folds,
/// starting where the previous class stopped, so fold sizes differ by at
/// most one overall and per-class counts by at most one.
FoldPlan stratified_kfold(const std::vector<std::string> &sample_ids, const std::vector<std::uint32_t> &class_of, int k,
                          std::uint64_t seed);

/// Shuffled samples cut into k contiguous blocks of near-equal size.
FoldPlan random_kfold(const std::vector<std::string> &sample_ids, int k, std::uint64_t seed);

struct MetricReport {
    std::string metric;
    std::vector<double> per_fold;
    double mean = 0.0;
    std::optional<double> stddev;  // absent for a single held-out set

    /// "85.36 (±0.30)" in percent; without a deviation just "85.36".
    [[nodiscard]] std::string formatted() const;
    [[nodiscard]] std::string to_json() const;
};

/// Plain-text table: one row per fold, then "mean (±std)", all x100.
std::string render_report(const MetricReport &report);

/// Mean and sample (n - 1) standard deviation of per-fold scores. Fewer
/// than two scores is InvalidInput.
MetricReport aggregate_cv(const std::vector<double> &per_fold, std::string metric = "f1");

struct PredictionRow {
    std::string sample_id;
    LabelSet gold;
    std::vector<double> scores;
};

/// Tab-separated rows: id, comma-separated gold label indices (may be
/// empty), comma-separated scores. Blank lines and '#' lines are skipped.
std::vector<PredictionRow> read_predictions(std::istream &in);
std::vector<PredictionRow> read_predictions(const std::filesystem::path &path);

enum class TaskKind { MultiLabel, SingleLabel };

TaskKind parse_task_kind(const std::string &name);

/// Scores every fold of `plan` (or the whole set when no plan is given)
/// and aggregates.
MetricReport evaluate_predictions(const std::vector<PredictionRow> &rows, TaskKind task, Averaging averaging,
                                  const std::optional<FoldPlan> &plan);

}  // namespace c5
