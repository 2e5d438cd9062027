#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "deduce/fusion.hpp"
#include "deduce/linear_head.hpp"
#include "deduce/types.hpp"

namespace deduce {

struct EvalResult {
    ClassSet classes;
    /// confusion[truth][predicted]
    std::vector<std::vector<std::size_t>> confusion;
    /// Empty for classes without frames.
    std::vector<std::optional<double>> per_class_accuracy;
    /// Unweighted mean over the classes that have frames.
    double average = 0;
    /// Frame-weighted accuracy; reported, never used for acceptance.
    double micro = 0;
    std::size_t n_frames = 0;

    std::size_t row_total(std::size_t truth) const;
};

/// Builds the confusion matrix and accuracies from parallel label arrays.
EvalResult tabulate(const ClassSet& classes, std::span<const std::size_t> truth,
                    std::span<const std::size_t> predicted);

/// Runs `predict` on every frame (in `jobs` worker threads) and tabulates.
/// Throws DataError naming the first frame without truth.
EvalResult evaluate(std::span<const FrameRecord> frames, ModelKind kind, const ModelBundle& bundle,
                    unsigned jobs = 1);

struct FrameGroup {
    std::string key;
    std::vector<FrameRecord> frames;
};

struct GroupedResult {
    ClassSet classes;
    std::vector<std::pair<std::string, EvalResult>> groups;
    /// Mean over the groups in which the scene occurs; empty if it occurs in none.
    std::vector<std::optional<double>> per_scene_average;
    /// Mean of the groups' macro averages.
    double grand_average = 0;
};

/// Cross-group summary of already computed results.
GroupedResult summarize_groups(std::vector<std::pair<std::string, EvalResult>> groups);

GroupedResult grouped_evaluate(std::span<const FrameGroup> groups, ModelKind kind,
                               const ModelBundle& bundle, unsigned jobs = 1);

struct ConvergenceComparison {
    enum class Faster { first, second, tie, neither };

    std::optional<std::size_t> epochs_first;
    std::optional<std::size_t> epochs_second;
    Faster faster = Faster::neither;
    /// Epochs saved by the faster model; 0 on a tie, empty if either never
    /// reaches the target.
    std::optional<std::size_t> margin;
};

ConvergenceComparison compare_convergence(const TrainReport& first, const TrainReport& second,
                                          double target_accuracy);

/// First epoch reaching `fraction` of the report's own final accuracy.
std::optional<std::size_t> epochs_to_fraction_of_final(const TrainReport& report, double fraction);

/// Scenes down the rows, one column per model or group, an "Avg" row.
/// Values are fractions; rendering prints percentages and "-" for blanks.
struct ResultTable {
    ClassSet rows;
    std::vector<std::string> columns;
    std::vector<std::vector<std::optional<double>>> cells; ///< [row][column]
    std::vector<std::optional<double>> average;            ///< [column]

    std::string render_text() const;
    std::string render_csv() const;
};

ResultTable make_table(const std::vector<std::pair<std::string, EvalResult>>& columns);

/// Groups as columns plus a trailing "Avg" column of per-scene averages.
ResultTable make_table(const GroupedResult& grouped);

} // namespace deduce
