#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefopt/dataset.hpp"
#include "prefopt/policy.hpp"
#include "prefopt/reward.hpp"

namespace prefopt {

struct CorrelationTriple {
    std::optional<double> pearson;
    std::optional<double> spearman;
    std::optional<double> kendall_tau;
};

struct MetricsReport {
    double avg_marginal = 0.0;
    double accuracy = 0.0;
    double aug_accuracy = 0.0;
    std::optional<double> pearson;
    std::optional<double> spearman;
    std::optional<double> kendall_tau;
    std::optional<double> win_rate;
    std::optional<double> tie_rate;
    std::optional<double> lose_rate;

    std::string to_json() const;
};

/// Unscaled log-ratio margin per tuple, at x or aug(x).
std::vector<double> per_tuple_margins(const PolicyTable& pi, const PolicyTable& ref,
                                      const Dataset& dataset, bool augmented = false);

/// Mean unscaled margin over the dataset. The beta_free form is the reported
/// gap metric; beta_free = false rescales by the supplied beta (the implicit
/// reward difference), provided for diagnostics.
double average_marginal(const PolicyTable& pi, const PolicyTable& ref, const Dataset& dataset,
                        bool beta_free = true, double beta = 1.0);

/// Fraction of tuples with strictly positive margin; zero margins count as
/// failures. augmented = true evaluates at aug(x).
double accuracy(const PolicyTable& pi, const PolicyTable& ref, const Dataset& dataset,
                bool augmented = false);

/// Pearson, Spearman (average ranks), and Kendall tau-b over paired samples.
/// Lengths must match and be >= 3. A coefficient whose denominator vanishes
/// (zero variance, all ties) comes back empty rather than erroring.
CorrelationTriple correlations(std::span<const double> margins, std::span<const double> gaps);

struct JudgeMode {
    enum class Kind { argmax, sample };
    Kind kind = Kind::argmax;
    std::uint64_t seed = 0;
};

struct JudgeOutcome {
    double win_rate = 0.0;
    double tie_rate = 0.0;
    double lose_rate = 0.0;
};

/// Oracle-as-judge comparison: each policy emits one response per query
/// (argmax, or inverse-CDF sampling with a per-query random level shared by
/// both policies so the comparison is symmetric); quantized r* scores decide
/// win/tie/lose. `ref` is part of the evaluation contract but the emission
/// uses the policies alone.
JudgeOutcome judge_compare(const PolicyTable& policy_a, const PolicyTable& policy_b,
                           const PolicyTable& ref, const GroundTruth& gt,
                           std::span<const std::size_t> queries, JudgeMode mode);

/// Assembles the per-checkpoint report: the three gap metrics plus the
/// correlation triple against true_gap (over the tuples that carry one; empty
/// when fewer than three do). aug_accuracy is NaN for tables without an
/// augmentation map.
MetricsReport evaluate_metrics(const PolicyTable& pi, const PolicyTable& ref,
                               const Dataset& dataset);

std::string metrics_csv_header();
std::string metrics_csv_row(std::size_t step, double loss, const MetricsReport& report);

}  // namespace prefopt
