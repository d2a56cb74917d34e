#include "prefopt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "prefopt/errors.hpp"
#include "prefopt/matrix.hpp"
#include "prefopt/rng.hpp"

namespace prefopt {

namespace {

void write_optional(nlohmann::json& doc, const char* key, const std::optional<double>& v) {
    if (v) {
        doc[key] = *v;
    } else {
        doc[key] = nullptr;
    }
}

}  // namespace

std::string MetricsReport::to_json() const {
    nlohmann::json doc;
    doc["avg_marginal"] = avg_marginal;
    doc["accuracy"] = accuracy;
    if (std::isfinite(aug_accuracy)) {
        doc["aug_accuracy"] = aug_accuracy;
    } else {
        doc["aug_accuracy"] = nullptr;
    }
    write_optional(doc, "pearson", pearson);
    write_optional(doc, "spearman", spearman);
    write_optional(doc, "kendall_tau", kendall_tau);
    write_optional(doc, "win_rate", win_rate);
    write_optional(doc, "tie_rate", tie_rate);
    write_optional(doc, "lose_rate", lose_rate);
    return doc.dump();
}

std::vector<double> per_tuple_margins(const PolicyTable& pi, const PolicyTable& ref,
                                      const Dataset& dataset, bool augmented) {
    std::vector<double> margins(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& t = dataset.tuples[i];
        const ContextId c{t.query, augmented};
        margins[i] = implicit_reward_diff(pi, ref, c, t.y_pos, t.y_neg, 1.0);
    }
    return margins;
}

double average_marginal(const PolicyTable& pi, const PolicyTable& ref, const Dataset& dataset,
                        bool beta_free, double beta) {
    if (dataset.empty()) throw std::invalid_argument("average_marginal: empty dataset");
    const auto margins = per_tuple_margins(pi, ref, dataset, false);
    const double mean = pairwise_mean(margins);
    return beta_free ? mean : beta * mean;
}

double accuracy(const PolicyTable& pi, const PolicyTable& ref, const Dataset& dataset,
                bool augmented) {
    if (dataset.empty()) throw std::invalid_argument("accuracy: empty dataset");
    const auto margins = per_tuple_margins(pi, ref, dataset, augmented);
    std::size_t hits = 0;
    for (double m : margins) {
        if (m > 0.0) ++hits;  // ties count as failures
    }
    return static_cast<double>(hits) / static_cast<double>(margins.size());
}

namespace {

/// Average ranks (1-based, ties share the mean rank).
std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

std::optional<double> pearson_of(std::span<const double> xs, std::span<const double> ys) {
    const std::size_t n = xs.size();
    const double mx = pairwise_mean(xs);
    const double my = pairwise_mean(ys);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx) / std::sqrt(syy);
}

/// Merge-sort inversion count (the swaps of Knight's algorithm).
std::uint64_t count_inversions(std::vector<double>& values, std::vector<double>& scratch,
                               std::size_t lo, std::size_t hi) {
    if (hi - lo <= 1) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t inv = count_inversions(values, scratch, lo, mid) +
                        count_inversions(values, scratch, mid, hi);
    std::size_t a = lo, b = mid, out = lo;
    while (a < mid && b < hi) {
        if (values[b] < values[a]) {
            inv += mid - a;
            scratch[out++] = values[b++];
        } else {
            scratch[out++] = values[a++];
        }
    }
    while (a < mid) scratch[out++] = values[a++];
    while (b < hi) scratch[out++] = values[b++];
    std::copy(scratch.begin() + lo, scratch.begin() + hi, values.begin() + lo);
    return inv;
}

std::uint64_t tie_pair_count(std::span<const double> sorted) {
    std::uint64_t ties = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        const std::uint64_t g = j - i + 1;
        ties += g * (g - 1) / 2;
        i = j + 1;
    }
    return ties;
}

/// Kendall tau-b via Knight's O(n log n) construction: sort by (x, y), count
/// discordant pairs as merge-sort inversions in y, correct for ties.
std::optional<double> kendall_tau_b(std::span<const double> xs, std::span<const double> ys) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (xs[a] != xs[b]) return xs[a] < xs[b];
        return ys[a] < ys[b];
    });

    std::uint64_t xtie = 0, joint_tie = 0;
    {
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
            const std::uint64_t g = j - i + 1;
            xtie += g * (g - 1) / 2;
            std::size_t k = i;
            while (k <= j) {
                std::size_t m = k;
                while (m + 1 <= j && ys[order[m + 1]] == ys[order[k]]) ++m;
                const std::uint64_t gg = m - k + 1;
                joint_tie += gg * (gg - 1) / 2;
                k = m + 1;
            }
            i = j + 1;
        }
    }

    std::vector<double> y_in_x_order(n), scratch(n);
    for (std::size_t i = 0; i < n; ++i) y_in_x_order[i] = ys[order[i]];
    const std::uint64_t discordant = count_inversions(y_in_x_order, scratch, 0, n);
    // y_in_x_order is now sorted; tie counting reuses it
    const std::uint64_t ytie = tie_pair_count(y_in_x_order);

    const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    if (xtie == total || ytie == total) return std::nullopt;
    const double con_minus_dis = static_cast<double>(total) - static_cast<double>(xtie) -
                                 static_cast<double>(ytie) + static_cast<double>(joint_tie) -
                                 2.0 * static_cast<double>(discordant);
    return con_minus_dis / std::sqrt(static_cast<double>(total - xtie)) /
           std::sqrt(static_cast<double>(total - ytie));
}

}  // namespace

CorrelationTriple correlations(std::span<const double> margins, std::span<const double> gaps) {
    if (margins.size() != gaps.size()) {
        throw std::invalid_argument("correlations: length mismatch (" +
                                    std::to_string(margins.size()) + " vs " +
                                    std::to_string(gaps.size()) + ")");
    }
    if (margins.size() < 3) {
        throw std::invalid_argument("correlations: need at least 3 paired samples");
    }
    CorrelationTriple out;
    out.pearson = pearson_of(margins, gaps);
    const auto rank_m = average_ranks(margins);
    const auto rank_g = average_ranks(gaps);
    out.spearman = pearson_of(rank_m, rank_g);
    out.kendall_tau = kendall_tau_b(margins, gaps);
    return out;
}

namespace {

std::size_t emit_response(const PolicyTable& policy, std::size_t query, JudgeMode::Kind kind,
                          double level) {
    const ContextId c{query, false};
    std::vector<double> probs;
    policy.softmax_row(policy.row_of(c), probs);
    if (kind == JudgeMode::Kind::argmax) {
        std::size_t best = 0;
        for (std::size_t y = 1; y < probs.size(); ++y) {
            if (probs[y] > probs[best]) best = y;
        }
        return best;
    }
    double cum = 0.0;
    for (std::size_t y = 0; y < probs.size(); ++y) {
        cum += probs[y];
        if (level < cum) return y;
    }
    return probs.size() - 1;
}

}  // namespace

JudgeOutcome judge_compare(const PolicyTable& policy_a, const PolicyTable& policy_b,
                           const PolicyTable& ref, const GroundTruth& gt,
                           std::span<const std::size_t> queries, JudgeMode mode) {
    (void)ref;  // part of the protocol signature; emission reads the policies alone
    if (queries.empty()) throw std::invalid_argument("judge_compare: empty query list");
    Rng rng(mode.seed);
    std::size_t wins = 0, ties = 0, losses = 0;
    for (std::size_t q : queries) {
        // one random level per query, shared by both policies: identical
        // policies always tie and swapping the policies swaps the outcome
        const double level = mode.kind == JudgeMode::Kind::sample ? rng.uniform() : 0.0;
        const std::size_t ya = emit_response(policy_a, q, mode.kind, level);
        const std::size_t yb = emit_response(policy_b, q, mode.kind, level);
        const int sa = gt.judge_score(q, ya);
        const int sb = gt.judge_score(q, yb);
        if (sa > sb) {
            ++wins;
        } else if (sa < sb) {
            ++losses;
        } else {
            ++ties;
        }
    }
    const double n = static_cast<double>(queries.size());
    return {wins / n, ties / n, losses / n};
}

MetricsReport evaluate_metrics(const PolicyTable& pi, const PolicyTable& ref,
                               const Dataset& dataset) {
    MetricsReport report;
    report.avg_marginal = average_marginal(pi, ref, dataset);
    report.accuracy = accuracy(pi, ref, dataset, false);
    report.aug_accuracy = pi.has_aug_map() && ref.has_aug_map()
                              ? accuracy(pi, ref, dataset, true)
                              : std::numeric_limits<double>::quiet_NaN();

    const auto margins = per_tuple_margins(pi, ref, dataset, false);
    std::vector<double> m_sub, g_sub;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (dataset.tuples[i].true_gap) {
            m_sub.push_back(margins[i]);
            g_sub.push_back(*dataset.tuples[i].true_gap);
        }
    }
    if (m_sub.size() >= 3) {
        const auto corr = correlations(m_sub, g_sub);
        report.pearson = corr.pearson;
        report.spearman = corr.spearman;
        report.kendall_tau = corr.kendall_tau;
    }
    return report;
}

std::string metrics_csv_header() {
    return "step,loss,avg_marginal,accuracy,aug_accuracy,pearson,spearman,kendall_tau";
}

namespace {

void append_csv_value(std::ostringstream& out, double v) {
    out << ',';
    if (std::isfinite(v)) out << v;
}

void append_csv_optional(std::ostringstream& out, const std::optional<double>& v) {
    out << ',';
    if (v) out << *v;
}

}  // namespace

std::string metrics_csv_row(std::size_t step, double loss, const MetricsReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << step;
    append_csv_value(out, loss);
    append_csv_value(out, report.avg_marginal);
    append_csv_value(out, report.accuracy);
    append_csv_value(out, report.aug_accuracy);
    append_csv_optional(out, report.pearson);
    append_csv_optional(out, report.spearman);
    append_csv_optional(out, report.kendall_tau);
    return out.str();
}

}  // namespace prefopt
