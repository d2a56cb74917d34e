#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

namespace prefopt {

/// One labeled preference: base query x with positive/negative responses.
/// true_gap = r*(y_pos|x) - r*(y_neg|x), recorded only when the label is
/// guaranteed to honor r* (deterministic generation); judge_scores are the
/// quantized oracle scores (s+, s-) standing in for an external grader.
struct PreferenceTuple {
    std::size_t query = 0;
    std::size_t y_pos = 0;
    std::size_t y_neg = 0;
    std::optional<double> true_gap;
    std::optional<std::pair<double, double>> judge_scores;
};

struct Dataset {
    std::size_t num_queries = 0;
    std::size_t num_responses = 0;
    std::vector<PreferenceTuple> tuples;

    std::size_t size() const { return tuples.size(); }
    bool empty() const { return tuples.empty(); }
};

}  // namespace prefopt
