#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "prefopt/matrix.hpp"

namespace prefopt {

/// Identifies a context row. Base queries carry `augmented = false`; the
/// prompt-augmented counterpart of base query i is ContextId{i, true} and is
/// resolved through the policy's augmentation map. Augmented contexts are
/// never sampled as training queries, only reached through aug().
struct ContextId {
    std::size_t index = 0;
    bool augmented = false;

    bool operator==(const ContextId&) const = default;
};

/// The prompt-augmented counterpart of a base context.
inline ContextId aug(ContextId base) { return {base.index, true}; }

using ResponseId = std::size_t;

/// Categorical softmax policy over a finite response set, conditioned on a
/// finite context set (base queries first, then their augmented rows). The
/// per-row normalizer lives implicitly in logsumexp and cancels in every
/// quantity the project computes, so it is never materialized.
class PolicyTable {
public:
    PolicyTable() = default;

    /// Table without augmented contexts: num_contexts rows, no aug map.
    PolicyTable(std::size_t num_contexts, std::size_t num_responses, bool trainable);

    /// Table whose first num_base rows are base queries and which owns an
    /// explicit aug map (aug_map[i] = row of the augmented counterpart).
    PolicyTable(std::size_t num_base, std::vector<std::size_t> aug_map,
                std::size_t num_responses, bool trainable);

    std::size_t num_contexts() const { return logits_.rows(); }
    std::size_t num_responses() const { return logits_.cols(); }
    std::size_t num_base_contexts() const { return has_aug_map() ? aug_map_.size() : num_contexts(); }
    bool has_aug_map() const { return !aug_map_.empty(); }
    bool trainable() const { return trainable_; }

    const std::vector<std::size_t>& aug_map() const { return aug_map_; }

    /// Resolves a ContextId to a logits row. Throws std::out_of_range naming
    /// the offending dimension; augmented lookups without an aug map throw
    /// config_error.
    std::size_t row_of(ContextId c) const;

    void check_response(ResponseId y) const;

    Matrix& logits() { return logits_; }
    const Matrix& logits() const { return logits_; }

    /// log pi(y | c) = logits[c][y] - logsumexp(logits[c][.]).
    double log_prob(ContextId c, ResponseId y) const;

    /// logsumexp of a logits row; max-shifted, finite for finite logits.
    double logsumexp_row(std::size_t row) const;

    /// softmax of a row, written into `out` (resized).
    void softmax_row(std::size_t row, std::vector<double>& out) const;

    /// Deep copy with trainability overridden.
    PolicyTable clone(bool trainable) const;

    std::string to_json() const;
    static PolicyTable from_json(const std::string& text);

private:
    Matrix logits_;
    std::vector<std::size_t> aug_map_;
    bool trainable_ = false;
};

/// beta * [(log pi/ref)(y_pos | c) - (log pi/ref)(y_neg | c)]: the closed-form
/// implicit reward difference, normalizer cancelled. Antisymmetric in
/// (y_pos, y_neg) and invariant to per-row logit shifts of either table.
double implicit_reward_diff(const PolicyTable& pi, const PolicyTable& ref, ContextId c,
                            ResponseId y_pos, ResponseId y_neg, double beta);

}  // namespace prefopt
