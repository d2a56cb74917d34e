#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prefopt/matrix.hpp"

namespace prefopt {

/// sigma(x), branch form: no overflow for any finite x.
double stable_sigmoid(double x);

/// log sigma(x) = -log1p(exp(-x)) for x >= 0, x - log1p(exp(x)) otherwise.
double log_sigmoid(double x);

/// Bradley-Terry preference probability sigma(r_pos - r_neg).
/// Throws std::domain_error on non-finite input.
double bt_probability(double r_pos, double r_neg);

/// Mean of log sigma(r_pos - r_neg) over the batch; <= 0, equals -ln 2 when
/// every pair ties. Throws std::invalid_argument on an empty batch.
double bt_log_likelihood(std::span<const std::pair<double, double>> batch);

/// Ground-truth reward table r*(y|x) over base queries. Drives data
/// generation and brute-force verification; never visible to training.
class GroundTruth {
public:
    GroundTruth() = default;
    GroundTruth(Matrix rewards, double prompt_gain);

    std::size_t num_queries() const { return rewards_.rows(); }
    std::size_t num_responses() const { return rewards_.cols(); }
    double prompt_gain() const { return prompt_gain_; }

    double reward(std::size_t query, std::size_t response) const;
    const Matrix& rewards() const { return rewards_; }

    /// True when some query has two responses with exactly equal r*.
    /// Ties are permitted here but flagged; the generator resamples them
    /// away and the monotone-equivalence checks skip them.
    bool has_ties() const;

    std::size_t argmax_response(std::size_t query) const;

    /// Quantized evaluation score on the 0-5 integer scale, linear in r*
    /// between the table-wide min and max.
    int judge_score(std::size_t query, std::size_t response) const;

    std::string to_json() const;
    static GroundTruth from_json(const std::string& text);

private:
    Matrix rewards_;
    double prompt_gain_ = 0.0;
    double min_reward_ = 0.0;
    double max_reward_ = 0.0;
};

}  // namespace prefopt
