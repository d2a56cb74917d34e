#include "prefopt/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "prefopt/errors.hpp"

namespace prefopt {

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log_sigmoid(double x) {
    if (x >= 0.0) {
        return -std::log1p(std::exp(-x));
    }
    return x - std::log1p(std::exp(x));
}

double bt_probability(double r_pos, double r_neg) {
    if (!std::isfinite(r_pos) || !std::isfinite(r_neg)) {
        throw std::domain_error("bt_probability requires finite rewards");
    }
    return stable_sigmoid(r_pos - r_neg);
}

double bt_log_likelihood(std::span<const std::pair<double, double>> batch) {
    if (batch.empty()) {
        throw std::invalid_argument("bt_log_likelihood: empty batch");
    }
    std::vector<double> terms(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!std::isfinite(batch[i].first) || !std::isfinite(batch[i].second)) {
            throw std::domain_error("bt_log_likelihood requires finite rewards");
        }
        terms[i] = log_sigmoid(batch[i].first - batch[i].second);
    }
    return pairwise_mean(terms);
}

GroundTruth::GroundTruth(Matrix rewards, double prompt_gain)
    : rewards_(std::move(rewards)), prompt_gain_(prompt_gain) {
    if (rewards_.size() == 0) {
        throw config_error("ground truth reward table is empty");
    }
    if (prompt_gain_ < 0.0) {
        throw config_error("prompt_gain must be >= 0");
    }
    min_reward_ = rewards_.data()[0];
    max_reward_ = rewards_.data()[0];
    for (double v : rewards_.data()) {
        if (!std::isfinite(v)) throw config_error("ground truth rewards must be finite");
        min_reward_ = std::min(min_reward_, v);
        max_reward_ = std::max(max_reward_, v);
    }
}

double GroundTruth::reward(std::size_t query, std::size_t response) const {
    if (query >= num_queries()) {
        throw std::out_of_range("query index " + std::to_string(query) + " out of range [0, " +
                                std::to_string(num_queries()) + ")");
    }
    if (response >= num_responses()) {
        throw std::out_of_range("response index " + std::to_string(response) +
                                " out of range [0, " + std::to_string(num_responses()) + ")");
    }
    return rewards_(query, response);
}

bool GroundTruth::has_ties() const {
    for (std::size_t q = 0; q < num_queries(); ++q) {
        for (std::size_t a = 0; a < num_responses(); ++a) {
            for (std::size_t b = a + 1; b < num_responses(); ++b) {
                if (rewards_(q, a) == rewards_(q, b)) return true;
            }
        }
    }
    return false;
}

std::size_t GroundTruth::argmax_response(std::size_t query) const {
    std::size_t best = 0;
    for (std::size_t y = 1; y < num_responses(); ++y) {
        if (rewards_(query, y) > rewards_(query, best)) best = y;
    }
    return best;
}

int GroundTruth::judge_score(std::size_t query, std::size_t response) const {
    const double r = reward(query, response);
    if (max_reward_ == min_reward_) return 0;
    const double unit = (r - min_reward_) / (max_reward_ - min_reward_);
    return static_cast<int>(std::lround(unit * 5.0));
}

std::string GroundTruth::to_json() const {
    nlohmann::json doc;
    auto rows = nlohmann::json::array();
    for (std::size_t q = 0; q < num_queries(); ++q) {
        auto row = nlohmann::json::array();
        for (std::size_t y = 0; y < num_responses(); ++y) row.push_back(rewards_(q, y));
        rows.push_back(std::move(row));
    }
    doc["rewards"] = std::move(rows);
    doc["prompt_gain"] = prompt_gain_;
    return doc.dump();
}

GroundTruth GroundTruth::from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error(std::string("ground truth JSON parse failure: ") + e.what());
    }
    const auto& rows = doc.at("rewards");
    if (rows.empty() || rows.at(0).empty()) {
        throw config_error("ground truth JSON: rewards must be a non-empty matrix");
    }
    Matrix rewards(rows.size(), rows.at(0).size());
    for (std::size_t q = 0; q < rows.size(); ++q) {
        const auto& row = rows.at(q);
        if (row.size() != rewards.cols()) {
            throw config_error("ground truth JSON: ragged reward matrix at row " +
                               std::to_string(q));
        }
        for (std::size_t y = 0; y < row.size(); ++y) rewards(q, y) = row.at(y).get<double>();
    }
    return GroundTruth(std::move(rewards), doc.at("prompt_gain").get<double>());
}

}  // namespace prefopt
