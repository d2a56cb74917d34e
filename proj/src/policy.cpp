#include "prefopt/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "prefopt/errors.hpp"

namespace prefopt {

double pairwise_sum(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

PolicyTable::PolicyTable(std::size_t num_contexts, std::size_t num_responses, bool trainable)
    : logits_(num_contexts, num_responses, 0.0), trainable_(trainable) {}

PolicyTable::PolicyTable(std::size_t num_base, std::vector<std::size_t> aug_map,
                         std::size_t num_responses, bool trainable)
    : aug_map_(std::move(aug_map)), trainable_(trainable) {
    if (aug_map_.size() != num_base) {
        throw config_error("aug map must cover every base context (" +
                           std::to_string(aug_map_.size()) + " entries for " +
                           std::to_string(num_base) + " base contexts)");
    }
    std::size_t num_contexts = num_base;
    for (std::size_t target : aug_map_) num_contexts = std::max(num_contexts, target + 1);
    for (std::size_t i = 0; i < aug_map_.size(); ++i) {
        if (aug_map_[i] < num_base) {
            throw config_error("aug map entry " + std::to_string(i) +
                               " points into the base context range");
        }
        for (std::size_t j = i + 1; j < aug_map_.size(); ++j) {
            if (aug_map_[i] == aug_map_[j]) {
                throw config_error("aug map is not injective: contexts " + std::to_string(i) +
                                   " and " + std::to_string(j) + " share row " +
                                   std::to_string(aug_map_[i]));
            }
        }
    }
    logits_ = Matrix(num_contexts, num_responses, 0.0);
}

std::size_t PolicyTable::row_of(ContextId c) const {
    if (!c.augmented) {
        if (c.index >= num_base_contexts()) {
            throw std::out_of_range("context index " + std::to_string(c.index) +
                                    " out of range [0, " + std::to_string(num_base_contexts()) +
                                    ")");
        }
        return c.index;
    }
    if (!has_aug_map()) {
        throw config_error("policy table has no augmentation map but an augmented context was requested");
    }
    if (c.index >= aug_map_.size()) {
        throw std::out_of_range("context index " + std::to_string(c.index) +
                                " out of range [0, " + std::to_string(aug_map_.size()) +
                                ") for augmented lookup");
    }
    return aug_map_[c.index];
}

void PolicyTable::check_response(ResponseId y) const {
    if (y >= num_responses()) {
        throw std::out_of_range("response index " + std::to_string(y) + " out of range [0, " +
                                std::to_string(num_responses()) + ")");
    }
}

double PolicyTable::logsumexp_row(std::size_t row) const {
    const auto r = logits_.row(row);
    double m = r[0];
    for (double v : r) m = std::max(m, v);
    double s = 0.0;
    for (double v : r) s += std::exp(v - m);
    return m + std::log(s);
}

void PolicyTable::softmax_row(std::size_t row, std::vector<double>& out) const {
    const auto r = logits_.row(row);
    out.resize(r.size());
    double m = r[0];
    for (double v : r) m = std::max(m, v);
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        out[i] = std::exp(r[i] - m);
        s += out[i];
    }
    for (double& v : out) v /= s;
}

double PolicyTable::log_prob(ContextId c, ResponseId y) const {
    const std::size_t row = row_of(c);
    check_response(y);
    return logits_(row, y) - logsumexp_row(row);
}

PolicyTable PolicyTable::clone(bool trainable) const {
    PolicyTable copy = *this;
    copy.trainable_ = trainable;
    return copy;
}

std::string PolicyTable::to_json() const {
    nlohmann::json doc;
    doc["num_contexts"] = num_contexts();
    doc["num_responses"] = num_responses();
    doc["aug_map"] = aug_map_;
    auto rows = nlohmann::json::array();
    for (std::size_t r = 0; r < num_contexts(); ++r) {
        auto row = nlohmann::json::array();
        for (std::size_t c = 0; c < num_responses(); ++c) row.push_back(logits_(r, c));
        rows.push_back(std::move(row));
    }
    doc["logits"] = std::move(rows);
    return doc.dump();
}

PolicyTable PolicyTable::from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error(std::string("policy JSON parse failure: ") + e.what());
    }
    const std::size_t num_contexts = doc.at("num_contexts").get<std::size_t>();
    const std::size_t num_responses = doc.at("num_responses").get<std::size_t>();
    std::vector<std::size_t> aug_map = doc.at("aug_map").get<std::vector<std::size_t>>();

    PolicyTable table;
    if (aug_map.empty()) {
        table = PolicyTable(num_contexts, num_responses, false);
    } else {
        const std::size_t num_base = num_contexts - aug_map.size();
        table = PolicyTable(num_base, std::move(aug_map), num_responses, false);
    }
    if (table.num_contexts() != num_contexts) {
        throw config_error("policy JSON: aug_map and num_contexts disagree");
    }
    const auto& rows = doc.at("logits");
    if (rows.size() != num_contexts) {
        throw config_error("policy JSON: logits row count " + std::to_string(rows.size()) +
                           " != num_contexts " + std::to_string(num_contexts));
    }
    for (std::size_t r = 0; r < num_contexts; ++r) {
        const auto& row = rows.at(r);
        if (row.size() != num_responses) {
            throw config_error("policy JSON: row " + std::to_string(r) + " has " +
                               std::to_string(row.size()) + " entries, expected " +
                               std::to_string(num_responses));
        }
        for (std::size_t c = 0; c < num_responses; ++c) {
            table.logits()(r, c) = row.at(c).get<double>();
        }
    }
    return table;
}

double implicit_reward_diff(const PolicyTable& pi, const PolicyTable& ref, ContextId c,
                            ResponseId y_pos, ResponseId y_neg, double beta) {
    if (!pi.logits().same_shape(ref.logits())) {
        throw config_error("policy and reference tables differ in shape: " +
                           std::to_string(pi.num_contexts()) + "x" +
                           std::to_string(pi.num_responses()) + " vs " +
                           std::to_string(ref.num_contexts()) + "x" +
                           std::to_string(ref.num_responses()));
    }
    if (!(beta > 0.0)) {
        throw std::invalid_argument("beta must be positive, got " + std::to_string(beta));
    }
    const double pos = pi.log_prob(c, y_pos) - ref.log_prob(c, y_pos);
    const double neg = pi.log_prob(c, y_neg) - ref.log_prob(c, y_neg);
    return beta * (pos - neg);
}

}  // namespace prefopt
