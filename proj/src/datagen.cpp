#include "prefopt/datagen.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "prefopt/errors.hpp"

namespace prefopt {

RewardDistribution RewardDistribution::parse(const std::string& text) {
    const auto open = text.find('(');
    const auto close = text.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        throw config_error("cannot parse reward distribution '" + text +
                           "'; expected kind(args), e.g. uniform(0,1)");
    }
    const std::string kind = text.substr(0, open);
    std::vector<double> args;
    std::stringstream body(text.substr(open + 1, close - open - 1));
    std::string piece;
    while (std::getline(body, piece, ',')) {
        try {
            args.push_back(std::stod(piece));
        } catch (const std::exception&) {
            throw config_error("bad numeric argument '" + piece + "' in distribution '" + text + "'");
        }
    }
    RewardDistribution d;
    if (kind == "uniform" && args.size() == 2) {
        d.kind = Kind::uniform;
        d.a = args[0];
        d.b = args[1];
    } else if (kind == "gaussian" && args.size() == 2) {
        d.kind = Kind::gaussian;
        d.a = args[0];
        d.b = args[1];
    } else if (kind == "two_cluster" && args.size() == 3) {
        d.kind = Kind::two_cluster;
        d.a = args[0];
        d.b = args[1];
        d.mix = args[2];
    } else {
        throw config_error("unknown reward distribution '" + text +
                           "'; expected uniform(lo,hi), gaussian(mu,sigma), or "
                           "two_cluster(gap_small,gap_large,mix)");
    }
    return d;
}

std::string RewardDistribution::to_string() const {
    std::ostringstream out;
    out.precision(17);
    switch (kind) {
        case Kind::uniform: out << "uniform(" << a << "," << b << ")"; break;
        case Kind::gaussian: out << "gaussian(" << a << "," << b << ")"; break;
        case Kind::two_cluster: out << "two_cluster(" << a << "," << b << "," << mix << ")"; break;
    }
    return out.str();
}

void ScenarioSpec::validate() const {
    if (num_queries == 0) throw std::invalid_argument("num_queries must be positive");
    if (num_responses < 2) throw std::invalid_argument("num_responses must be at least 2");
    if (tuples_per_query == 0) throw std::invalid_argument("tuples_per_query must be positive");
    if (label_noise < 0.0 || label_noise >= 0.5) {
        throw std::invalid_argument("label_noise must lie in [0, 0.5)");
    }
    if (!(prompt_gain > 0.0)) throw std::invalid_argument("prompt_gain must be positive");
    switch (reward_distribution.kind) {
        case RewardDistribution::Kind::uniform:
            if (!(reward_distribution.a < reward_distribution.b)) {
                throw std::invalid_argument("uniform distribution requires lo < hi");
            }
            break;
        case RewardDistribution::Kind::gaussian:
            if (!(reward_distribution.b > 0.0)) {
                throw std::invalid_argument("gaussian distribution requires sigma > 0");
            }
            break;
        case RewardDistribution::Kind::two_cluster:
            if (!(reward_distribution.a < reward_distribution.b)) {
                throw std::invalid_argument("two_cluster requires gap_small < gap_large");
            }
            if (!(reward_distribution.mix > 0.0 && reward_distribution.mix < 1.0)) {
                throw std::invalid_argument("two_cluster mix must lie in (0, 1)");
            }
            break;
    }
}

std::string ScenarioSpec::to_json() const {
    nlohmann::json doc;
    doc["num_queries"] = num_queries;
    doc["num_responses"] = num_responses;
    doc["reward_distribution"] = reward_distribution.to_string();
    doc["label_noise"] = label_noise;
    doc["tuples_per_query"] = tuples_per_query;
    doc["seed"] = seed;
    doc["prompt_gain"] = prompt_gain;
    return doc.dump();
}

ScenarioSpec ScenarioSpec::from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error(std::string("scenario JSON parse failure: ") + e.what());
    }
    ScenarioSpec s;
    if (doc.contains("num_queries")) s.num_queries = doc["num_queries"].get<std::size_t>();
    if (doc.contains("num_responses")) s.num_responses = doc["num_responses"].get<std::size_t>();
    if (doc.contains("reward_distribution")) {
        s.reward_distribution = RewardDistribution::parse(doc["reward_distribution"].get<std::string>());
    }
    if (doc.contains("label_noise")) s.label_noise = doc["label_noise"].get<double>();
    if (doc.contains("tuples_per_query")) s.tuples_per_query = doc["tuples_per_query"].get<std::size_t>();
    if (doc.contains("seed")) s.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("prompt_gain")) s.prompt_gain = doc["prompt_gain"].get<double>();
    return s;
}

bool label_prefers_first(double r_a, double r_b, double label_noise, Rng& rng) {
    if (label_noise == 0.0) return r_a > r_b;
    return rng.bernoulli(stable_sigmoid(r_a - r_b));
}

namespace {

bool row_has_ties(const Matrix& rewards, std::size_t q) {
    std::set<double> seen;
    for (std::size_t y = 0; y < rewards.cols(); ++y) {
        if (!seen.insert(rewards(q, y)).second) return true;
    }
    return false;
}

void fill_reward_row(Matrix& rewards, std::size_t q, const RewardDistribution& dist, Rng& rng) {
    const std::size_t R = rewards.cols();
    const std::size_t low_count = (R + 1) / 2;
    for (int attempt = 0; attempt < 64; ++attempt) {
        for (std::size_t y = 0; y < R; ++y) {
            switch (dist.kind) {
                case RewardDistribution::Kind::uniform:
                    rewards(q, y) = rng.uniform(dist.a, dist.b);
                    break;
                case RewardDistribution::Kind::gaussian:
                    rewards(q, y) = rng.normal(dist.a, dist.b);
                    break;
                case RewardDistribution::Kind::two_cluster:
                    // low band [0, gap_small), high band [gap_large, gap_large + gap_small)
                    rewards(q, y) = y < low_count ? rng.uniform(0.0, dist.a)
                                                  : rng.uniform(dist.b, dist.b + dist.a);
                    break;
            }
        }
        if (!row_has_ties(rewards, q)) return;  // ties are resampled
    }
    throw std::runtime_error("could not draw a tie-free reward row after 64 attempts");
}

struct PairDraw {
    std::size_t a, b;
    bool cross_band = false;
};

PairDraw draw_pair(const RewardDistribution& dist, std::size_t R, Rng& rng) {
    if (dist.kind == RewardDistribution::Kind::two_cluster && R >= 3) {
        const std::size_t low_count = (R + 1) / 2;
        const std::size_t high_count = R - low_count;
        if (rng.bernoulli(dist.mix)) {
            // across bands: true gap lands near gap_large
            const std::size_t lo = rng.uniform_index(low_count);
            const std::size_t hi = low_count + rng.uniform_index(high_count);
            return {lo, hi, true};
        }
        // within one band; bands with fewer than two members are not eligible
        const bool low_eligible = low_count >= 2;
        const bool high_eligible = high_count >= 2;
        const bool use_low = low_eligible && (!high_eligible || rng.bernoulli(0.5));
        const std::size_t count = use_low ? low_count : high_count;
        const std::size_t base = use_low ? 0 : low_count;
        const std::size_t first = rng.uniform_index(count);
        std::size_t second = rng.uniform_index(count - 1);
        if (second >= first) ++second;
        return {base + first, base + second, false};
    }
    const std::size_t first = rng.uniform_index(R);
    std::size_t second = rng.uniform_index(R - 1);
    if (second >= first) ++second;
    return {first, second, false};
}

}  // namespace

std::pair<GroundTruth, Dataset> generate(const ScenarioSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    Matrix rewards(spec.num_queries, spec.num_responses);
    for (std::size_t q = 0; q < spec.num_queries; ++q) {
        fill_reward_row(rewards, q, spec.reward_distribution, rng);
    }
    GroundTruth gt(std::move(rewards), spec.prompt_gain);

    Dataset ds;
    ds.num_queries = spec.num_queries;
    ds.num_responses = spec.num_responses;
    ds.tuples.reserve(spec.num_queries * spec.tuples_per_query);

    for (std::size_t q = 0; q < spec.num_queries; ++q) {
        for (std::size_t t = 0; t < spec.tuples_per_query; ++t) {
            const PairDraw pair = draw_pair(spec.reward_distribution, spec.num_responses, rng);
            const double r_a = gt.reward(q, pair.a);
            const double r_b = gt.reward(q, pair.b);
            const bool a_wins = label_prefers_first(r_a, r_b, spec.label_noise, rng);

            PreferenceTuple tuple;
            tuple.query = q;
            tuple.y_pos = a_wins ? pair.a : pair.b;
            tuple.y_neg = a_wins ? pair.b : pair.a;
            if (spec.label_noise == 0.0) {
                tuple.true_gap = gt.reward(q, tuple.y_pos) - gt.reward(q, tuple.y_neg);
            }
            tuple.judge_scores = {static_cast<double>(gt.judge_score(q, tuple.y_pos)),
                                  static_cast<double>(gt.judge_score(q, tuple.y_neg))};
            ds.tuples.push_back(tuple);
        }
    }
    return {std::move(gt), std::move(ds)};
}

std::pair<PolicyTable, PolicyTable> make_assumption_satisfying_policies(const GroundTruth& gt,
                                                                        double beta,
                                                                        double prompt_gain) {
    if (!(prompt_gain > 0.0)) throw std::invalid_argument("prompt_gain must be positive");
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");

    const std::size_t B = gt.num_queries();
    const std::size_t R = gt.num_responses();
    std::vector<std::size_t> aug_map(B);
    for (std::size_t i = 0; i < B; ++i) aug_map[i] = B + i;

    PolicyTable ref(B, aug_map, R, false);  // uniform rows everywhere
    PolicyTable pi(B, aug_map, R, true);

    // Base rows: mild monotone-in-r* perturbation; augmented rows: the log
    // ratio against the uniform reference equals (prompt_gain / beta) * r*
    // plus a row constant, so the implicit reward at aug(x) orders exactly
    // as r*.
    constexpr double kBaseScale = 0.05;
    for (std::size_t q = 0; q < B; ++q) {
        for (std::size_t y = 0; y < R; ++y) {
            pi.logits()(q, y) = kBaseScale * gt.reward(q, y);
            pi.logits()(B + q, y) = (prompt_gain / beta) * gt.reward(q, y);
        }
    }
    return {std::move(pi), std::move(ref)};
}

void save_jsonl(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    nlohmann::json header;
    header["num_queries"] = dataset.num_queries;
    header["num_responses"] = dataset.num_responses;
    out << header.dump() << "\n";
    for (const auto& t : dataset.tuples) {
        nlohmann::json line;
        line["query"] = t.query;
        line["y_pos"] = t.y_pos;
        line["y_neg"] = t.y_neg;
        if (t.true_gap) line["true_gap"] = *t.true_gap;
        if (t.judge_scores) line["judge_scores"] = {t.judge_scores->first, t.judge_scores->second};
        out << line.dump() << "\n";
    }
    if (!out) throw std::runtime_error("short write to '" + path + "'");
}

Dataset load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");

    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty()) return true;
        }
        return false;
    };

    if (!next_line()) throw config_error("dataset '" + path + "' is empty");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error("parse error at line " + std::to_string(line_no) + ": " + e.what());
    }
    Dataset ds;
    if (!header.contains("num_queries") || !header.contains("num_responses")) {
        throw config_error("line " + std::to_string(line_no) +
                           ": header must declare num_queries and num_responses");
    }
    ds.num_queries = header["num_queries"].get<std::size_t>();
    ds.num_responses = header["num_responses"].get<std::size_t>();

    while (next_line()) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw config_error("parse error at line " + std::to_string(line_no) + ": " + e.what());
        }
        PreferenceTuple t;
        try {
            t.query = doc.at("query").get<std::size_t>();
            t.y_pos = doc.at("y_pos").get<std::size_t>();
            t.y_neg = doc.at("y_neg").get<std::size_t>();
            if (doc.contains("true_gap") && !doc["true_gap"].is_null()) {
                t.true_gap = doc["true_gap"].get<double>();
            }
            if (doc.contains("judge_scores") && !doc["judge_scores"].is_null()) {
                const auto& js = doc["judge_scores"];
                if (!js.is_array() || js.size() != 2) {
                    throw config_error("judge_scores must be a pair");
                }
                t.judge_scores = {js.at(0).get<double>(), js.at(1).get<double>()};
            }
        } catch (const nlohmann::json::exception& e) {
            throw config_error("parse error at line " + std::to_string(line_no) + ": " + e.what());
        }
        if (t.query >= ds.num_queries) {
            throw config_error("validation error at line " + std::to_string(line_no) +
                               ": query " + std::to_string(t.query) + " out of range [0, " +
                               std::to_string(ds.num_queries) + ")");
        }
        if (t.y_pos >= ds.num_responses || t.y_neg >= ds.num_responses) {
            throw config_error("validation error at line " + std::to_string(line_no) +
                               ": response index out of range [0, " +
                               std::to_string(ds.num_responses) + ")");
        }
        if (t.y_pos == t.y_neg) {
            throw config_error("validation error at line " + std::to_string(line_no) +
                               ": y_pos == y_neg (" + std::to_string(t.y_pos) + ")");
        }
        if (t.true_gap && !(*t.true_gap > 0.0)) {
            throw config_error("validation error at line " + std::to_string(line_no) +
                               ": true_gap must be positive when present");
        }
        ds.tuples.push_back(std::move(t));
    }
    if (ds.tuples.empty()) throw config_error("dataset '" + path + "' contains no tuples");
    return ds;
}

}  // namespace prefopt
