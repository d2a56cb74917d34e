#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "prefopt/dataset.hpp"
#include "prefopt/policy.hpp"
#include "prefopt/reward.hpp"
#include "prefopt/rng.hpp"

namespace prefopt {

/// How ground-truth rewards are laid out within a query's response set.
/// two_cluster realizes heterogeneous tuple quality: responses split into a
/// low and a high band, and a `mix` fraction of tuples pair across bands
/// (true gap ~ gap_large) while the rest stay within one band
/// (true gap <= gap_small).
struct RewardDistribution {
    enum class Kind { uniform, gaussian, two_cluster };
    Kind kind = Kind::uniform;
    double a = 0.0;  // lo | mu | gap_small
    double b = 1.0;  // hi | sigma | gap_large
    double mix = 0.5;

    static RewardDistribution parse(const std::string& text);
    std::string to_string() const;
};

struct ScenarioSpec {
    std::size_t num_queries = 10;
    std::size_t num_responses = 8;
    RewardDistribution reward_distribution;
    double label_noise = 0.0;
    std::size_t tuples_per_query = 10;
    std::uint64_t seed = 0;
    double prompt_gain = 1.0;

    void validate() const;
    std::string to_json() const;
    static ScenarioSpec from_json(const std::string& text);
};

/// Orders one response pair into (winner-first) given their true rewards.
/// Deterministic mode (label_noise == 0) follows r*; noisy mode draws the
/// winner from the Bradley-Terry probability sigma(r_a - r_b).
bool label_prefers_first(double r_a, double r_b, double label_noise, Rng& rng);

/// Draws the reward table and the labeled tuple set. Deterministic labels
/// always honor r* and carry true_gap > 0; Bradley-Terry labels may not, so
/// those tuples omit true_gap. Judge scores (quantized r*) are attached to
/// every tuple. Ties in r* are resampled away at table construction.
std::pair<GroundTruth, Dataset> generate(const ScenarioSpec& spec);

/// Builds the (pi, ref) pair whose refinement provably tracks r*: ref is
/// uniform everywhere; pi's augmented rows are (prompt_gain / beta) * r*, so
/// the implicit reward at aug(x) ranks responses exactly as r* does, and pi's
/// base rows get a mild monotone-in-r* perturbation.
std::pair<PolicyTable, PolicyTable> make_assumption_satisfying_policies(const GroundTruth& gt,
                                                                        double beta,
                                                                        double prompt_gain);

void save_jsonl(const Dataset& dataset, const std::string& path);
Dataset load_jsonl(const std::string& path);

}  // namespace prefopt
