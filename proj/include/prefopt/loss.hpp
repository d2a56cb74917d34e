#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prefopt/dataset.hpp"
#include "prefopt/matrix.hpp"
#include "prefopt/policy.hpp"

namespace prefopt {

enum class Method { dpo, ipo, sr_dpo, sr_ipo };

Method method_from_string(const std::string& name);
std::string method_name(Method m);

/// Scalar loss over a minibatch plus its exact reverse-mode gradient with
/// respect to the trainable policy's logits. Gradient rows for contexts
/// absent from the batch (and absent from every aug(x) of the batch when the
/// refinement is undetached) are exactly zero.
struct LossBatchResult {
    double loss = 0.0;
    Matrix gradient;
    std::vector<double> per_tuple_margin;  // beta-scaled log-ratio difference
    std::vector<double> per_tuple_delta;   // refinement value, 0 where unused
};

using Batch = std::span<const PreferenceTuple>;

/// -mean log sigma(beta * margin).
LossBatchResult dpo_loss(const PolicyTable& pi, const PolicyTable& ref, Batch batch, double beta);

/// mean (margin - 1/(2 beta))^2, margin unscaled.
LossBatchResult ipo_loss(const PolicyTable& pi, const PolicyTable& ref, Batch batch, double beta);

/// -mean log sigma(beta * margin - lambda * Delta), Delta from delta_refine.
/// With detach_delta the refinement enters as a constant; lambda = 0
/// reproduces dpo_loss bit for bit.
LossBatchResult sr_dpo_loss(const PolicyTable& pi, const PolicyTable& ref, Batch batch,
                            double beta, double lambda, bool detach_delta = true);

/// mean (margin - lambda * Delta - 1/(2 beta))^2, margin unscaled, Delta from
/// delta_refine (which keeps its internal beta factor). lambda = 0 reproduces
/// ipo_loss exactly.
LossBatchResult sr_ipo_loss(const PolicyTable& pi, const PolicyTable& ref, Batch batch,
                            double beta, double lambda, bool detach_delta = true);

/// The logistic loss with the raw-query refinement left undetached: the
/// configuration the naive construction degenerates in.
LossBatchResult sr_dpo_naive_loss(const PolicyTable& pi, const PolicyTable& ref, Batch batch,
                                  double beta, double lambda);

/// Evaluates both sides of the degeneracy: first the undetached naive loss at
/// (beta, lambda), then plain DPO at beta * (1 - lambda). The two agree to
/// 1e-12 in value and 1e-10 in gradient. lambda >= 1 is rejected (sign flip).
std::pair<double, double> sr_dpo_naive_degeneracy(const PolicyTable& pi, const PolicyTable& ref,
                                                  Batch batch, double beta, double lambda);

/// Method dispatch used by the trainer.
LossBatchResult evaluate_loss(Method method, const PolicyTable& pi, const PolicyTable& ref,
                              Batch batch, double beta, double lambda, bool detach_delta = true);

}  // namespace prefopt
