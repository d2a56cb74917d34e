#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "prefopt/dataset.hpp"
#include "prefopt/loss.hpp"
#include "prefopt/matrix.hpp"
#include "prefopt/metrics.hpp"
#include "prefopt/policy.hpp"
#include "prefopt/rng.hpp"

namespace prefopt {

struct TrainConfig {
    Method method = Method::dpo;
    double beta = 0.1;
    double lambda = 0.0;
    double learning_rate = 1e-2;
    std::size_t batch_size = 32;
    std::size_t steps = 1000;
    std::uint64_t seed = 0;
    std::optional<double> grad_clip_norm = 1.0;
    double rmsprop_decay = 0.99;
    double rmsprop_epsilon = 1e-8;
    std::size_t eval_interval = 100;
    bool detach_delta = true;

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);

    /// FNV-1a over the canonical JSON form; pins checkpoints to their config.
    std::string hash_hex() const;
};

struct TrainState {
    std::size_t step = 0;
    PolicyTable policy;
    Matrix rms_accumulator;
    Rng rng_state{0};  // sampler state after the last completed step
};

/// Per-evaluation callback: step, minibatch loss at that step (NaN at step 0
/// before any batch is drawn), the full-dataset metrics report, and the
/// trained policy so far.
using EvalCallback = std::function<void(std::size_t step, double loss,
                                        const MetricsReport& report, const PolicyTable& policy)>;

/// Runs the minibatch training loop: epoch-shuffled sampling without
/// replacement within an epoch, method loss, optional gradient clipping,
/// RMSprop update. The trainable policy starts as a copy of `ref` unless an
/// explicit initial table is supplied (assumption-satisfying instances train
/// from their constructed pi). The reference is never mutated. Non-finite
/// loss or gradient aborts with a divergence_error naming the step and the
/// offending tuple indices.
TrainState train(const TrainConfig& config, const Dataset& dataset, const PolicyTable& ref,
                 const EvalCallback& on_eval = nullptr,
                 const std::optional<PolicyTable>& initial_policy = std::nullopt);

/// accumulator <- decay * accumulator + (1 - decay) * g^2 elementwise;
/// theta <- theta - lr * g / (sqrt(accumulator) + epsilon).
void rmsprop_step(Matrix& params, Matrix& accumulator, const Matrix& gradient, double lr,
                  double decay, double epsilon);

/// Scales the gradient to max_norm when its L2 norm exceeds it; direction is
/// preserved exactly.
void clip_gradient(Matrix& gradient, double max_norm);

}  // namespace prefopt
