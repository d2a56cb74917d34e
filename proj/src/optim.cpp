#include "prefopt/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "prefopt/errors.hpp"
#include "prefopt/rng.hpp"

namespace prefopt {

void TrainConfig::validate() const {
    if (!(beta > 0.0)) throw config_error("beta must be positive");
    if (lambda < 0.0) throw config_error("lambda must be non-negative");
    if ((method == Method::dpo || method == Method::ipo) && lambda != 0.0) {
        throw config_error("lambda must be 0 for " + method_name(method));
    }
    if (!(learning_rate > 0.0)) throw config_error("learning_rate must be positive");
    if (batch_size == 0) throw config_error("batch_size must be positive");
    if (grad_clip_norm && !(*grad_clip_norm > 0.0)) {
        throw config_error("grad_clip_norm must be positive when set");
    }
    if (!(rmsprop_decay > 0.0 && rmsprop_decay < 1.0)) {
        throw config_error("rmsprop_decay must lie in (0, 1)");
    }
    if (!(rmsprop_epsilon > 0.0)) throw config_error("rmsprop_epsilon must be positive");
    if (eval_interval == 0) throw config_error("eval_interval must be positive");
}

std::string TrainConfig::to_json() const {
    nlohmann::json doc;
    doc["method"] = method_name(method);
    doc["beta"] = beta;
    doc["lambda"] = lambda;
    doc["learning_rate"] = learning_rate;
    doc["batch_size"] = batch_size;
    doc["steps"] = steps;
    doc["seed"] = seed;
    if (grad_clip_norm) {
        doc["grad_clip_norm"] = *grad_clip_norm;
    } else {
        doc["grad_clip_norm"] = nullptr;
    }
    doc["rmsprop_decay"] = rmsprop_decay;
    doc["rmsprop_epsilon"] = rmsprop_epsilon;
    doc["eval_interval"] = eval_interval;
    doc["detach_delta"] = detach_delta;
    return doc.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error(std::string("config JSON parse failure: ") + e.what());
    }
    TrainConfig c;
    if (doc.contains("method")) c.method = method_from_string(doc["method"].get<std::string>());
    if (doc.contains("beta")) c.beta = doc["beta"].get<double>();
    if (doc.contains("lambda")) c.lambda = doc["lambda"].get<double>();
    if (doc.contains("learning_rate")) c.learning_rate = doc["learning_rate"].get<double>();
    if (doc.contains("batch_size")) c.batch_size = doc["batch_size"].get<std::size_t>();
    if (doc.contains("steps")) c.steps = doc["steps"].get<std::size_t>();
    if (doc.contains("seed")) c.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("grad_clip_norm")) {
        if (doc["grad_clip_norm"].is_null()) {
            c.grad_clip_norm.reset();
        } else {
            c.grad_clip_norm = doc["grad_clip_norm"].get<double>();
        }
    }
    if (doc.contains("rmsprop_decay")) c.rmsprop_decay = doc["rmsprop_decay"].get<double>();
    if (doc.contains("rmsprop_epsilon")) c.rmsprop_epsilon = doc["rmsprop_epsilon"].get<double>();
    if (doc.contains("eval_interval")) c.eval_interval = doc["eval_interval"].get<std::size_t>();
    if (doc.contains("detach_delta")) c.detach_delta = doc["detach_delta"].get<bool>();
    return c;
}

std::string TrainConfig::hash_hex() const {
    const std::string canonical = to_json();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : canonical) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    std::ostringstream out;
    out << std::hex << h;
    return out.str();
}

void rmsprop_step(Matrix& params, Matrix& accumulator, const Matrix& gradient, double lr,
                  double decay, double epsilon) {
    if (!params.same_shape(accumulator) || !params.same_shape(gradient)) {
        throw config_error("rmsprop_step: parameter, accumulator, and gradient shapes differ");
    }
    auto& p = params.data();
    auto& acc = accumulator.data();
    const auto& g = gradient.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc[i] = decay * acc[i] + (1.0 - decay) * g[i] * g[i];
        p[i] -= lr * g[i] / (std::sqrt(acc[i]) + epsilon);
    }
}

void clip_gradient(Matrix& gradient, double max_norm) {
    if (!(max_norm > 0.0)) throw std::invalid_argument("max_norm must be positive");
    const double norm = gradient.frobenius_norm();
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (double& g : gradient.data()) g *= scale;
    }
}

namespace {

/// Epoch-shuffled index stream; minibatches are drawn without replacement
/// within an epoch and may span an epoch boundary.
class PermutationStream {
public:
    PermutationStream(std::size_t n, Rng& rng) : rng_(rng), order_(n) {
        for (std::size_t i = 0; i < n; ++i) order_[i] = i;
        rng_.shuffle(order_);
    }

    std::size_t next() {
        if (cursor_ == order_.size()) {
            rng_.shuffle(order_);
            cursor_ = 0;
        }
        return order_[cursor_++];
    }

private:
    Rng& rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

std::string describe_batch(std::span<const std::size_t> indices) {
    std::ostringstream out;
    for (std::size_t i = 0; i < indices.size(); ++i) out << (i ? "," : "") << indices[i];
    return out.str();
}

}  // namespace

TrainState train(const TrainConfig& config, const Dataset& dataset, const PolicyTable& ref,
                 const EvalCallback& on_eval, const std::optional<PolicyTable>& initial_policy) {
    config.validate();
    if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
    if (ref.trainable()) throw config_error("train: reference policy must be frozen");

    TrainState state;
    state.policy = initial_policy ? initial_policy->clone(true) : ref.clone(true);
    if (!state.policy.logits().same_shape(ref.logits())) {
        throw config_error("train: initial policy shape differs from reference");
    }
    state.rms_accumulator = Matrix::zeros(ref.num_contexts(), ref.num_responses());

    Rng rng(config.seed);
    PermutationStream stream(dataset.size(), rng);

    const auto emit_eval = [&](std::size_t step, double loss) {
        if (on_eval) on_eval(step, loss, evaluate_metrics(state.policy, ref, dataset), state.policy);
    };
    emit_eval(0, std::numeric_limits<double>::quiet_NaN());

    std::vector<std::size_t> indices(std::min<std::size_t>(config.batch_size, dataset.size()));
    std::vector<PreferenceTuple> batch(indices.size());

    for (std::size_t step = 1; step <= config.steps; ++step) {
        for (std::size_t i = 0; i < indices.size(); ++i) {
            indices[i] = stream.next();
            batch[i] = dataset.tuples[indices[i]];
        }

        LossBatchResult res = evaluate_loss(config.method, state.policy, ref, batch, config.beta,
                                            config.lambda, config.detach_delta);
        bool finite = std::isfinite(res.loss);
        for (double g : res.gradient.data()) {
            if (!std::isfinite(g)) {
                finite = false;
                break;
            }
        }
        if (!finite) {
            throw divergence_error("training diverged at step " + std::to_string(step) +
                                       " (non-finite loss or gradient; batch tuple indices " +
                                       describe_batch(indices) + ")",
                                   static_cast<long>(step));
        }

        if (config.grad_clip_norm) clip_gradient(res.gradient, *config.grad_clip_norm);
        rmsprop_step(state.policy.logits(), state.rms_accumulator, res.gradient,
                     config.learning_rate, config.rmsprop_decay, config.rmsprop_epsilon);
        state.step = step;

        if (step % config.eval_interval == 0 || step == config.steps) {
            emit_eval(step, res.loss);
        }
    }
    state.rng_state = rng;
    return state;
}

}  // namespace prefopt
