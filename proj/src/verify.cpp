#include "prefopt/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <json.hpp>

#include "prefopt/datagen.hpp"
#include "prefopt/loss.hpp"
#include "prefopt/metrics.hpp"
#include "prefopt/optim.hpp"
#include "prefopt/refine.hpp"
#include "prefopt/reward.hpp"
#include "prefopt/rng.hpp"

namespace prefopt {

namespace {

struct Instance {
    PolicyTable pi;
    PolicyTable ref;
    std::vector<PreferenceTuple> batch;
};

/// Random tables over `queries` base contexts (each with an augmented row)
/// and a batch of random distinct-response tuples.
Instance random_instance(Rng& rng, std::size_t queries, std::size_t responses,
                         std::size_t batch_size) {
    std::vector<std::size_t> aug_map(queries);
    for (std::size_t i = 0; i < queries; ++i) aug_map[i] = queries + i;
    Instance inst{PolicyTable(queries, aug_map, responses, true),
                  PolicyTable(queries, aug_map, responses, false),
                  {}};
    for (double& v : inst.pi.logits().data()) v = rng.normal();
    for (double& v : inst.ref.logits().data()) v = rng.normal();
    inst.batch.resize(batch_size);
    for (auto& t : inst.batch) {
        t.query = rng.uniform_index(queries);
        t.y_pos = rng.uniform_index(responses);
        t.y_neg = rng.uniform_index(responses - 1);
        if (t.y_neg >= t.y_pos) ++t.y_neg;
    }
    return inst;
}

double grad_rel_error(const Matrix& got, const Matrix& want) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < got.data().size(); ++i) {
        const double d = got.data()[i] - want.data()[i];
        num += d * d;
        den += want.data()[i] * want.data()[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

enum class Family { logistic, squared };

/// Loss with the refinement values frozen to the supplied constants,
/// written from first principles (explicit log-probabilities, no shared
/// code with the production adjoints). This is both the constant-injection
/// oracle and the function the finite-difference probe evaluates.
double frozen_delta_loss(Family family, const PolicyTable& pi, const PolicyTable& ref,
                         std::span<const PreferenceTuple> batch, double beta, double lambda,
                         std::span<const double> deltas) {
    std::vector<double> terms(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& t = batch[i];
        const ContextId x{t.query, false};
        const double margin = (pi.log_prob(x, t.y_pos) - ref.log_prob(x, t.y_pos)) -
                              (pi.log_prob(x, t.y_neg) - ref.log_prob(x, t.y_neg));
        if (family == Family::logistic) {
            terms[i] = -log_sigmoid(beta * margin - lambda * deltas[i]);
        } else {
            const double e = margin - lambda * deltas[i] - 1.0 / (2.0 * beta);
            terms[i] = e * e;
        }
    }
    return pairwise_mean(terms);
}

/// Gradient of frozen_delta_loss via the explicit log-softmax Jacobian
/// d log pi(y|c) / d logits[c][k] = 1{k=y} - softmax(c)[k].
Matrix constant_injection_gradient(Family family, const PolicyTable& pi, const PolicyTable& ref,
                                   std::span<const PreferenceTuple> batch, double beta,
                                   double lambda, std::span<const double> deltas) {
    Matrix grad = Matrix::zeros(pi.num_contexts(), pi.num_responses());
    std::vector<double> probs;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& t = batch[i];
        const ContextId x{t.query, false};
        const double margin = (pi.log_prob(x, t.y_pos) - ref.log_prob(x, t.y_pos)) -
                              (pi.log_prob(x, t.y_neg) - ref.log_prob(x, t.y_neg));
        double d_margin;
        if (family == Family::logistic) {
            const double h = beta * margin - lambda * deltas[i];
            d_margin = -stable_sigmoid(-h) * beta;
        } else {
            d_margin = 2.0 * (margin - lambda * deltas[i] - 1.0 / (2.0 * beta));
        }
        const std::size_t row = pi.row_of(x);
        pi.softmax_row(row, probs);
        for (std::size_t k = 0; k < probs.size(); ++k) {
            const double jac_pos = (k == t.y_pos ? 1.0 : 0.0) - probs[k];
            const double jac_neg = (k == t.y_neg ? 1.0 : 0.0) - probs[k];
            grad(row, k) += inv_n * d_margin * (jac_pos - jac_neg);
        }
    }
    return grad;
}

Matrix central_fd_gradient(const std::function<double(const PolicyTable&)>& loss_of,
                           const PolicyTable& at, double h) {
    Matrix grad = Matrix::zeros(at.num_contexts(), at.num_responses());
    PolicyTable probe = at;
    for (std::size_t i = 0; i < probe.logits().data().size(); ++i) {
        const double saved = probe.logits().data()[i];
        probe.logits().data()[i] = saved + h;
        const double up = loss_of(probe);
        probe.logits().data()[i] = saved - h;
        const double down = loss_of(probe);
        probe.logits().data()[i] = saved;
        grad.data()[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

std::vector<double> refined_deltas(const PolicyTable& pi, const PolicyTable& ref,
                                   std::span<const PreferenceTuple> batch, double beta) {
    std::vector<double> out(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        out[i] = delta_refine(pi, ref, {batch[i].query, false}, batch[i].y_pos, batch[i].y_neg,
                              beta)
                     .delta;
    }
    return out;
}

// ---- individual checks -------------------------------------------------

CheckResult check_telescoping_identity(const CheckOptions& opts) {
    Rng rng(opts.seed ^ 0x1);
    double max_residual = 0.0;
    for (int i = 0; i < 1000; ++i) {
        Instance inst = random_instance(rng, 3, 6, 1);
        const PolicyTable& a = opts.flip_delta_sign ? inst.ref : inst.pi;
        const PolicyTable& b = opts.flip_delta_sign ? inst.pi : inst.ref;
        const auto& t = inst.batch[0];
        const ResponseId y_star = rng.uniform_index(6);
        max_residual = std::max(
            max_residual, check_telescoping(a, b, {t.query, false}, t.y_pos, t.y_neg, y_star, 0.1));
    }
    nlohmann::json details;
    details["max_residual"] = max_residual;
    return {"telescoping", max_residual <= 1e-10, details.dump()};
}

CheckResult check_monotone(const CheckOptions& opts) {
    Rng rng(opts.seed ^ 0x2);
    Matrix rewards(20, 8);
    for (double& v : rewards.data()) v = rng.uniform(-1.0, 1.0);
    GroundTruth gt(std::move(rewards), 1.0);
    auto [pi, ref] = make_assumption_satisfying_policies(gt, 0.1, 1.0);
    if (opts.flip_delta_sign) std::swap(pi, ref);

    ViolationReport merged;
    for (std::size_t q = 0; q < gt.num_queries(); ++q) {
        auto report = check_monotone_equivalence(gt, pi, ref, {q, false}, 0.1);
        merged.entries.insert(merged.entries.end(), report.entries.begin(), report.entries.end());
    }
    nlohmann::json details;
    details["violations"] = merged.size();
    if (!merged.empty()) {
        ViolationReport sample;
        const std::size_t keep = std::min<std::size_t>(merged.size(), 10);
        sample.entries.assign(merged.entries.begin(), merged.entries.begin() + keep);
        details["first_violations"] = nlohmann::json::parse(sample.to_json());
    }
    return {"monotone_equivalence", merged.empty(), details.dump()};
}

CheckResult check_aug_ordering(const CheckOptions& opts) {
    // the inequality the monotone equivalence rests on: at the augmented
    // context, the truly-better response carries the larger log ratio
    Rng rng(opts.seed ^ 0x3);
    Matrix rewards(10, 6);
    for (double& v : rewards.data()) v = rng.normal();
    GroundTruth gt(std::move(rewards), 1.0);
    auto [pi, ref] = make_assumption_satisfying_policies(gt, 0.1, 0.7);
    if (opts.flip_delta_sign) std::swap(pi, ref);

    std::size_t violations = 0;
    for (std::size_t q = 0; q < gt.num_queries(); ++q) {
        const ContextId a = aug({q, false});
        for (std::size_t hi = 0; hi < 6; ++hi) {
            for (std::size_t lo = 0; lo < 6; ++lo) {
                if (hi == lo || !(gt.reward(q, hi) > gt.reward(q, lo))) continue;
                const double ratio_hi = pi.log_prob(a, hi) - ref.log_prob(a, hi);
                const double ratio_lo = pi.log_prob(a, lo) - ref.log_prob(a, lo);
                if (!(ratio_hi > ratio_lo)) ++violations;
            }
        }
    }
    nlohmann::json details;
    details["violations"] = violations;
    return {"aug_ordering", violations == 0, details.dump()};
}

CheckResult check_naive_degeneracy(const CheckOptions& opts) {
    Rng rng(opts.seed ^ 0x4);
    double max_value_gap = 0.0, max_grad_err = 0.0;
    for (int i = 0; i < 100; ++i) {
        Instance inst = random_instance(rng, 3, 5, 8);
        for (double lambda : {0.1, 0.3, 0.5}) {
            const auto [loss_naive, loss_scaled] =
                sr_dpo_naive_degeneracy(inst.pi, inst.ref, inst.batch, 0.1, lambda);
            max_value_gap = std::max(max_value_gap, std::abs(loss_naive - loss_scaled));
            const auto full_naive = sr_dpo_naive_loss(inst.pi, inst.ref, inst.batch, 0.1, lambda);
            const auto full_scaled = dpo_loss(inst.pi, inst.ref, inst.batch, 0.1 * (1.0 - lambda));
            max_grad_err =
                std::max(max_grad_err, grad_rel_error(full_naive.gradient, full_scaled.gradient));
        }
    }
    nlohmann::json details;
    details["max_value_gap"] = max_value_gap;
    details["max_gradient_rel_error"] = max_grad_err;
    return {"naive_delta_degeneracy", max_value_gap <= 1e-12 && max_grad_err <= 1e-10,
            details.dump()};
}

CheckResult check_stop_gradient(const CheckOptions& opts) {
    Rng rng(opts.seed ^ 0x5);
    const double lambda = 0.5;
    double max_injection_gap = 0.0;
    int live_count = 0;
    const int trials = 100;
    for (int i = 0; i < trials; ++i) {
        Instance inst = random_instance(rng, 3, 5, 8);
        for (Family family : {Family::logistic, Family::squared}) {
            const auto deltas = refined_deltas(inst.pi, inst.ref, inst.batch, 0.1);
            const auto detached =
                family == Family::logistic
                    ? sr_dpo_loss(inst.pi, inst.ref, inst.batch, 0.1, lambda, true)
                    : sr_ipo_loss(inst.pi, inst.ref, inst.batch, 0.1, lambda, true);
            const Matrix injected = constant_injection_gradient(family, inst.pi, inst.ref,
                                                                inst.batch, 0.1, lambda, deltas);
            double gap = 0.0;
            for (std::size_t k = 0; k < injected.data().size(); ++k) {
                gap = std::max(gap, std::abs(injected.data()[k] - detached.gradient.data()[k]));
            }
            max_injection_gap = std::max(max_injection_gap, gap);
        }
        const auto detached = sr_dpo_loss(inst.pi, inst.ref, inst.batch, 0.1, lambda, true);
        const auto undetached = sr_dpo_loss(inst.pi, inst.ref, inst.batch, 0.1, lambda, false);
        if (grad_rel_error(undetached.gradient, detached.gradient) > 1e-3) ++live_count;
    }
    nlohmann::json details;
    details["max_injection_gap"] = max_injection_gap;
    details["live_flag_instances"] = live_count;
    return {"stop_gradient", max_injection_gap <= 1e-12 && live_count >= 95, details.dump()};
}

CheckResult check_lambda_zero(const CheckOptions& opts) {
    Rng rng(opts.seed ^ 0x6);
    double max_gap = 0.0;
    for (int i = 0; i < 50; ++i) {
        Instance inst = random_instance(rng, 3, 5, 8);
        const auto dpo = dpo_loss(inst.pi, inst.ref, inst.batch, 0.1);
        const auto sr_dpo = sr_dpo_loss(inst.pi, inst.ref, inst.batch, 0.1, 0.0, true);
        const auto ipo = ipo_loss(inst.pi, inst.ref, inst.batch, 0.1);
        const auto sr_ipo = sr_ipo_loss(inst.pi, inst.ref, inst.batch, 0.1, 0.0, true);
        max_gap = std::max(max_gap, std::abs(dpo.loss - sr_dpo.loss));
        max_gap = std::max(max_gap, std::abs(ipo.loss - sr_ipo.loss));
        for (std::size_t k = 0; k < dpo.gradient.data().size(); ++k) {
            max_gap = std::max(max_gap,
                               std::abs(dpo.gradient.data()[k] - sr_dpo.gradient.data()[k]));
            max_gap = std::max(max_gap,
                               std::abs(ipo.gradient.data()[k] - sr_ipo.gradient.data()[k]));
        }
    }
    nlohmann::json details;
    details["max_gap"] = max_gap;
    return {"lambda_zero_reduction", max_gap == 0.0, details.dump()};
}

CheckResult check_gradient_fd(const CheckOptions& opts) {
    Rng rng(opts.seed ^ 0x7);
    const double h = 1e-5;
    double worst = 0.0;
    for (int i = 0; i < 25; ++i) {
        Instance inst = random_instance(rng, 3, 5, 8);
        const double beta = 0.1;
        const double lambda = 0.5;
        const auto deltas = refined_deltas(inst.pi, inst.ref, inst.batch, beta);
        const std::vector<double> zeros(inst.batch.size(), 0.0);

        struct Case {
            Family family;
            double lam;
            const std::vector<double>* deltas;
            LossBatchResult result;
        };
        Case cases[] = {
            {Family::logistic, 0.0, &zeros, dpo_loss(inst.pi, inst.ref, inst.batch, beta)},
            {Family::squared, 0.0, &zeros, ipo_loss(inst.pi, inst.ref, inst.batch, beta)},
            {Family::logistic, lambda, &deltas,
             sr_dpo_loss(inst.pi, inst.ref, inst.batch, beta, lambda, true)},
            {Family::squared, lambda, &deltas,
             sr_ipo_loss(inst.pi, inst.ref, inst.batch, beta, lambda, true)},
        };
        for (const auto& c : cases) {
            const Matrix fd = central_fd_gradient(
                [&](const PolicyTable& p) {
                    return frozen_delta_loss(c.family, p, inst.ref, inst.batch, beta, c.lam,
                                             *c.deltas);
                },
                inst.pi, h);
            worst = std::max(worst, grad_rel_error(c.result.gradient, fd));
        }
    }
    nlohmann::json details;
    details["max_rel_error"] = worst;
    return {"gradient_finite_difference", worst <= 1e-5, details.dump()};
}

CheckResult check_sr_ipo_fixed_point(const CheckOptions& opts) {
    // 1 query, 4 responses, cycle-free tuple chain: the squared objective has
    // an exact root, so the trained policy must satisfy the stationarity
    // identity margin = 1/(2 beta) + lambda * Delta.
    Matrix rewards(1, 4);
    rewards(0, 0) = 0.0;
    rewards(0, 1) = 0.1;
    rewards(0, 2) = 0.2;
    rewards(0, 3) = 0.3;
    GroundTruth gt(std::move(rewards), 0.2);
    auto [pi0, ref] = make_assumption_satisfying_policies(gt, 5.0, 0.2);

    Dataset ds;
    ds.num_queries = 1;
    ds.num_responses = 4;
    for (std::size_t y = 3; y >= 1; --y) {
        PreferenceTuple t;
        t.query = 0;
        t.y_pos = y;
        t.y_neg = y - 1;
        t.true_gap = gt.reward(0, y) - gt.reward(0, y - 1);
        ds.tuples.push_back(t);
    }

    TrainConfig config;
    config.method = Method::sr_ipo;
    config.beta = 5.0;
    config.lambda = 0.5;
    config.learning_rate = 5e-5;
    config.batch_size = ds.size();
    config.steps = 5000;
    config.seed = opts.seed;

    const TrainState state = train(config, ds, ref, nullptr, pi0);
    const double residual =
        sr_ipo_loss(state.policy, ref, ds.tuples, config.beta, config.lambda, true).loss;

    double max_eq_gap = 0.0;
    for (const auto& t : ds.tuples) {
        const ContextId x{t.query, false};
        const double margin = implicit_reward_diff(state.policy, ref, x, t.y_pos, t.y_neg, 1.0);
        const double delta =
            delta_refine(state.policy, ref, x, t.y_pos, t.y_neg, config.beta).delta;
        const double rhs = 1.0 / (2.0 * config.beta) + config.lambda * delta;
        max_eq_gap = std::max(max_eq_gap, std::abs(margin - rhs));
    }
    nlohmann::json details;
    details["algorithm2_residual"] = residual;
    details["max_identity_gap"] = max_eq_gap;
    return {"sr_ipo_fixed_point", residual < 1e-4 && max_eq_gap < 1e-3, details.dump()};
}

}  // namespace

const std::vector<std::string>& check_names() {
    static const std::vector<std::string> names = {
        "telescoping",          "monotone_equivalence", "aug_ordering",
        "naive_delta_degeneracy", "stop_gradient",        "lambda_zero_reduction",
        "gradient_finite_difference", "sr_ipo_fixed_point",
    };
    return names;
}

std::vector<CheckResult> run_checks(const CheckOptions& options, std::span<const std::string> only) {
    using Runner = CheckResult (*)(const CheckOptions&);
    static const std::pair<const char*, Runner> registry[] = {
        {"telescoping", check_telescoping_identity},
        {"monotone_equivalence", check_monotone},
        {"aug_ordering", check_aug_ordering},
        {"naive_delta_degeneracy", check_naive_degeneracy},
        {"stop_gradient", check_stop_gradient},
        {"lambda_zero_reduction", check_lambda_zero},
        {"gradient_finite_difference", check_gradient_fd},
        {"sr_ipo_fixed_point", check_sr_ipo_fixed_point},
    };
    std::vector<CheckResult> results;
    for (const auto& [name, runner] : registry) {
        if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
        results.push_back(runner(options));
    }
    return results;
}

}  // namespace prefopt
