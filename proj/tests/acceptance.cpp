// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion pins its tolerances in code; runtime bounds are
// asserted where the contract states them.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "prefopt/datagen.hpp"
#include "prefopt/loss.hpp"
#include "prefopt/metrics.hpp"
#include "prefopt/optim.hpp"
#include "prefopt/refine.hpp"
#include "prefopt/reward.hpp"
#include "prefopt/rng.hpp"
#include "prefopt/verify.hpp"

using namespace prefopt;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

PolicyTable random_table(Rng& rng, std::size_t queries, std::size_t responses) {
    std::vector<std::size_t> aug_map(queries);
    for (std::size_t i = 0; i < queries; ++i) aug_map[i] = queries + i;
    PolicyTable t(queries, aug_map, responses, true);
    for (double& v : t.logits().data()) v = rng.normal();
    return t;
}

std::vector<PreferenceTuple> random_batch(Rng& rng, std::size_t queries, std::size_t responses,
                                          std::size_t n) {
    std::vector<PreferenceTuple> batch(n);
    for (auto& t : batch) {
        t.query = rng.uniform_index(queries);
        t.y_pos = rng.uniform_index(responses);
        t.y_neg = rng.uniform_index(responses - 1);
        if (t.y_neg >= t.y_pos) ++t.y_neg;
    }
    return batch;
}

double rel_grad_error(const Matrix& got, const Matrix& want) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < got.data().size(); ++i) {
        const double d = got.data()[i] - want.data()[i];
        num += d * d;
        den += want.data()[i] * want.data()[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    }
    return worst;
}

// --- criterion 1: telescoping identity --------------------------------------

Outcome criterion_telescoping(double elapsed_limit, double& elapsed) {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(101);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        PolicyTable pi = random_table(rng, 3, 6);
        PolicyTable ref = random_table(rng, 3, 6);
        const ContextId x{rng.uniform_index(3), false};
        const ResponseId pos = rng.uniform_index(6);
        const ResponseId neg = rng.uniform_index(6);
        const ResponseId star = rng.uniform_index(6);
        worst = std::max(worst, check_telescoping(pi, ref, x, pos, neg, star, 0.1));
    }
    elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream detail;
    detail << "max residual " << worst << ", " << elapsed << " s";
    return {worst <= 1e-10 && elapsed < elapsed_limit, detail.str()};
}

// --- criterion 2: monotone equivalence --------------------------------------

Outcome criterion_monotone(double elapsed_limit, double& elapsed) {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(102);
    Matrix rewards(20, 8);
    for (double& v : rewards.data()) v = rng.uniform(-2.0, 2.0);
    GroundTruth gt(std::move(rewards), 1.0);
    auto [pi, ref] = make_assumption_satisfying_policies(gt, 0.1, 1.0);
    std::size_t violations = 0;
    for (std::size_t q = 0; q < gt.num_queries(); ++q) {
        violations += check_monotone_equivalence(gt, pi, ref, {q, false}, 0.1).size();
    }
    elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream detail;
    detail << violations << " violations over exhaustive enumeration, " << elapsed << " s";
    return {violations == 0 && elapsed < elapsed_limit, detail.str()};
}

// --- criterion 3: naive-delta degeneracy ------------------------------------

Outcome criterion_degeneracy() {
    Rng rng(103);
    double worst_value = 0.0, worst_grad = 0.0;
    for (int i = 0; i < 100; ++i) {
        PolicyTable pi = random_table(rng, 3, 5);
        PolicyTable ref = random_table(rng, 3, 5);
        const auto batch = random_batch(rng, 3, 5, 8);
        for (double lambda : {0.1, 0.3, 0.5}) {
            const auto [naive, scaled] = sr_dpo_naive_degeneracy(pi, ref, batch, 0.1, lambda);
            worst_value = std::max(worst_value, std::abs(naive - scaled));
            const auto g_naive = sr_dpo_naive_loss(pi, ref, batch, 0.1, lambda).gradient;
            const auto g_scaled = dpo_loss(pi, ref, batch, 0.1 * (1.0 - lambda)).gradient;
            worst_grad = std::max(worst_grad, max_abs_diff(g_naive, g_scaled));
        }
    }
    std::ostringstream detail;
    detail << "max |loss gap| " << worst_value << ", max |grad gap| " << worst_grad;
    return {worst_value <= 1e-12 && worst_grad <= 1e-10, detail.str()};
}

// --- criterion 4: stop-gradient contract ------------------------------------

Matrix injection_gradient(bool logistic, const PolicyTable& pi, const PolicyTable& ref,
                          std::span<const PreferenceTuple> batch, double beta, double lambda,
                          std::span<const double> deltas) {
    Matrix grad = Matrix::zeros(pi.num_contexts(), pi.num_responses());
    std::vector<double> probs;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const ContextId x{batch[i].query, false};
        const double margin = (pi.log_prob(x, batch[i].y_pos) - ref.log_prob(x, batch[i].y_pos)) -
                              (pi.log_prob(x, batch[i].y_neg) - ref.log_prob(x, batch[i].y_neg));
        double d_margin;
        if (logistic) {
            d_margin = -stable_sigmoid(-(beta * margin - lambda * deltas[i])) * beta;
        } else {
            d_margin = 2.0 * (margin - lambda * deltas[i] - 1.0 / (2.0 * beta));
        }
        const std::size_t row = pi.row_of(x);
        pi.softmax_row(row, probs);
        for (std::size_t k = 0; k < probs.size(); ++k) {
            const double jac_pos = (k == batch[i].y_pos ? 1.0 : 0.0) - probs[k];
            const double jac_neg = (k == batch[i].y_neg ? 1.0 : 0.0) - probs[k];
            grad(row, k) += d_margin * (jac_pos - jac_neg) / static_cast<double>(batch.size());
        }
    }
    return grad;
}

Outcome criterion_stop_gradient() {
    Rng rng(104);
    const double lambda = 0.5;
    double worst_injection = 0.0;
    int live = 0;
    for (int i = 0; i < 100; ++i) {
        PolicyTable pi = random_table(rng, 3, 5);
        PolicyTable ref = random_table(rng, 3, 5);
        const auto batch = random_batch(rng, 3, 5, 8);
        std::vector<double> deltas(batch.size());
        for (std::size_t k = 0; k < batch.size(); ++k) {
            deltas[k] = delta_refine(pi, ref, {batch[k].query, false}, batch[k].y_pos,
                                     batch[k].y_neg, 0.1)
                            .delta;
        }
        const auto sr_dpo_det = sr_dpo_loss(pi, ref, batch, 0.1, lambda, true);
        worst_injection =
            std::max(worst_injection,
                     max_abs_diff(sr_dpo_det.gradient,
                                  injection_gradient(true, pi, ref, batch, 0.1, lambda, deltas)));
        const auto sr_ipo_det = sr_ipo_loss(pi, ref, batch, 0.1, lambda, true);
        worst_injection =
            std::max(worst_injection,
                     max_abs_diff(sr_ipo_det.gradient,
                                  injection_gradient(false, pi, ref, batch, 0.1, lambda, deltas)));

        const auto sr_dpo_undet = sr_dpo_loss(pi, ref, batch, 0.1, lambda, false);
        const auto sr_ipo_undet = sr_ipo_loss(pi, ref, batch, 0.1, lambda, false);
        if (rel_grad_error(sr_dpo_undet.gradient, sr_dpo_det.gradient) > 1e-3 &&
            rel_grad_error(sr_ipo_undet.gradient, sr_ipo_det.gradient) > 1e-3) {
            ++live;
        }
    }
    std::ostringstream detail;
    detail << "max injection gap " << worst_injection << ", live-flag instances " << live
           << "/100";
    return {worst_injection <= 1e-12 && live >= 95, detail.str()};
}

// --- criterion 5: gradient correctness --------------------------------------

Outcome criterion_gradients(double elapsed_limit, double& elapsed) {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(105);
    const double h = 1e-5;
    const double beta = 0.1;
    const double lambda = 0.5;
    double worst = 0.0;

    const auto pinned_loss = [&](bool logistic, const PolicyTable& p, const PolicyTable& ref,
                                 std::span<const PreferenceTuple> batch, double lam,
                                 std::span<const double> deltas) {
        double sum = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const ContextId x{batch[i].query, false};
            const double margin =
                (p.log_prob(x, batch[i].y_pos) - ref.log_prob(x, batch[i].y_pos)) -
                (p.log_prob(x, batch[i].y_neg) - ref.log_prob(x, batch[i].y_neg));
            if (logistic) {
                sum += -log_sigmoid(beta * margin - lam * deltas[i]);
            } else {
                const double e = margin - lam * deltas[i] - 1.0 / (2.0 * beta);
                sum += e * e;
            }
        }
        return sum / static_cast<double>(batch.size());
    };

    for (int i = 0; i < 100; ++i) {
        PolicyTable pi = random_table(rng, 3, 5);
        PolicyTable ref = random_table(rng, 3, 5);
        const auto batch = random_batch(rng, 3, 5, 8);
        std::vector<double> deltas(batch.size());
        for (std::size_t k = 0; k < batch.size(); ++k) {
            deltas[k] = delta_refine(pi, ref, {batch[k].query, false}, batch[k].y_pos,
                                     batch[k].y_neg, beta)
                            .delta;
        }
        const std::vector<double> zeros(batch.size(), 0.0);

        struct Case {
            bool logistic;
            double lam;
            const std::vector<double>* deltas;
            Matrix gradient;
        };
        Case cases[] = {
            {true, 0.0, &zeros, dpo_loss(pi, ref, batch, beta).gradient},
            {false, 0.0, &zeros, ipo_loss(pi, ref, batch, beta).gradient},
            {true, lambda, &deltas, sr_dpo_loss(pi, ref, batch, beta, lambda, true).gradient},
            {false, lambda, &deltas, sr_ipo_loss(pi, ref, batch, beta, lambda, true).gradient},
        };
        for (const auto& c : cases) {
            Matrix fd = Matrix::zeros(pi.num_contexts(), pi.num_responses());
            PolicyTable probe = pi;
            for (std::size_t k = 0; k < probe.logits().data().size(); ++k) {
                const double saved = probe.logits().data()[k];
                probe.logits().data()[k] = saved + h;
                const double up = pinned_loss(c.logistic, probe, ref, batch, c.lam, *c.deltas);
                probe.logits().data()[k] = saved - h;
                const double down = pinned_loss(c.logistic, probe, ref, batch, c.lam, *c.deltas);
                probe.logits().data()[k] = saved;
                fd.data()[k] = (up - down) / (2.0 * h);
            }
            worst = std::max(worst, rel_grad_error(c.gradient, fd));
        }
    }
    elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream detail;
    detail << "max relative error " << worst << ", " << elapsed << " s";
    return {worst <= 1e-5 && elapsed < elapsed_limit, detail.str()};
}

// --- criterion 6: Sr-IPO fixed point ----------------------------------------

Outcome criterion_fixed_point(double elapsed_limit, double& elapsed) {
    const auto start = std::chrono::steady_clock::now();
    Matrix rewards(1, 4);
    rewards(0, 0) = 0.0;
    rewards(0, 1) = 0.1;
    rewards(0, 2) = 0.2;
    rewards(0, 3) = 0.3;
    GroundTruth gt(std::move(rewards), 0.2);
    const double beta = 5.0;
    const double lambda = 0.5;
    auto [pi0, ref] = make_assumption_satisfying_policies(gt, beta, 0.2);

    Dataset ds;
    ds.num_queries = 1;
    ds.num_responses = 4;
    for (std::size_t y = 3; y >= 1; --y) {
        PreferenceTuple t;
        t.query = 0;
        t.y_pos = y;
        t.y_neg = y - 1;
        ds.tuples.push_back(t);
    }

    TrainConfig config;
    config.method = Method::sr_ipo;
    config.beta = beta;
    config.lambda = lambda;
    config.learning_rate = 5e-5;
    config.batch_size = ds.size();
    config.steps = 5000;
    config.seed = 106;

    const TrainState state = train(config, ds, ref, nullptr, pi0);
    const double residual = sr_ipo_loss(state.policy, ref, ds.tuples, beta, lambda, true).loss;
    double identity_gap = 0.0;
    for (const auto& t : ds.tuples) {
        const ContextId x{t.query, false};
        const double margin = implicit_reward_diff(state.policy, ref, x, t.y_pos, t.y_neg, 1.0);
        const double delta = delta_refine(state.policy, ref, x, t.y_pos, t.y_neg, beta).delta;
        identity_gap =
            std::max(identity_gap, std::abs(margin - (1.0 / (2.0 * beta) + lambda * delta)));
    }
    elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream detail;
    detail << "residual " << residual << ", identity gap " << identity_gap << ", " << elapsed
           << " s";
    return {residual < 1e-4 && identity_gap < 1e-3 && elapsed < elapsed_limit, detail.str()};
}

// --- criterion 7: lambda-zero reduction through training --------------------

Outcome criterion_lambda_zero_runs() {
    ScenarioSpec spec;
    spec.num_queries = 8;
    spec.num_responses = 6;
    spec.tuples_per_query = 10;
    spec.seed = 107;
    auto [gt, ds] = generate(spec);
    auto [pi0, ref] = make_assumption_satisfying_policies(gt, 0.1, 1.0);

    double worst = 0.0;
    const auto compare = [&](Method sr, Method base) {
        TrainConfig config;
        config.method = sr;
        config.lambda = 0.0;
        config.steps = 300;
        config.seed = 1077;
        const TrainState sr_state = train(config, ds, ref, nullptr, pi0);
        config.method = base;
        const TrainState base_state = train(config, ds, ref, nullptr, pi0);

        worst = std::max(worst, max_abs_diff(sr_state.policy.logits(), base_state.policy.logits()));
        const MetricsReport a = evaluate_metrics(sr_state.policy, ref, ds);
        const MetricsReport b = evaluate_metrics(base_state.policy, ref, ds);
        worst = std::max(worst, std::abs(a.avg_marginal - b.avg_marginal));
        worst = std::max(worst, std::abs(a.accuracy - b.accuracy));
        worst = std::max(worst, std::abs(a.aug_accuracy - b.aug_accuracy));
    };
    compare(Method::sr_dpo, Method::dpo);
    compare(Method::sr_ipo, Method::ipo);
    std::ostringstream detail;
    detail << "max metric/logit delta " << worst;
    return {worst <= 1e-12, detail.str()};
}

// --- criterion 8: separable-data convergence ---------------------------------

Outcome criterion_separable() {
    std::size_t converged = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ScenarioSpec spec;
        spec.num_queries = 10;
        spec.num_responses = 6;
        spec.tuples_per_query = 10;
        spec.seed = 1080 + seed;
        auto [gt, ds] = generate(spec);
        (void)gt;
        std::vector<std::size_t> aug_map(spec.num_queries);
        for (std::size_t i = 0; i < aug_map.size(); ++i) aug_map[i] = spec.num_queries + i;
        PolicyTable ref(spec.num_queries, aug_map, spec.num_responses, false);

        TrainConfig config;  // defaults: lr 1e-2, clip 1.0, batch 32
        config.method = Method::dpo;
        config.steps = 2000;
        config.seed = seed;
        const TrainState state = train(config, ds, ref);
        if (accuracy(state.policy, ref, ds, false) == 1.0) ++converged;
    }
    std::ostringstream detail;
    detail << converged << "/5 seeds reached accuracy 1.0 within 2000 steps";
    return {converged == 5, detail.str()};
}

// --- criterion 9: correlation ordering ---------------------------------------

Outcome criterion_correlation_ordering(double elapsed_limit, double& elapsed) {
    const auto start = std::chrono::steady_clock::now();
    std::size_t dpo_wins = 0, ipo_wins = 0;
    std::ostringstream log;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ScenarioSpec spec;
        spec.num_queries = 20;
        spec.num_responses = 8;
        spec.tuples_per_query = 10;
        spec.reward_distribution = RewardDistribution::parse("two_cluster(0.1,3.0,0.5)");
        spec.seed = 1090 + seed;
        auto [gt, ds] = generate(spec);
        auto [pi0, ref] = make_assumption_satisfying_policies(gt, 0.1, 1.0);

        const auto spearman_for = [&](Method method, double lambda) {
            TrainConfig config;
            config.method = method;
            config.lambda = lambda;
            config.steps = 1500;
            config.seed = seed;
            const TrainState state = train(config, ds, ref, nullptr, pi0);
            const MetricsReport report = evaluate_metrics(state.policy, ref, ds);
            return report.spearman.value_or(-2.0);
        };

        const double sr_dpo = spearman_for(Method::sr_dpo, 0.5);
        const double dpo = spearman_for(Method::sr_dpo, 0.0);  // lambda = 0 control
        const double sr_ipo = spearman_for(Method::sr_ipo, 0.5);
        const double ipo = spearman_for(Method::sr_ipo, 0.0);
        if (sr_dpo >= dpo) ++dpo_wins;
        if (sr_ipo >= ipo) ++ipo_wins;
        log << " [seed " << seed << ": sr-dpo " << sr_dpo << " vs dpo " << dpo << ", sr-ipo "
            << sr_ipo << " vs ipo " << ipo << "]";
    }
    elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream detail;
    detail << "sr-dpo >= dpo in " << dpo_wins << "/5, sr-ipo >= ipo in " << ipo_wins << "/5, "
           << elapsed << " s;" << log.str();
    return {dpo_wins >= 4 && ipo_wins >= 4 && elapsed < elapsed_limit, detail.str()};
}

// --- criterion 10: assumption-2 diagnostic -----------------------------------

Outcome criterion_aug_accuracy_gap() {
    double worst = 0.0;
    for (Method method : {Method::sr_dpo, Method::sr_ipo}) {
        ScenarioSpec spec;
        spec.num_queries = 10;
        spec.num_responses = 6;
        spec.tuples_per_query = 10;
        spec.seed = 1100;
        auto [gt, ds] = generate(spec);
        auto [pi0, ref] = make_assumption_satisfying_policies(gt, 0.1, 1.0);

        TrainConfig config;
        config.method = method;
        config.lambda = 0.3;
        config.steps = 1000;
        config.seed = 11;
        const TrainState state = train(config, ds, ref, nullptr, pi0);
        const MetricsReport report = evaluate_metrics(state.policy, ref, ds);
        worst = std::max(worst, std::abs(report.accuracy - report.aug_accuracy));
    }
    std::ostringstream detail;
    detail << "max |accuracy - aug_accuracy| " << worst;
    return {worst <= 0.05, detail.str()};
}

// --- criterion 11: correlation oracle ----------------------------------------

Outcome criterion_correlation_oracle() {
    // brute-force definitions, restated independently of the metrics module
    const auto pearson_bf = [](const std::vector<double>& x, const std::vector<double>& y) {
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            mx += x[i];
            my += y[i];
        }
        mx /= x.size();
        my /= y.size();
        double sxy = 0.0, sxx = 0.0, syy = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx) * (x[i] - mx);
            syy += (y[i] - my) * (y[i] - my);
        }
        return sxy / std::sqrt(sxx * syy);
    };
    const auto ranks_bf = [](const std::vector<double>& x) {
        std::vector<double> r(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            double below = 0.0, equal = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) {
                if (x[j] < x[i]) below += 1.0;
                if (x[j] == x[i]) equal += 1.0;
            }
            r[i] = below + 0.5 * (equal + 1.0);
        }
        return r;
    };
    const auto kendall_bf = [](const std::vector<double>& x, const std::vector<double>& y) {
        long long c = 0, d = 0, tx = 0, ty = 0;
        const std::size_t n = x.size();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dx = x[i] - x[j];
                const double dy = y[i] - y[j];
                if (dx == 0.0) ++tx;
                if (dy == 0.0) ++ty;
                if (dx == 0.0 || dy == 0.0) continue;
                ((dx > 0.0) == (dy > 0.0)) ? ++c : ++d;
            }
        }
        const long long total = static_cast<long long>(n) * (n - 1) / 2;
        return static_cast<double>(c - d) /
               std::sqrt(static_cast<double>(total - tx) * static_cast<double>(total - ty));
    };

    Rng rng(111);
    double worst = 0.0;
    for (int v = 0; v < 20; ++v) {
        std::vector<double> x(15), y(15);
        // half the vectors carry tied ranks
        for (auto& t : x) t = v % 2 == 0 ? std::round(rng.uniform(-3.0, 3.0)) : rng.normal();
        for (auto& t : y) t = v % 2 == 0 ? std::round(rng.uniform(-3.0, 3.0)) : rng.normal();
        const auto got = correlations(x, y);
        if (!got.pearson || !got.spearman || !got.kendall_tau) continue;
        worst = std::max(worst, std::abs(*got.pearson - pearson_bf(x, y)));
        worst = std::max(worst, std::abs(*got.spearman - pearson_bf(ranks_bf(x), ranks_bf(y))));
        worst = std::max(worst, std::abs(*got.kendall_tau - kendall_bf(x, y)));
    }
    std::ostringstream detail;
    detail << "max coefficient gap " << worst << " over 20 fixed vectors";
    return {worst <= 1e-12, detail.str()};
}

// --- criterion 12: full verify suite through the CLI -------------------------

Outcome criterion_cli_verify(double elapsed_limit, double& elapsed) {
    const auto start = std::chrono::steady_clock::now();
    const std::string cmd = std::string("PREFOPT_LOG=error ") + PREFOPT_CLI_PATH +
                            " verify >/dev/null 2>/dev/null";
    const int status = std::system(cmd.c_str());
    elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ostringstream detail;
    detail << "cmd_verify exit " << code << ", " << elapsed << " s";
    return {code == 0 && elapsed < elapsed_limit, detail.str()};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    struct Criterion {
        int number;
        const char* name;
        std::function<Outcome()> run;
    };
    double elapsed = 0.0;
    const std::vector<Criterion> criteria = {
        {1, "telescoping identity, 1000 random instances <= 1e-10",
         [&] { return criterion_telescoping(5.0, elapsed); }},
        {2, "monotone equivalence, exhaustive enumeration, zero violations",
         [&] { return criterion_monotone(10.0, elapsed); }},
        {3, "naive-delta degeneracy equals dpo at beta(1-lambda)",
         [&] { return criterion_degeneracy(); }},
        {4, "stop-gradient contract and live detach flag",
         [&] { return criterion_stop_gradient(); }},
        {5, "gradients match central finite differences at 1e-5",
         [&] { return criterion_gradients(30.0, elapsed); }},
        {6, "sr-ipo training reaches the stationarity identity",
         [&] { return criterion_fixed_point(10.0, elapsed); }},
        {7, "lambda = 0 training runs reduce to the base methods",
         [&] { return criterion_lambda_zero_runs(); }},
        {8, "dpo reaches accuracy 1.0 on separable data, 5/5 seeds",
         [&] { return criterion_separable(); }},
        {9, "self-refined runs correlate margins with true gaps at least as well",
         [&] { return criterion_correlation_ordering(300.0, elapsed); }},
        {10, "trained accuracy and augmented accuracy agree within 0.05",
         [&] { return criterion_aug_accuracy_gap(); }},
        {11, "correlation triple matches the brute-force oracle at 1e-12",
         [&] { return criterion_correlation_oracle(); }},
        {12, "cmd_verify passes end to end under two minutes",
         [&] { return criterion_cli_verify(120.0, elapsed); }},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.number)) continue;
        const Outcome outcome = c.run();
        std::printf("[%s] criterion %2d: %s (%s)\n", outcome.passed ? "PASS" : "FAIL", c.number,
                    c.name, outcome.detail.c_str());
        std::fflush(stdout);
        if (!outcome.passed) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
