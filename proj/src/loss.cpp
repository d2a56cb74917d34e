#include "prefopt/loss.hpp"

#include <cmath>
#include <stdexcept>

#include "prefopt/errors.hpp"
#include "prefopt/refine.hpp"
#include "prefopt/reward.hpp"

namespace prefopt {

Method method_from_string(const std::string& name) {
    if (name == "dpo") return Method::dpo;
    if (name == "ipo") return Method::ipo;
    if (name == "sr-dpo") return Method::sr_dpo;
    if (name == "sr-ipo") return Method::sr_ipo;
    throw std::invalid_argument("unknown method '" + name + "' (expected dpo|ipo|sr-dpo|sr-ipo)");
}

std::string method_name(Method m) {
    switch (m) {
        case Method::dpo: return "dpo";
        case Method::ipo: return "ipo";
        case Method::sr_dpo: return "sr-dpo";
        case Method::sr_ipo: return "sr-ipo";
    }
    return "?";
}

namespace {

enum class Family { logistic, squared };
enum class DeltaSource { none, refined, naive };

// Adjoint of one log-softmax row: grad[k] += sum_y adj_y (delta_ky - p_k).
// Per-tuple adjoints on a row come in (+w, -w) pairs, so the softmax term
// cancels exactly; it is still applied through the general formula.
void backprop_row(const PolicyTable& pi, std::size_t row,
                  std::span<const std::pair<ResponseId, double>> adjoints, Matrix& grad,
                  std::vector<double>& softmax_buf) {
    double total = 0.0;
    for (const auto& [y, a] : adjoints) total += a;
    pi.softmax_row(row, softmax_buf);
    for (const auto& [y, a] : adjoints) grad(row, y) += a;
    if (total != 0.0) {
        for (std::size_t k = 0; k < softmax_buf.size(); ++k) grad(row, k) -= total * softmax_buf[k];
    }
}

LossBatchResult evaluate(Family family, DeltaSource delta_source, const PolicyTable& pi,
                         const PolicyTable& ref, Batch batch, double beta, double lambda,
                         bool detach_delta) {
    if (batch.empty()) throw std::invalid_argument("loss evaluation requires a non-empty batch");
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
    if (lambda < 0.0) throw std::invalid_argument("lambda must be non-negative");
    if (!pi.logits().same_shape(ref.logits())) {
        throw config_error("policy and reference tables differ in shape");
    }

    const std::size_t n = batch.size();
    LossBatchResult result;
    result.gradient = Matrix::zeros(pi.num_contexts(), pi.num_responses());
    result.per_tuple_margin.resize(n);
    result.per_tuple_delta.resize(n);

    std::vector<double> losses(n);
    std::vector<double> softmax_buf;
    const bool use_delta = delta_source != DeltaSource::none && lambda != 0.0;

    for (std::size_t i = 0; i < n; ++i) {
        const PreferenceTuple& t = batch[i];
        const ContextId x{t.query, false};
        const double margin =
            implicit_reward_diff(pi, ref, x, t.y_pos, t.y_neg, 1.0);  // unscaled log-ratio gap

        double delta = 0.0;
        if (use_delta) {
            delta = delta_source == DeltaSource::refined
                        ? delta_refine(pi, ref, x, t.y_pos, t.y_neg, beta).delta
                        : delta_naive(pi, ref, x, t.y_pos, t.y_neg, beta);
        }

        double d_margin = 0.0;  // dl/dmargin for this tuple
        double d_delta = 0.0;   // dl/ddelta
        if (family == Family::logistic) {
            const double h = beta * margin - lambda * delta;
            losses[i] = -log_sigmoid(h);
            const double dh = -stable_sigmoid(-h);
            d_margin = beta * dh;
            d_delta = -lambda * dh;
        } else {
            const double e = margin - lambda * delta - 1.0 / (2.0 * beta);
            losses[i] = e * e;
            const double de = 2.0 * e;
            d_margin = de;
            d_delta = -lambda * de;
        }

        result.per_tuple_margin[i] = beta * margin;
        result.per_tuple_delta[i] = delta;

        const std::size_t base_row = pi.row_of(x);
        const std::pair<ResponseId, double> base_adj[2] = {{t.y_pos, d_margin},
                                                           {t.y_neg, -d_margin}};
        backprop_row(pi, base_row, base_adj, result.gradient, softmax_buf);

        if (use_delta && !detach_delta) {
            // d delta / d log pi(y|row) = +-beta on the row the refinement reads.
            const std::size_t delta_row =
                delta_source == DeltaSource::refined ? pi.row_of(aug(x)) : base_row;
            const std::pair<ResponseId, double> delta_adj[2] = {{t.y_pos, beta * d_delta},
                                                                {t.y_neg, -beta * d_delta}};
            backprop_row(pi, delta_row, delta_adj, result.gradient, softmax_buf);
        }
    }

    result.loss = pairwise_mean(losses);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& g : result.gradient.data()) g *= inv_n;
    return result;
}

}  // namespace

LossBatchResult dpo_loss(const PolicyTable& pi, const PolicyTable& ref, Batch batch, double beta) {
    return evaluate(Family::logistic, DeltaSource::none, pi, ref, batch, beta, 0.0, true);
}

LossBatchResult ipo_loss(const PolicyTable& pi, const PolicyTable& ref, Batch batch, double beta) {
    return evaluate(Family::squared, DeltaSource::none, pi, ref, batch, beta, 0.0, true);
}

LossBatchResult sr_dpo_loss(const PolicyTable& pi, const PolicyTable& ref, Batch batch,
                            double beta, double lambda, bool detach_delta) {
    return evaluate(Family::logistic, DeltaSource::refined, pi, ref, batch, beta, lambda,
                    detach_delta);
}

LossBatchResult sr_ipo_loss(const PolicyTable& pi, const PolicyTable& ref, Batch batch,
                            double beta, double lambda, bool detach_delta) {
    return evaluate(Family::squared, DeltaSource::refined, pi, ref, batch, beta, lambda,
                    detach_delta);
}

LossBatchResult sr_dpo_naive_loss(const PolicyTable& pi, const PolicyTable& ref, Batch batch,
                                  double beta, double lambda) {
    return evaluate(Family::logistic, DeltaSource::naive, pi, ref, batch, beta, lambda, false);
}

std::pair<double, double> sr_dpo_naive_degeneracy(const PolicyTable& pi, const PolicyTable& ref,
                                                  Batch batch, double beta, double lambda) {
    if (lambda < 0.0 || lambda >= 1.0) {
        throw std::invalid_argument("degeneracy scaling requires lambda in [0, 1); " +
                                    std::to_string(lambda) + " flips the margin sign");
    }
    const double loss_naive = sr_dpo_naive_loss(pi, ref, batch, beta, lambda).loss;
    const double loss_scaled = dpo_loss(pi, ref, batch, beta * (1.0 - lambda)).loss;
    return {loss_naive, loss_scaled};
}

LossBatchResult evaluate_loss(Method method, const PolicyTable& pi, const PolicyTable& ref,
                              Batch batch, double beta, double lambda, bool detach_delta) {
    switch (method) {
        case Method::dpo:
            if (lambda != 0.0) throw std::invalid_argument("dpo ignores lambda; it must be 0");
            return dpo_loss(pi, ref, batch, beta);
        case Method::ipo:
            if (lambda != 0.0) throw std::invalid_argument("ipo ignores lambda; it must be 0");
            return ipo_loss(pi, ref, batch, beta);
        case Method::sr_dpo:
            return sr_dpo_loss(pi, ref, batch, beta, lambda, detach_delta);
        case Method::sr_ipo:
            return sr_ipo_loss(pi, ref, batch, beta, lambda, detach_delta);
    }
    throw std::logic_error("unreachable method dispatch");
}

}  // namespace prefopt
