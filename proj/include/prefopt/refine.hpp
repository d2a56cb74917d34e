#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "prefopt/policy.hpp"
#include "prefopt/reward.hpp"

namespace prefopt {

/// A refinement value. `detached` marks whether the value may participate in
/// gradients; the training algorithms apply the stop-gradient operator, so
/// values are detached by default and the undetached mode exists only for the
/// degeneracy and derivative checks.
struct RefinementValue {
    double delta = 0.0;
    bool detached = true;
};

/// Raw-query refinement: the implicit reward difference at x itself.
/// Provably inert inside the DPO objective (it only rescales beta); kept as
/// the executable counterexample. Throws std::invalid_argument when handed an
/// augmented context.
double delta_naive(const PolicyTable& pi, const PolicyTable& ref, ContextId x, ResponseId y_pos,
                   ResponseId y_neg, double beta);

/// Prompt-augmented refinement:
///   beta * log [pi(y+|aug x) ref(y-|aug x)] / [ref(y+|aug x) pi(y-|aug x)].
/// Detached by default.
RefinementValue delta_refine(const PolicyTable& pi, const PolicyTable& ref, ContextId x,
                             ResponseId y_pos, ResponseId y_neg, double beta);

/// Residual of the telescoping identity
///   Delta(y-, y+; x) = Delta(y-, y*; x) - Delta(y+, y*; x),
/// evaluated with both sides computed independently. The identity is
/// algebraic, so the residual must stay below 1e-10 for every anchor y*,
/// not only the optimal response.
double check_telescoping(const PolicyTable& pi, const PolicyTable& ref, ContextId x,
                         ResponseId y_pos, ResponseId y_neg, ResponseId y_star, double beta);

struct Violation {
    std::string kind;        // "sign_agreement" or "gap_ordering"
    std::size_t query = 0;
    std::vector<std::size_t> responses;
    double r_star_lhs = 0.0;
    double r_star_rhs = 0.0;
    double delta_lhs = 0.0;
    double delta_rhs = 0.0;
};

struct ViolationReport {
    std::vector<Violation> entries;

    bool empty() const { return entries.empty(); }
    std::size_t size() const { return entries.size(); }
    std::string to_json() const;
};

/// Brute-force check of the monotone equivalences for one query:
///  - sign agreement: for every ordered response pair with a strict r* gap,
///    Delta(y-, y+; x) must be strictly positive (equivalently the relative
///    displacement to any anchor must order the pair the same way as r*);
///  - gap ordering: for every pair of tuples with strictly dominating
///    positives and strictly dominated negatives, the larger true-reward gap
///    must carry the larger Delta.
/// r* ties are skipped. Violations become report entries, never errors.
ViolationReport check_monotone_equivalence(const GroundTruth& gt, const PolicyTable& pi,
                                           const PolicyTable& ref, ContextId x, double beta);

}  // namespace prefopt
