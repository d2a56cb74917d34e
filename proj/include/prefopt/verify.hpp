#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace prefopt {

struct CheckOptions {
    std::uint64_t seed = 2026;
    /// Fault-injection mode: evaluates every refinement with flipped sign
    /// (policy/reference roles swapped). The telescoping identity survives
    /// the flip; the monotone-equivalence check must not.
    bool flip_delta_sign = false;
};

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string details_json;  // violation payload, "{}" when clean
};

/// Names of all registered checks, in execution order.
const std::vector<std::string>& check_names();

/// Runs the registered property checks on freshly generated seeded instances.
/// `only` restricts to a subset of names (empty = all).
std::vector<CheckResult> run_checks(const CheckOptions& options,
                                    std::span<const std::string> only = {});

}  // namespace prefopt
