#pragma once

#include "qdp/harness/config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace qdp::harness {

struct CheckResult {
    std::string name;
    int cases = 0;
    double max_error = 0.0;
    double tolerance = 0.0;
    std::string worst; ///< location of the worst case
    bool pass() const { return max_error <= tolerance; }
};

struct GradcheckOptions {
    int trials = 50;
    std::uint64_t seed = 1;
    /// Multiplies the kernel μ-partials of the random models. Anything but 1 should fail.
    double corrupt = 1.0;
    /// Pricing instance for the efficient-vs-generic and gradient checks; skipped when empty.
    std::optional<RunConfig> pricing;
    int max_pricing_states = 2000;
};

/// Random-model gradient and σ finite differences, Fisher blocks vs enumeration, and
/// for the pricing instance the efficient pass vs the generic recursion plus a
/// gradient finite-difference check when small enough.
std::vector<CheckResult> run_gradcheck(const GradcheckOptions& opt);

} // namespace qdp::harness
