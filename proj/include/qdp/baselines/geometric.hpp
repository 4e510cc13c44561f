#pragma once

#include "qdp/count_policy.hpp"
#include "qdp/qplex/pricing.hpp"

namespace qdp::baselines {

/// Geometric(p) on {1, 2, ...} cut where the right tail drops to `tail`, renormalized.
struct TruncatedGeometric {
    double p = 0.0;
    int support = 0; ///< ℓ_max
    Pmf pmf;
    double mean = 0.0;
};

/// ℓ_max is the smallest L with (1−p)^L ≤ tail.
TruncatedGeometric truncated_geometric(double p, double tail = 1e-6);

/// Bisection on p (for the current ℓ_max) until the truncated mean equals `target_mean`
/// within 1e-12 and ℓ_max no longer changes. Throws DomainError for target_mean ≤ 1.
TruncatedGeometric fit_truncated_geometric(double target_mean, double tail = 1e-6);

/// Per-customer completion probability of the memoryless count model: g(1).
double completion_probability(const Pmf& g);

struct CountMdpResult {
    std::vector<std::vector<double>> V; // [t][z], t = 0..T
    CountPolicy policy;                 // optimal, lowest index on ties
    double value = 0.0;                 // from z = 0
};

/// Backward induction over z with Binomial(x(z), g(1)) departures. Exact when the
/// service law is memoryless.
CountMdpResult geometric_exact(const qplex::PricingSpec& spec);
/// Value of a counter policy (randomized allowed) in the same count model.
double geometric_evaluate(const qplex::PricingSpec& spec, const PartitionedPolicy& policy);
double geometric_evaluate(const qplex::PricingSpec& spec, const CountPolicy& policy);

} // namespace qdp::baselines
