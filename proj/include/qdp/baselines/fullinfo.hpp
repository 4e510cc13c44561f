#pragma once

#include "qdp/count_policy.hpp"
#include "qdp/qplex/pricing.hpp"

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace qdp::baselines {

/// Customer count z and histogram h of remaining service durations of the customers in service.
struct FullInfoState {
    int z = 0;
    std::vector<int> h; // h[ℓ-1], sums to min(z, n)
};

/// Exact Markov formulation of the pricing problem on (z, h).
///
/// Within a period: the h(1) customers finishing depart, survivors count down, arrivals
/// are admitted up to the remaining capacity, and customers entering service (buffered
/// first, then new) draw durations from g. Given the number admitted, the next state
/// does not depend on t or the price, so rows are stored per (state, admitted count).
class FullInfoModel {
public:
    static constexpr double default_guard = 5e6;

    explicit FullInfoModel(qplex::PricingSpec spec, double guard = default_guard);

    /// Σ_z C(min(z,n) + ℓ_max − 1, ℓ_max − 1).
    static double state_count(const qplex::PricingSpec& spec);

    const qplex::PricingSpec& spec() const { return spec_; }
    int size() const { return int(states_.size()); }
    const FullInfoState& state(int i) const { return states_[i]; }
    /// −1 when (z, h) is not a valid state.
    int index_of(int z, const std::vector<int>& h) const;
    int empty_state() const { return 0; }
    int departures(int i) const { return states_[i].h.empty() ? 0 : states_[i].h[0]; }
    /// Largest admissible arrival count n + b + d − z.
    int capacity(int i) const;

    std::span<const int> next_states(int i, int m) const;
    std::span<const double> next_probs(int i, int m) const;
    /// P[min(Y, capacity) = m] for Y ~ Poisson(λ^(t)(a)).
    double admit_prob(int t, int a, int i, int m) const;

    /// Expected revenue minus waiting cost.
    double reward(int t, int i, int a) const;
    double terminal(int i) const;

private:
    std::string key(int z, const std::vector<int>& h) const;

    qplex::PricingSpec spec_;
    qplex::ArrivalTables arr_;
    std::vector<FullInfoState> states_;
    std::unordered_map<std::string, int> index_;
    std::vector<std::size_t> row_offset_; // per state, first row
    std::vector<std::size_t> entry_offset_; // per row, into next_/prob_
    std::vector<int> next_;
    std::vector<double> prob_;
};

/// Values indexed [t][state], t = 0..T.
using ValueTable = std::vector<std::vector<double>>;

struct BellmanResult {
    ValueTable V;
    std::vector<std::vector<int>> policy; // [t][state] action
    double value = 0.0; ///< at the empty system
};

BellmanResult bellman_optimal(const FullInfoModel& model);

struct PolicyValue {
    ValueTable V;
    double value = 0.0;
};

/// Exact value of a (possibly randomized) policy over counter experts.
PolicyValue bellman_evaluate(const FullInfoModel& model, const PartitionedPolicy& policy);
PolicyValue bellman_evaluate(const FullInfoModel& model, const CountPolicy& policy);

/// State distributions [t][state] from the empty system under a state-dependent action rule.
ValueTable forward_distribution(const FullInfoModel& model, const std::vector<std::vector<int>>& actions);
ValueTable forward_distribution(const FullInfoModel& model, const PartitionedPolicy& policy);

/// Count-based policy from the optimal full-information policy: averages Q over h | z
/// under the optimal policy's state distribution, with count-level continuation values.
/// Unreachable (t, z) get action 0.
CountPolicy extract_count_policy(const FullInfoModel& model, const BellmanResult& optimal);

/// Σ_h μ(h|z)·Q_mdp(z,h,a) under the given counter policy, with the mass μ(z) per (t,z).
opt::QBarTable extract_q(const FullInfoModel& model, const PartitionedPolicy& policy);

struct QComparison {
    double cosine = 0.0;
    double norm_ratio = 0.0; ///< ‖centered other‖ / ‖centered extract‖
    int support = 0;         ///< (t,z) rows compared
};

/// Compare action-centered tables over the (t,z) rows reachable in both.
QComparison compare_centered(const opt::QBarTable& extract, const opt::QBarTable& other);
QComparison q_extract_diagnostic(const FullInfoModel& model, const PartitionedPolicy& policy,
                                 const opt::QBarTable& qdp_qbar);

} // namespace qdp::baselines
