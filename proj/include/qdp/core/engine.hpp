#pragma once

#include "qdp/core/model.hpp"
#include "qdp/policy.hpp"

#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace qdp::core {

struct MarginalsTrace {
    std::vector<Pmf> mu; // t = 0..T
};

struct SigmaTrace {
    std::vector<Vector> sigma; // t = 0..T
};

/// Objective J with its parts. total = running + terminal + penalty.
struct RewardDecomposition {
    double total = 0.0;
    double running = 0.0;  ///< Σ_t E[r^(t)] without the penalty slot
    double terminal = 0.0; ///< E[r^(T)] without the penalty slot
    double penalty = 0.0;  ///< Σ of μ-only constants over all epochs
    std::optional<double> revenue; ///< filled by models that split the running reward
    std::optional<double> waiting;
    std::vector<double> per_period; ///< running reward incl. penalty, per t = 0..T-1
};

/// Action-indexed table per (t, expert).
struct ExpertActionTable {
    int horizon = 0, experts = 0, actions = 0;
    std::vector<double> values;

    ExpertActionTable() = default;
    ExpertActionTable(int T, int Z, int A) : horizon(T), experts(Z), actions(A), values(std::size_t(T) * Z * A, 0.0) {}
    double& at(int t, int z, int a) { return values[(std::size_t(t) * experts + z) * actions + a]; }
    double at(int t, int z, int a) const { return values[(std::size_t(t) * experts + z) * actions + a]; }
};

MarginalsTrace forward_marginals(const NonlinearModel& model, const PartitionedPolicy& policy, const Pmf& mu0);

RewardDecomposition expected_total_reward(const NonlinearModel& model, const PartitionedPolicy& policy,
                                          const MarginalsTrace& trace);

/// Q(s,a) = r^(t)_μ(s,a) + Σ_s' p^(t)_μ(s'|s,a) σ'(s'), as an |S| x |A| matrix.
Matrix q_function(const NonlinearModel& model, const Pmf& mu, const Vector& sigma_next, int t);

SigmaTrace backward_sigma(const NonlinearModel& model, const PartitionedPolicy& policy, const MarginalsTrace& trace);

/// ∂J/∂θ_z^(t)(a) = μ^(t)(S_z)·Q̄^(t)_z(a).
ExpertActionTable policy_gradient(const NonlinearModel& model, const PartitionedPolicy& policy,
                                  const MarginalsTrace& trace, const SigmaTrace& sigmas);

/// J^(t)_{μ,θ}: objective of the tail problem started at epoch t from μ.
double tail_objective(const NonlinearModel& model, const PartitionedPolicy& policy, int t, const Pmf& mu);

/// Fisher information blocks in softmax coordinates γ^(t) (one logit per (z,a)).
struct FisherBlocks {
    int horizon = 0;
    int dim = 0; ///< |Z|·|A| per epoch
    std::map<std::pair<int, int>, Matrix> blocks;
    std::vector<Matrix> G; ///< t = 0..T, G[T] = 0
    std::vector<Matrix> K; ///< t = 0..T-1
    std::vector<Matrix> M; ///< t = 0..T-1

    Matrix assemble() const;
};

FisherBlocks fisher_blocks(const NonlinearModel& model, const PartitionedPolicy& policy, const MarginalsTrace& trace);

} // namespace qdp::core
