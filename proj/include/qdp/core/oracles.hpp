#pragma once

// Brute-force reference computations. They share no code path with the
// recursions in engine.hpp beyond the forward marginals used as kernel arguments.

#include "qdp/core/engine.hpp"

#include <cstdint>

namespace qdp::core {

struct Trajectory {
    std::vector<int> states;  // s_0..s_T
    std::vector<int> actions; // a_0..a_{T-1}
    double prob = 0.0;
};

/// Every (s0, a0, ..., sT) with positive probability. Refuses when
/// |S|^(T+1)·|A|^T exceeds `guard`.
std::vector<Trajectory> enumerate_trajectories(const NonlinearModel& model, const PartitionedPolicy& policy,
                                               const Pmf& mu0, double guard = 1e7);

/// E[∇log q ∇log qᵀ] in softmax coordinates by trajectory enumeration, with the
/// μ-dependence of later kernels propagated by forward-mode tangents.
Matrix fisher_by_enumeration(const NonlinearModel& model, const PartitionedPolicy& policy, const Pmf& mu0);

struct FdReport {
    double max_rel_error = 0.0;
    int worst_t = -1, worst_z = -1, worst_a = -1;
    double analytic = 0.0, numeric = 0.0;
};

/// Compare policy_gradient with central differences of J along θ-directions e_a − e_{a'}.
/// Relative error uses max(|analytic|, |numeric|, floor) as denominator.
FdReport gradient_fd_check(const NonlinearModel& model, const PartitionedPolicy& policy, const Pmf& mu0,
                           double h = 1e-5, double floor = 1e-3);

/// Compare σ^(t) with central differences of the tail objective along e_s − e_s'.
/// `mu0` should be interior so that every epoch's marginal can be perturbed.
FdReport sigma_fd_check(const NonlinearModel& model, const PartitionedPolicy& policy, const Pmf& mu0,
                        double h = 1e-5, double floor = 1e-3);

/// Random interior policy with rows drawn from a Dirichlet(1) law.
PartitionedPolicy random_interior_policy(int horizon, std::vector<int> assignment, int experts, int actions,
                                         std::uint64_t seed);
/// Random interior pmf.
Pmf random_interior_pmf(int size, std::uint64_t seed);

} // namespace qdp::core
