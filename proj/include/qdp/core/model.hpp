#pragma once

#include "qdp/pmf.hpp"

#include <Eigen/Dense>

#include <vector>

namespace qdp::core {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Kernel μ-partials for one (t, μ, s, a).
///
/// Column j holds ∂p(·|s,a)/∂μ(columns[j]) over next states; partials with
/// respect to states not listed are zero.
struct SparsePartials {
    std::vector<int> columns;
    Matrix values; // |S| x columns.size()
};

/// Finite-horizon nonlinear MDP: kernels and rewards may depend on the current
/// state marginal μ. Partials are ordinary (ambient-coordinate) derivatives.
class NonlinearModel {
public:
    virtual ~NonlinearModel() = default;

    virtual int horizon() const = 0;
    virtual int state_count() const = 0;
    virtual int action_count() const = 0;

    virtual Pmf kernel(int t, const Pmf& mu, int s, int a) const = 0;
    virtual double reward(int t, const Pmf& mu, int s, int a) const = 0;
    virtual double terminal_reward(const Pmf& mu, int s) const = 0;

    virtual SparsePartials kernel_mu_partials(int t, const Pmf& mu, int s, int a) const;
    /// Dense gradient of r^(t)_μ(s,a) with respect to μ.
    virtual Vector reward_mu_partials(int t, const Pmf& mu, int s, int a) const;
    virtual Vector terminal_mu_partials(const Pmf& mu, int s) const;

    /// Part of r^(t)_μ(s,a) that depends on μ only (a penalty slot). Reported
    /// separately in reward decompositions.
    virtual double reward_constant(int t, const Pmf& mu) const;
    virtual double terminal_constant(const Pmf& mu) const;

    /// Scalar access, ∂p^(t)_μ(s_next|s,a)/∂μ(s_partial).
    double kernel_mu_partial(int t, const Pmf& mu, int s, int a, int s_next, int s_partial) const;
};

} // namespace qdp::core
