#pragma once

#include "qdp/core/model.hpp"

#include <cstdint>

namespace qdp::core {

/// Smooth random nonlinear model for verification runs.
///
/// p(s'|s,a) = softmax_s'(W + U·μ), r = R + V·μ + c(μ), c(μ) = κ·(B·μ)².
/// With `mu_dependent = false` all μ-terms vanish and the model is an ordinary MDP.
class RandomSmoothModel : public NonlinearModel {
public:
    struct Options {
        int horizon = 3;
        int states = 3;
        int actions = 2;
        bool mu_dependent = true;
        double coupling = 1.0; ///< scale of U, V
        double curvature = 0.5; ///< κ
        bool zero_rewards = false;
    };

    RandomSmoothModel(const Options& opt, std::uint64_t seed);

    int horizon() const override { return T_; }
    int state_count() const override { return S_; }
    int action_count() const override { return A_; }

    Pmf kernel(int t, const Pmf& mu, int s, int a) const override;
    double reward(int t, const Pmf& mu, int s, int a) const override;
    double terminal_reward(const Pmf& mu, int s) const override;
    SparsePartials kernel_mu_partials(int t, const Pmf& mu, int s, int a) const override;
    Vector reward_mu_partials(int t, const Pmf& mu, int s, int a) const override;
    Vector terminal_mu_partials(const Pmf& mu, int s) const override;
    double reward_constant(int t, const Pmf& mu) const override;
    double terminal_constant(const Pmf& mu) const override;

    /// Scale all kernel μ-partials by `factor` (negative-control fixture).
    void corrupt_partials(double factor) { corrupt_ = factor; }

private:
    std::size_t k4(int t, int s, int a, int s2) const { return ((std::size_t(t) * S_ + s) * A_ + a) * S_ + s2; }
    Vector logits(int t, const Pmf& mu, int s, int a) const;

    int T_, S_, A_;
    double kappa_;
    double corrupt_ = 1.0;
    std::vector<double> W_;              // [t][s][a][s']
    std::vector<double> U_;              // [t][s][a][s'][k]
    std::vector<double> R_, V_;          // [t][s][a], [t][s][a][k]
    std::vector<double> B_;              // [t][k], t = T is terminal
    std::vector<double> RT_, VT_;        // [s], [s][k]
};

} // namespace qdp::core
