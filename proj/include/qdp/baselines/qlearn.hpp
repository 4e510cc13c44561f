#pragma once

#include "qdp/count_policy.hpp"
#include "qdp/qplex/pricing.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace qdp::baselines {

struct QLearnOptions {
    std::vector<double> rates{0.1, 0.05, 0.025, 0.01, 0.005, 0.0025};
    long episodes = 1000000;
    long eval_every = 100000;
    long eval_reps = 10000;
    double epsilon = 1.0; ///< exploration probability
    std::uint64_t seed = 1;
    int threads = 0;      ///< for the Monte Carlo evaluations
};

struct QLearnPoint {
    long episode = 0;
    double rate = 0.0;
    double value_estimate = 0.0;
    double ci_halfwidth = 0.0;
};

struct QLearnResult {
    std::vector<QLearnPoint> curve;
    CountPolicy best_policy;
    double best_rate = 0.0;
    long best_episode = 0;
    double best_value = 0.0; ///< checkpoint estimate of the best policy
    double best_ci = 0.0;
    std::vector<std::vector<double>> final_q; ///< per rate, [t][z][a] flattened
};

/// Tabular Q-learning on the aggregated state (t, z) along simulated episodes from the
/// empty system. Transitions come from the queue simulator, whose dynamics are the
/// full-information dynamics. Q starts at zero; the continuation after the last period
/// is the terminal reward −c_T·z'. Greedy policies (lowest index on ties) are scored
/// by simulation on a seed stream disjoint from training.
QLearnResult qlearn_aggregated(const qplex::PricingSpec& spec, const QLearnOptions& opt);

/// Greedy policy of a Q table laid out [t][z][a].
CountPolicy greedy_policy(const std::vector<double>& q, int T, int Z, int A);

/// Columns episode, rate, value_estimate, ci_halfwidth.
std::string qlearn_curve_csv(const QLearnResult& r);

} // namespace qdp::baselines
