#pragma once

#include "qdp/count_policy.hpp"
#include "qdp/qplex/pricing.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace qdp::sim {

/// SplitMix64 stream. Stream (seed, id) starts from a hash of both, so replication r of a
/// run always sees the same numbers no matter which thread executes it.
class SplitMix64 {
public:
    SplitMix64(std::uint64_t seed, std::uint64_t stream);
    std::uint64_t next();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }
    /// Uniform integer in [0, n).
    int below(int n) { return int(uniform() * n); }

private:
    std::uint64_t state_;
};

std::uint64_t mix64(std::uint64_t x);

/// Physical queue, one customer at a time.
///
/// Per period: observe z, post the price, the customers whose service ends leave, arrivals
/// are admitted up to n + b + d − z, and entrants (buffered first) start service with
/// durations drawn from g. Waiting cost is charged on the observed z.
class QueueSimulator {
public:
    explicit QueueSimulator(const qplex::PricingSpec& spec);

    struct State {
        int t = 0;
        int z = 0;
        int busy = 0;
        std::vector<int> completions; // ring indexed by absolute period
    };
    struct Step {
        int admitted = 0;
        int departed = 0;
        double revenue = 0.0;
        double waiting = 0.0;
    };

    State initial_state() const;
    Step step(State& s, int a, SplitMix64& rng) const;

    const qplex::PricingSpec& spec() const { return spec_; }

private:
    int sample_admitted(int t, int a, int cap, SplitMix64& rng) const;
    int sample_duration(SplitMix64& rng) const;

    qplex::PricingSpec spec_;
    int cap_max_;
    int ring_;
    std::vector<std::vector<double>> arrival_cdf_; // [t*A + a][y], y = 0..cap_max-1
    std::vector<double> duration_cdf_;
};

struct ReplicationOutcome {
    double revenue = 0.0;
    double waiting = 0.0;  ///< ≤ 0
    double terminal = 0.0; ///< ≤ 0
    long admitted = 0;
    long departed = 0;
    int final_count = 0;
    std::vector<std::uint8_t> violation; ///< z_t > ẑ for t = 1..T
    double total() const { return revenue + waiting + terminal; }
};

ReplicationOutcome simulate_replication(const QueueSimulator& sim, const CountPolicy& policy, std::uint64_t seed,
                                        std::uint64_t rep);

struct SimResult {
    long reps = 0;
    double mean = 0.0;
    double revenue = 0.0;
    double waiting = 0.0;
    double terminal = 0.0;
    double std_error = 0.0;
    double ci_halfwidth = 0.0; ///< 3 standard errors
    std::vector<double> p_hat; ///< P[z_t > ẑ], t = 1..T
    std::vector<double> p_se;
};

/// Replication averages over `reps` runs from the empty system. Work is split in fixed
/// blocks of 1024 replications and reduced pairwise in block order, so the result is
/// bit-identical for every thread count. threads ≤ 0 means hardware concurrency.
SimResult simulate_policy(const qplex::PricingSpec& spec, const CountPolicy& policy, long reps, std::uint64_t seed,
                          int threads = 0);
SimResult simulate_policy(const QueueSimulator& sim, const CountPolicy& policy, long reps, std::uint64_t seed,
                          int threads = 0);

struct ViolationSeries {
    std::vector<double> p_hat; // t = 1..T
    std::vector<double> se;
};
ViolationSeries estimate_violations(const qplex::PricingSpec& spec, const CountPolicy& policy, long reps,
                                    std::uint64_t seed, int threads = 0);

/// Count policy that uses one price per block of counters for every t.
CountPolicy block_policy(const qplex::PricingSpec& spec, const std::vector<std::pair<int, int>>& blocks,
                         const std::vector<int>& actions);

struct Candidate {
    std::vector<int> actions; ///< action index per block
    SimResult result;
    bool feasible = false;
    SimResult rerun; ///< filled for the top candidates when a rerun was requested
};

struct ExhaustiveResult {
    std::vector<Candidate> candidates; ///< enumeration order
    std::vector<int> ranking;          ///< feasible candidates by mean, best first
    /// Top candidates re-ranked by their rerun mean (empty without a rerun).
    std::vector<int> rerun_ranking;
};

struct ExhaustiveOptions {
    long reps = 100000;
    std::uint64_t seed = 1;
    int top_k = 6;
    long rerun_reps = 0; ///< 0 skips the rerun
    int threads = 0;
    double guard = 1e5;
};

/// Every assignment of one price from `price_subset` (action indices) to each block of
/// counters, simulated. Feasible means every p̂_t ≤ α. Each candidate's random streams
/// depend only on its prices, so enlarging the price subset leaves existing results unchanged.
ExhaustiveResult exhaustive_restricted(const qplex::PricingSpec& spec, const std::vector<std::pair<int, int>>& blocks,
                                       const std::vector<int>& price_subset, const ExhaustiveOptions& opt);

std::string sim_summary_csv(const std::vector<std::pair<std::string, SimResult>>& rows);
std::string violation_csv(const SimResult& r);
std::string exhaustive_csv(const qplex::PricingSpec& spec, const ExhaustiveResult& r);

} // namespace qdp::sim
