#pragma once

#include "qdp/policy.hpp"

#include <string>
#include <vector>

namespace qdp {

/// Pure count-based policy: one action index per (t, z).
struct CountPolicy {
    int horizon = 0;
    int counters = 0;
    std::vector<int> action; // [t][z] row-major

    CountPolicy() = default;
    CountPolicy(int T, int Z, int fill = 0) : horizon(T), counters(Z), action(std::size_t(T) * Z, fill) {}
    int at(int t, int z) const { return action[std::size_t(t) * counters + z]; }
    int& at(int t, int z) { return action[std::size_t(t) * counters + z]; }
    bool operator==(const CountPolicy&) const = default;

    /// Mode of each row of a counter-partitioned policy, lowest index on ties.
    static CountPolicy from_policy(const PartitionedPolicy& policy);
    /// Point-mass policy over counter experts with the given state assignment.
    PartitionedPolicy to_policy(std::vector<int> assignment, int action_count) const;
};

/// Rows t, columns z0..zZ, entries action indices.
std::string count_policy_csv(const CountPolicy& p);
CountPolicy count_policy_from_csv(const std::string& text);

} // namespace qdp
