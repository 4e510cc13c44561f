#pragma once

#include "qdp/pmf.hpp"

#include <optional>
#include <span>
#include <vector>

namespace qdp {

/// A block of the sharing partition: every (t, z) with t in `times` and z in `experts`
/// carries the same action pmf.
struct SharingGroup {
    std::vector<int> experts;
    std::vector<int> times;
};

/// State-partitioned tabular policy: one action pmf per (t, expert).
///
/// Rows are stored as log-probabilities so that large step sizes can push mass
/// arbitrarily close to the boundary without losing interiority to underflow.
/// `prob` returns exp(log_prob), which may be exactly zero.
class PartitionedPolicy {
public:
    PartitionedPolicy() = default;
    /// Uniform rows.
    PartitionedPolicy(int horizon, std::vector<int> assignment, int expert_count, int action_count);
    /// One expert per state.
    static PartitionedPolicy tabular(int horizon, int state_count, int action_count);

    int horizon() const { return horizon_; }
    int state_count() const { return int(assignment_.size()); }
    int expert_count() const { return experts_; }
    int action_count() const { return actions_; }
    int expert_of(int s) const { return assignment_[s]; }
    const std::vector<int>& assignment() const { return assignment_; }

    double prob(int t, int z, int a) const { return theta_[offset(t, z) + a]; }
    double log_prob(int t, int z, int a) const { return logp_[offset(t, z) + a]; }
    double action_prob(int t, int s, int a) const { return prob(t, assignment_[s], a); }
    std::span<const double> row(int t, int z) const { return {theta_.data() + offset(t, z), std::size_t(actions_)}; }
    std::span<const double> log_row(int t, int z) const { return {logp_.data() + offset(t, z), std::size_t(actions_)}; }

    /// Set a row from probabilities (validated as a Pmf).
    void set_row(int t, int z, const Pmf& p);
    /// Set a row from unnormalized log-weights; -inf entries become zero probability.
    void set_log_row(int t, int z, std::span<const double> logits);
    void set_point_mass(int t, int z, int a);
    /// Set both representations verbatim (file loading); they must agree.
    void restore_row(int t, int z, std::span<const double> p, std::span<const double> logp);

    /// All probabilities strictly positive in the log representation.
    bool is_interior() const;
    bool is_pure() const;

    const std::optional<std::vector<SharingGroup>>& sharing() const { return sharing_; }
    /// Install a sharing scheme. Groups must partition experts x times (ConfigError
    /// otherwise); each group is synchronized to the row of its first cell.
    void set_sharing(std::vector<SharingGroup> groups);
    void clear_sharing() { sharing_.reset(); }

    /// μ(S_z) for every expert.
    std::vector<double> expert_mass(const Pmf& mu) const;

    bool operator==(const PartitionedPolicy& other) const = default;

private:
    std::size_t offset(int t, int z) const { return (std::size_t(t) * experts_ + z) * actions_; }

    int horizon_ = 0;
    int experts_ = 0;
    int actions_ = 0;
    std::vector<int> assignment_;
    std::vector<double> theta_;
    std::vector<double> logp_;
    std::optional<std::vector<SharingGroup>> sharing_;
};

inline bool operator==(const SharingGroup& a, const SharingGroup& b) {
    return a.experts == b.experts && a.times == b.times;
}

} // namespace qdp
