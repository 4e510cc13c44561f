#pragma once

#include "qdp/core/engine.hpp"
#include "qdp/policy.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace qdp::opt {

using core::ExpertActionTable;
using core::RewardDecomposition;

/// Q̄^(t)_z(a) with the expert masses it was averaged over. Rows with zero reach are zero.
struct QBarTable {
    ExpertActionTable q;
    std::vector<double> reach; // [t][z]

    QBarTable() = default;
    QBarTable(int T, int Z, int A) : q(T, Z, A), reach(std::size_t(T) * Z, 0.0) {}
    int horizon() const { return q.horizon; }
    int experts() const { return q.experts; }
    int actions() const { return q.actions; }
    double at(int t, int z, int a) const { return q.at(t, z, a); }
    double& at(int t, int z, int a) { return q.at(t, z, a); }
    double reach_at(int t, int z) const { return reach[std::size_t(t) * q.experts + z]; }
    double& reach_at(int t, int z) { return reach[std::size_t(t) * q.experts + z]; }
};

QBarTable qbar(const core::MarginalsTrace& trace, const core::NonlinearModel& model, const core::SigmaTrace& sigmas,
               const PartitionedPolicy& policy);

/// θ' ∝ θ·exp(η·Q̄) on every reachable (t,z). Throws DomainError on a non-interior policy.
PartitionedPolicy exp_q_update(const PartitionedPolicy& policy, const QBarTable& qb, double eta);

/// Σ_t Σ_z reach · Var_{A∼θ}(Q̄(A)).
double stopping_stat(const PartitionedPolicy& policy, const QBarTable& qb);

/// Per sharing group, θ' ∝ θ·exp(η·Σ_{cells} Q̄). The exponent is the plain sum over the
/// group's cells, without reach weights.
PartitionedPolicy shared_update(const PartitionedPolicy& policy, const QBarTable& qb, double eta);

/// Q̄ centered over actions per (t,z).
ExpertActionTable approx_natural_gradient(const QBarTable& qb);

/// Point mass on the mode of each row, lowest index on ties.
PartitionedPolicy to_pure_policy(const PartitionedPolicy& policy);

struct Violation {
    int t, z, a;
    double prob;  ///< θ(a)
    double gap;   ///< max Q̄ − Q̄(a)
    double reach;
};

/// Flags (t, z, a) on reachable rows when Q̄(a) is more than `tol` below the row maximum
/// and the action carries enough mass to matter: reach·θ(a)·gap > tol. Actions whose
/// probability has decayed to numerical dust are treated as unsupported.
std::vector<Violation> local_opt_check(const PartitionedPolicy& policy, const QBarTable& qb, double tol);

/// One forward/backward pass.
struct Evaluation {
    RewardDecomposition value;
    std::optional<QBarTable> qbar;
};

class Evaluator {
public:
    virtual ~Evaluator() = default;
    virtual Evaluation evaluate(const PartitionedPolicy& policy, bool with_qbar) const = 0;
    /// Uniform policy with the right partition.
    virtual PartitionedPolicy initial_policy() const = 0;
};

/// Evaluator on a generic model via forward_marginals / backward_sigma.
class GenericEvaluator : public Evaluator {
public:
    GenericEvaluator(const core::NonlinearModel& model, Pmf mu0, std::vector<int> assignment, int experts)
        : model_(model), mu0_(std::move(mu0)), assignment_(std::move(assignment)), experts_(experts) {}
    Evaluation evaluate(const PartitionedPolicy& policy, bool with_qbar) const override;
    PartitionedPolicy initial_policy() const override;

private:
    const core::NonlinearModel& model_;
    Pmf mu0_;
    std::vector<int> assignment_;
    int experts_;
};

struct TrainOptions {
    double eta = 1.0;
    double epsilon = 1e-6;
    int max_episodes = 10000;
    bool adaptive = false;
    int max_halvings = 60;
    int snapshot_every = 0; ///< 0 disables policy snapshots
};

struct EpisodeRecord {
    int episode = 0;
    RewardDecomposition value;
    double stopping_stat = 0.0;
    double eta_effective = 0.0; ///< step used for the update leaving this episode; 0 when stopped
    bool accepted = true;
};

struct TrainTrace {
    std::vector<EpisodeRecord> episodes;
    PartitionedPolicy final_policy;
    RewardDecomposition final_value;
    double final_stat = 0.0;
    bool converged = false;
    std::vector<std::pair<int, PartitionedPolicy>> snapshots;
};

/// Exponentiated Q-ascent. Uses shared_update when the initial policy carries a sharing scheme.
/// `on_episode` (optional) sees each record as it is produced.
TrainTrace train(const Evaluator& evaluator, PartitionedPolicy init, const TrainOptions& opt,
                 const std::function<void(const EpisodeRecord&)>& on_episode = {});

// Policy files

/// JSON document holding every (t, z) row.
std::string policy_to_json(const PartitionedPolicy& policy);
PartitionedPolicy policy_from_json(const std::string& text);
void save_policy(const PartitionedPolicy& policy, const std::string& path);
PartitionedPolicy load_policy(const std::string& path);

/// Pure-policy matrix: one row per t, one column per z, entries are action indices of the mode.
std::string pure_policy_csv(const PartitionedPolicy& policy);

/// Trace as CSV with columns episode, J, revenue, penalty, stopping_stat, eta_effective, accepted.
std::string trace_csv(const TrainTrace& trace);

} // namespace qdp::opt
