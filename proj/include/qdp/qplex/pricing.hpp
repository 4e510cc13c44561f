#pragma once

#include "qdp/core/engine.hpp"
#include "qdp/opt/optimizer.hpp"
#include "qdp/pmf.hpp"
#include "qdp/poisson.hpp"

#include <string>
#include <vector>

namespace qdp::qplex {

using core::Matrix;
using core::Vector;

struct Penalty {
    double C = 0.0;
    double k = 1.0;
    double alpha = 0.05;
    int zhat = -1;              ///< threshold count; -1 means "n" (buffer nonempty)
    bool charge_initial = false; ///< also charge epoch 0
};

/// Single-station pricing instance.
struct PricingSpec {
    int n = 1;   ///< servers
    int b = 0;   ///< buffer slots
    int T = 1;   ///< decision epochs
    std::vector<double> prices;
    Pmf service; ///< g over durations 1..ℓ_max (index 0 is ℓ = 1)
    std::vector<std::vector<double>> lambda; ///< [t][a]
    double c_W = 0.0;
    double c_T = 0.0;
    Penalty penalty;
    std::vector<int> size; ///< x(z) for z = 0..n+b; empty means min(z, n)

    int max_count() const { return n + b; }
    int counters() const { return n + b + 1; }
    int labels() const { return int(service.size()); }
    int states() const { return counters() * labels(); }
    int actions() const { return int(prices.size()); }
    int index(int z, int l) const { return z * labels() + (l - 1); }
    int counter_of(int s) const { return s / labels(); }
    int label_of(int s) const { return s % labels() + 1; }
    int x(int z) const { return size.empty() ? std::min(z, n) : size[z]; }
    int zhat() const { return penalty.zhat < 0 ? n : penalty.zhat; }
    double mean_service() const;
    bool penalized(int t) const { return penalty.C > 0.0 && (t >= 1 || penalty.charge_initial); }

    /// Throws ConfigError on inconsistent fields.
    void validate() const;
};

enum LabelType : int { New = 0, Old = 1 };

/// Precomputed Poisson tables per (t, a), shared read-only.
class ArrivalTables {
public:
    explicit ArrivalTables(const PricingSpec& spec);
    const PoissonTable& at(int t, int a) const { return tables_[std::size_t(t) * actions_ + a]; }

private:
    int actions_;
    std::vector<PoissonTable> tables_;
};

/// Remaining-duration law of a uniformly chosen in-service customer: μ_{|z}, or g when μ(z) = 0.
Pmf label_conditional(const PricingSpec& spec, const Pmf& mu, int z);
/// Σ_{ℓ≥2} ξ(ℓ), i.e. 1 − ξ(1) evaluated without cancellation.
double continuing_mass(const Pmf& xi);

Pmf departures_pmf(const PricingSpec& spec, const Pmf& xi, int z);
Pmf routing_pmf(const PricingSpec& spec, int t, int z, int d, int a);
/// Index 0 = new, 1 = old.
Pmf type_pmf(const PricingSpec& spec, int z, int d, int z_next);
Pmf label_pmf(const PricingSpec& spec, const Pmf& xi, LabelType k);

/// Poisson law of arrivals at epoch t under price index a, tabulated far enough for every cap.
PoissonTable arrival_law(const PricingSpec& spec, int t, int a);

/// p̂_ξ(·|z, a) over the flat state space; `arrivals` is the law for (t, a).
std::vector<double> kernel_hat(const PricingSpec& spec, const PoissonTable& arrivals, const Pmf& xi, int z);
/// p_μ(·|(z,ℓ), a).
Pmf kernel(const PricingSpec& spec, int t, const Pmf& mu, int s, int a);

struct RewardParts {
    double revenue = 0.0;
    double waiting = 0.0;
    double penalty = 0.0;
    double total() const { return revenue + waiting + penalty; }
};

/// Σ_{z>ẑ} μ(z).
double buffer_mass(const PricingSpec& spec, const Pmf& mu);
/// −C·max(v − α, 0)^k, charged in the μ-only slot.
double penalty_value(const PricingSpec& spec, const Pmf& mu);
/// ∂penalty/∂μ(z,ℓ) for z > ẑ (the same for every such state, zero otherwise).
double penalty_slope(const PricingSpec& spec, const Pmf& mu);

/// r̂: expected revenue and waiting cost from counter z at price a.
double revenue_hat(const PricingSpec& spec, const PoissonTable& arrivals, double price, const Pmf& xi, int z);
RewardParts reward(const PricingSpec& spec, int t, const Pmf& mu, int s, int a);
double terminal_reward(const PricingSpec& spec, const Pmf& mu, int s);

/// δ(z=0) ⊗ g.
Pmf initial_distribution(const PricingSpec& spec);

/// The pricing model as a generic NonlinearModel with μ-partials computed the
/// straightforward way (raw ξ-derivatives pushed through the conditional map).
class PricingModel : public core::NonlinearModel {
public:
    explicit PricingModel(PricingSpec spec);

    const PricingSpec& spec() const { return spec_; }
    int horizon() const override { return spec_.T; }
    int state_count() const override { return spec_.states(); }
    int action_count() const override { return spec_.actions(); }

    Pmf kernel(int t, const Pmf& mu, int s, int a) const override;
    double reward(int t, const Pmf& mu, int s, int a) const override;
    double terminal_reward(const Pmf& mu, int s) const override;
    core::SparsePartials kernel_mu_partials(int t, const Pmf& mu, int s, int a) const override;
    Vector reward_mu_partials(int t, const Pmf& mu, int s, int a) const override;
    Vector terminal_mu_partials(const Pmf& mu, int s) const override;
    double reward_constant(int t, const Pmf& mu) const override;
    double terminal_constant(const Pmf& mu) const override;

    /// Raw partials ∂p̂_ξ(s'|z,a)/∂ξ(ℓ), rows ℓ-1, columns s'.
    Matrix kernel_xi_partials(int t, const Pmf& xi, int z, int a) const;

private:
    PricingSpec spec_;
    ArrivalTables arr_;
};

/// Counter-expert assignment z(s) for the flat state space.
std::vector<int> counter_assignment(const PricingSpec& spec);

/// Result of one efficient backward step.
struct SigmaStep {
    Vector sigma; ///< over S
    Matrix qhat;  ///< [z][a], excludes the μ-only constant
    double constant = 0.0; ///< c^(t)
};

/// One backward step by the sum-product scheme, using the rows θ_z^(t) of `policy`.
SigmaStep efficient_sigma_step(const PricingSpec& spec, const ArrivalTables& arr, int t, const Pmf& mu,
                               const PartitionedPolicy& policy, const Vector& sigma_next);
/// σ^(T).
Vector terminal_sigma(const PricingSpec& spec, const Pmf& mu);

/// Q̂(z,a) and its centered ξ-gradient for one counter, for verification. grad is [a][ℓ-1].
struct QhatGradient {
    std::vector<double> qhat;
    Matrix centered;
};
QhatGradient qhat_with_gradient(const PricingSpec& spec, const ArrivalTables& arr, int t, const Pmf& xi, int z,
                                const Vector& sigma_next);

/// Marginals by the factored forward pass.
core::MarginalsTrace efficient_forward(const PricingSpec& spec, const ArrivalTables& arr,
                                       const PartitionedPolicy& policy);

/// Full efficient pass: values, σ and Q̄.
struct PricingPass {
    core::MarginalsTrace trace;
    core::RewardDecomposition value;
    std::vector<Vector> sigma;
    opt::QBarTable qbar;
};
PricingPass efficient_pass(const PricingSpec& spec, const ArrivalTables& arr, const PartitionedPolicy& policy,
                           bool with_qbar);

/// P[z > ẑ] per epoch t = 0..T.
std::vector<double> buffer_probabilities(const PricingSpec& spec, const core::MarginalsTrace& trace);

class PricingEvaluator : public opt::Evaluator {
public:
    explicit PricingEvaluator(PricingSpec spec) : spec_(std::move(spec)), arr_(spec_) {}
    opt::Evaluation evaluate(const PartitionedPolicy& policy, bool with_qbar) const override;
    PartitionedPolicy initial_policy() const override;
    const PricingSpec& spec() const { return spec_; }
    const ArrivalTables& arrivals() const { return arr_; }

private:
    PricingSpec spec_;
    ArrivalTables arr_;
};

// Instance construction

/// Price grid 0.1, 0.2, ..., 1.1.
std::vector<double> default_prices();
/// Uni, UniM, UniH, BB.
Pmf named_service_pmf(const std::string& name);
/// DEC, INC, ALT, CON over T epochs, time-average 1.
std::vector<double> named_shape(const std::string& name, int T);
/// Scale to time-average 1; throws ConfigError on negative entries.
std::vector<double> normalize_shape(std::vector<double> shape);
/// λ^(t)(a) = (n·u/E[S])·s^(t)·(1.1 − a).
std::vector<std::vector<double>> build_arrival_table(const std::vector<double>& shape, double u_avg_max, int n,
                                                     double mean_service, const std::vector<double>& prices);

/// High-level description of an instance; `build_spec` turns it into a PricingSpec.
struct InstanceParams {
    int n = 3;
    int b = 3;
    int T = 50;
    std::vector<double> prices = default_prices();
    Pmf service = named_service_pmf("Uni");
    std::vector<double> shape; ///< empty means constant
    double u_avg_max = 5.0;
    double c_W = 0.0;
    double c_T = 0.0;
    Penalty penalty;
};

PricingSpec build_spec(const InstanceParams& p);

} // namespace qdp::qplex
