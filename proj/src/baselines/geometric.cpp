#include "qdp/baselines/geometric.hpp"

#include "qdp/errors.hpp"

#include <cmath>
#include <limits>

namespace qdp::baselines {

TruncatedGeometric truncated_geometric(double p, double tail) {
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("geometric parameter must lie in (0, 1]");
    if (!(tail > 0.0 && tail < 1.0)) throw DomainError("tail cutoff must lie in (0, 1)");
    TruncatedGeometric out;
    out.p = p;
    out.support = p == 1.0 ? 1 : std::max(1, int(std::ceil(std::log(tail) / std::log1p(-p) - 1e-12)));
    std::vector<double> w(out.support);
    double tot = 0.0;
    for (int l = 0; l < out.support; ++l) tot += w[l] = p * std::pow(1.0 - p, l);
    double mean = 0.0;
    for (int l = 0; l < out.support; ++l) {
        w[l] /= tot;
        mean += (l + 1) * w[l];
    }
    out.pmf = Pmf(std::move(w));
    out.mean = mean;
    return out;
}

namespace {

double truncated_mean(double p, int L) {
    double tot = 0.0, mean = 0.0, q = 1.0;
    for (int l = 1; l <= L; ++l) {
        tot += p * q;
        mean += l * p * q;
        q *= 1.0 - p;
    }
    return mean / tot;
}

} // namespace

TruncatedGeometric fit_truncated_geometric(double target_mean, double tail) {
    if (!(target_mean > 1.0)) throw DomainError("truncated geometric mean must exceed 1");
    double p = 1.0 / target_mean;
    int L = truncated_geometric(p, tail).support;
    for (int iter = 0; iter < 100; ++iter) {
        // the truncated mean decreases in p
        double lo = 1e-12, hi = 1.0;
        for (int k = 0; k < 200 && hi - lo > 1e-16; ++k) {
            const double mid = 0.5 * (lo + hi);
            (truncated_mean(mid, L) > target_mean ? lo : hi) = mid;
        }
        p = 0.5 * (lo + hi);
        const int L2 = truncated_geometric(p, tail).support;
        if (L2 == L) break;
        L = L2;
    }
    TruncatedGeometric out = truncated_geometric(p, tail);
    if (out.support != L) {
        // ℓ_max oscillates between two values; keep the refit for L and truncate there
        std::vector<double> w(L);
        double tot = 0.0;
        for (int l = 0; l < L; ++l) tot += w[l] = p * std::pow(1.0 - p, l);
        for (double& v : w) v /= tot;
        out.support = L;
        out.pmf = Pmf(std::move(w));
        out.mean = truncated_mean(p, L);
    }
    return out;
}

double completion_probability(const Pmf& g) { return g[0]; }

namespace {

// Expected one-period reward and successor law from counter z under action a.
struct CountStep {
    double reward = 0.0;
    std::vector<double> next; // over z'
};

CountStep count_step(const qplex::PricingSpec& spec, const PoissonTable& pt, double q, int z, int a) {
    CountStep out;
    out.next.assign(spec.counters(), 0.0);
    const std::vector<double> dep = binomial_pmf(spec.x(z), q);
    const int top = spec.max_count();
    double rev = 0.0;
    for (int d = 0; d <= spec.x(z); ++d) {
        if (dep[d] == 0.0) continue;
        const int cap = top + d - z;
        rev += dep[d] * pt.truncated_mean(cap);
        for (int m = 0; m < cap; ++m) out.next[z - d + m] += dep[d] * pt.pmf(m);
        out.next[top] += dep[d] * pt.sf(cap);
    }
    out.reward = spec.prices[a] * rev - spec.c_W * std::max(0, z - spec.n);
    return out;
}

template <class Choose>
std::vector<std::vector<double>> count_backward(const qplex::PricingSpec& spec, Choose&& choose) {
    if (spec.penalty.C > 0.0) throw UnsupportedModelError("count model has no distribution-dependent penalty term");
    const qplex::ArrivalTables arr(spec);
    const double q = completion_probability(spec.service);
    const int Z = spec.counters();
    std::vector<std::vector<double>> V(spec.T + 1, std::vector<double>(Z));
    for (int z = 0; z < Z; ++z) V[spec.T][z] = -spec.c_T * z;
    std::vector<double> Q(spec.actions());
    for (int t = spec.T - 1; t >= 0; --t)
        for (int z = 0; z < Z; ++z) {
            for (int a = 0; a < spec.actions(); ++a) {
                const CountStep st = count_step(spec, arr.at(t, a), q, z, a);
                double v = st.reward;
                for (int z2 = 0; z2 < Z; ++z2) v += st.next[z2] * V[t + 1][z2];
                Q[a] = v;
            }
            V[t][z] = choose(t, z, Q);
        }
    return V;
}

} // namespace

CountMdpResult geometric_exact(const qplex::PricingSpec& spec) {
    CountMdpResult out;
    out.policy = CountPolicy(spec.T, spec.counters());
    out.V = count_backward(spec, [&](int t, int z, const std::vector<double>& Q) {
        int best = 0;
        for (int a = 1; a < int(Q.size()); ++a)
            if (Q[a] > Q[best]) best = a;
        out.policy.at(t, z) = best;
        return Q[best];
    });
    out.value = out.V[0][0];
    return out;
}

double geometric_evaluate(const qplex::PricingSpec& spec, const PartitionedPolicy& policy) {
    if (policy.horizon() != spec.T || policy.expert_count() != spec.counters() || policy.action_count() != spec.actions())
        throw DomainError("policy dimensions do not match the instance");
    return count_backward(spec, [&](int t, int z, const std::vector<double>& Q) {
        double v = 0.0;
        for (int a = 0; a < int(Q.size()); ++a) v += policy.prob(t, z, a) * Q[a];
        return v;
    })[0][0];
}

double geometric_evaluate(const qplex::PricingSpec& spec, const CountPolicy& policy) {
    return geometric_evaluate(spec, policy.to_policy(qplex::counter_assignment(spec), spec.actions()));
}

} // namespace qdp::baselines
