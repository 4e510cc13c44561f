// Sum-product forward and backward passes for the pricing model.
//
// Backward step per counter z, with ξ = μ_{|z} and D = Σ_{ℓ≥2} ξ(ℓ):
//   b(z',new) = Σ_ℓ' g(ℓ')·σ'(z',ℓ'),  b(z',old) = Σ_ℓ' ξ(ℓ'+1)/D·σ'(z',ℓ')
//   Q̂(z,a)   = r̂(z,a) + Σ_{d,z',k'} q(d)·ρ_a(z'|z,d)·q(k'|z,d,z')·b(z',k')
// and the centered ξ-gradient of Q̂ splits into a binomial part, carried by ξ(1),
// and a label-shift part (σ'(z',ℓ−1) − b(z',old))/D for ℓ > 1.

#include "qdp/errors.hpp"
#include "qdp/qplex/pricing.hpp"

#include <cmath>

namespace qdp::qplex {

namespace {

// d/dp Binomial(x,p)(d), case by case
std::vector<double> binomial_derivative(int x, double p, const std::vector<double>& q) {
    std::vector<double> out(x + 1, 0.0);
    if (x == 0) return out;
    if (p <= 0.0) {
        out[0] = -x;
        out[1] += x;
    } else if (p >= 1.0) {
        out[x] = x;
        out[x - 1] += -x;
    } else {
        for (int d = 0; d <= x; ++d) out[d] = q[d] * (d - x * p) / (p * (1.0 - p));
    }
    return out;
}

struct CounterBlock {
    std::vector<double> qhat;              // [a]
    std::vector<double> dq1;               // [a] ∂Q̂/∂ξ(1) from the binomial factor
    std::vector<std::vector<double>> fold; // [a][z'] Σ_d q(d)·ρ·q(old)
    std::vector<double> bold;              // [z']
    double p1 = 0.0;
    double D = 0.0;
};

// `with_fold` fills the per-action old-type folds needed by the ξ-gradient.
CounterBlock counter_block(const PricingSpec& spec, const ArrivalTables& arr, int t, const Pmf& xi, int z,
                           const Vector& sigma_next, const std::vector<double>& bnew, bool with_fold = true) {
    const int L = spec.labels();
    const int Zn = spec.counters();
    const int A = spec.actions();
    const int x = spec.x(z);
    CounterBlock cb;
    cb.p1 = xi[0];
    cb.D = continuing_mass(xi);
    const std::vector<double> qd = binomial_pmf(x, cb.p1);
    const std::vector<double> dq = binomial_derivative(x, cb.p1, qd);

    cb.bold.assign(Zn, 0.0);
    if (cb.D > 0.0)
        for (int z2 = 0; z2 < Zn; ++z2) {
            double v = 0.0;
            for (int l = 1; l < L; ++l) v += xi[l] * sigma_next[spec.index(z2, l)];
            cb.bold[z2] = v / cb.D;
        }

    // old-type share o(d, z') and the branch value it selects, both action-free
    std::vector<double> o(std::size_t(x + 1) * Zn, 0.0), bt(std::size_t(x + 1) * Zn, 0.0);
    for (int d = 0; d <= x; ++d)
        for (int z2 = std::max(0, z - d); z2 < Zn; ++z2) {
            const std::size_t k = std::size_t(d) * Zn + z2;
            if (z2 > 0 && spec.x(z2) > 0) o[k] = double(x - d) / double(spec.x(z2));
            bt[k] = (1.0 - o[k]) * bnew[z2] + o[k] * cb.bold[z2];
        }

    cb.qhat.assign(A, 0.0);
    cb.dq1.assign(A, 0.0);
    if (with_fold) cb.fold.assign(A, std::vector<double>(Zn, 0.0));
    const double waiting = -spec.c_W * std::max(0, z - spec.n);
    const int top = spec.max_count();
    for (int a = 0; a < A; ++a) {
        const PoissonTable& pt = arr.at(t, a);
        double qh = waiting, d1 = 0.0;
        double rev = 0.0, drev = 0.0;
        for (int d = 0; d <= x; ++d) {
            const int cap = top + d - z;
            const double tm = pt.truncated_mean(cap);
            rev += qd[d] * tm;
            drev += dq[d] * tm;
            const double* orow = &o[std::size_t(d) * Zn];
            const double* brow = &bt[std::size_t(d) * Zn];
            double sb = 0.0;
            const int z0 = std::max(0, z - d);
            for (int z2 = z0; z2 < top; ++z2) sb += pt.pmf(z2 + d - z) * brow[z2];
            sb += pt.sf(cap) * brow[top];
            if (with_fold) {
                auto& fo = cb.fold[a];
                for (int z2 = z0; z2 < top; ++z2) fo[z2] += qd[d] * pt.pmf(z2 + d - z) * orow[z2];
                fo[top] += qd[d] * pt.sf(cap) * orow[top];
            }
            qh += qd[d] * sb;
            d1 += dq[d] * sb;
        }
        cb.qhat[a] = qh + spec.prices[a] * rev;
        cb.dq1[a] = d1 + spec.prices[a] * drev;
    }
    return cb;
}

std::vector<double> new_branch(const PricingSpec& spec, const Vector& sigma_next) {
    const int L = spec.labels();
    std::vector<double> bnew(spec.counters(), 0.0);
    for (int z2 = 0; z2 < spec.counters(); ++z2) {
        double v = 0.0;
        for (int l = 1; l <= L; ++l) v += spec.service[l - 1] * sigma_next[spec.index(z2, l)];
        bnew[z2] = v;
    }
    return bnew;
}

// centered ∂Q̂(z,a)/∂ξ(ℓ)
double centered_partial(const PricingSpec& spec, const CounterBlock& cb, int a, int l, const Vector& sigma_next) {
    double g = ((l == 1 ? 1.0 : 0.0) - cb.p1) * cb.dq1[a];
    if (l > 1 && cb.D > 0.0) {
        double h = 0.0;
        for (int z2 = 0; z2 < spec.counters(); ++z2) {
            const double f = cb.fold[a][z2];
            if (f != 0.0) h += f * (sigma_next[spec.index(z2, l - 1)] - cb.bold[z2]);
        }
        g += h / cb.D;
    }
    return g;
}

double counter_mass(const PricingSpec& spec, const Pmf& mu, int z) {
    double m = 0.0;
    for (int l = 1; l <= spec.labels(); ++l) m += mu[spec.index(z, l)];
    return m;
}

void check_policy(const PricingSpec& spec, const PartitionedPolicy& policy) {
    if (policy.horizon() != spec.T) throw DomainError("policy horizon does not match the pricing spec");
    if (policy.expert_count() != spec.counters() || policy.action_count() != spec.actions() ||
        policy.state_count() != spec.states())
        throw DomainError("policy is not a counter-based policy for this spec");
    for (int s = 0; s < spec.states(); ++s)
        if (policy.expert_of(s) != spec.counter_of(s)) throw DomainError("policy experts must be the counters");
}

} // namespace

Vector terminal_sigma(const PricingSpec& spec, const Pmf& mu) {
    const double c = penalty_value(spec, mu);
    const double slope = penalty_slope(spec, mu);
    Vector sig(spec.states());
    for (int s = 0; s < spec.states(); ++s) {
        const int z = spec.counter_of(s);
        sig[s] = c - spec.c_T * z + (z > spec.zhat() ? slope : 0.0);
    }
    return sig;
}

SigmaStep efficient_sigma_step(const PricingSpec& spec, const ArrivalTables& arr, int t, const Pmf& mu,
                               const PartitionedPolicy& policy, const Vector& sigma_next) {
    const int L = spec.labels();
    const int A = spec.actions();
    const int Zn = spec.counters();
    SigmaStep out;
    out.sigma.resize(spec.states());
    out.qhat.resize(Zn, A);
    out.constant = spec.penalized(t) ? penalty_value(spec, mu) : 0.0;
    const double slope = spec.penalized(t) ? penalty_slope(spec, mu) : 0.0;
    const std::vector<double> bnew = new_branch(spec, sigma_next);

    const int top = spec.max_count();
    int xmax = 0;
    for (int z = 0; z < Zn; ++z) xmax = std::max(xmax, spec.x(z));
    std::vector<double> fold_theta(Zn), shift(L), mixp(Zn + xmax + 1), mixsf(xmax + 1);
    for (int z = 0; z < Zn; ++z) {
        const double m = counter_mass(spec, mu, z);
        const Pmf xi = label_conditional(spec, mu, z);
        const CounterBlock cb = counter_block(spec, arr, t, xi, z, sigma_next, bnew, false);
        const auto th = policy.row(t, z);
        double base = out.constant + (z > spec.zhat() ? slope : 0.0);
        double d1 = 0.0;
        for (int a = 0; a < A; ++a) {
            out.qhat(z, a) = cb.qhat[a];
            base += th[a] * cb.qhat[a];
            d1 += th[a] * cb.dq1[a];
        }
        // Σ_a θ(a)·fold_a through the row-mixed arrival law
        std::fill(fold_theta.begin(), fold_theta.end(), 0.0);
        if (m > 0.0 && cb.D > 0.0) {
            const int x = spec.x(z);
            const std::vector<double> qd = binomial_pmf(x, cb.p1);
            std::fill(mixp.begin(), mixp.end(), 0.0);
            std::fill(mixsf.begin(), mixsf.end(), 0.0);
            for (int a = 0; a < A; ++a) {
                if (th[a] == 0.0) continue;
                const PoissonTable& pt = arr.at(t, a);
                for (int y = 0; y < top - z + x; ++y) mixp[y] += th[a] * pt.pmf(y);
                for (int d = 0; d <= x; ++d) mixsf[d] += th[a] * pt.sf(top + d - z);
            }
            for (int d = 0; d <= x; ++d)
                for (int z2 = std::max(1, z - d); z2 < Zn; ++z2) {
                    if (spec.x(z2) <= 0) continue;
                    const double rho = z2 < top ? mixp[z2 + d - z] : mixsf[d];
                    fold_theta[z2] += qd[d] * rho * (double(x - d) / double(spec.x(z2)));
                }
        }
        // label-shift part h(ℓ) = Σ_z' fold_θ(z')·(σ'(z',ℓ−1) − b(z',old)), accumulated row by row
        std::fill(shift.begin(), shift.end(), 0.0);
        if (m > 0.0 && cb.D > 0.0)
            for (int z2 = 0; z2 < Zn; ++z2) {
                const double f = fold_theta[z2];
                if (f == 0.0) continue;
                const double* row = &sigma_next[spec.index(z2, 1)];
                for (int l = 2; l <= L; ++l) shift[l - 1] += f * (row[l - 2] - cb.bold[z2]);
            }
        for (int l = 1; l <= L; ++l) {
            double v = base;
            // centered terms carry the weight μ(z); they vanish on unreachable counters
            if (m > 0.0) {
                v += ((l == 1 ? 1.0 : 0.0) - cb.p1) * d1;
                if (l > 1 && cb.D > 0.0) v += shift[l - 1] / cb.D;
            }
            out.sigma[spec.index(z, l)] = v;
        }
    }
    if (!out.sigma.allFinite()) throw NumericalError("non-finite sigma at t=" + std::to_string(t));
    return out;
}

QhatGradient qhat_with_gradient(const PricingSpec& spec, const ArrivalTables& arr, int t, const Pmf& xi, int z,
                                const Vector& sigma_next) {
    const CounterBlock cb = counter_block(spec, arr, t, xi, z, sigma_next, new_branch(spec, sigma_next));
    QhatGradient out;
    out.qhat = cb.qhat;
    out.centered.resize(spec.actions(), spec.labels());
    for (int a = 0; a < spec.actions(); ++a)
        for (int l = 1; l <= spec.labels(); ++l) out.centered(a, l - 1) = centered_partial(spec, cb, a, l, sigma_next);
    return out;
}

core::MarginalsTrace efficient_forward(const PricingSpec& spec, const ArrivalTables& arr,
                                       const PartitionedPolicy& policy) {
    check_policy(spec, policy);
    const int L = spec.labels();
    const int Zn = spec.counters();
    const int A = spec.actions();
    core::MarginalsTrace tr;
    tr.mu.push_back(initial_distribution(spec));
    int xmax = 0;
    for (int z = 0; z < Zn; ++z) xmax = std::max(xmax, spec.x(z));
    std::vector<double> fnew(Zn), fold(Zn), mixp(Zn + xmax + 1), mixsf(xmax + 1);
    for (int t = 0; t < spec.T; ++t) {
        const Pmf& mu = tr.mu.back();
        std::vector<double> next(spec.states(), 0.0);
        std::fill(fnew.begin(), fnew.end(), 0.0);
        for (int z = 0; z < Zn; ++z) {
            const double m = counter_mass(spec, mu, z);
            if (!(m > 0.0)) continue;
            const Pmf xi = label_conditional(spec, mu, z);
            const double D = continuing_mass(xi);
            const int x = spec.x(z);
            const std::vector<double> qd = binomial_pmf(x, xi[0]);
            std::fill(fold.begin(), fold.end(), 0.0);
            // arrival law mixed over the row: admitted-count pmf below the cap, tail at the cap
            const auto th = policy.row(t, z);
            const int top = spec.max_count();
            std::fill(mixp.begin(), mixp.end(), 0.0);
            std::fill(mixsf.begin(), mixsf.end(), 0.0);
            for (int a = 0; a < A; ++a) {
                if (th[a] == 0.0) continue;
                const PoissonTable& pt = arr.at(t, a);
                for (int y = 0; y < top - z + x; ++y) mixp[y] += th[a] * pt.pmf(y);
                for (int d = 0; d <= x; ++d) mixsf[d] += th[a] * pt.sf(top + d - z);
            }
            for (int d = 0; d <= x; ++d) {
                if (qd[d] == 0.0) continue;
                const double w = m * qd[d];
                for (int z2 = std::max(0, z - d); z2 < Zn; ++z2) {
                    const double rho = z2 < top ? mixp[z2 + d - z] : mixsf[d];
                    double o = 0.0;
                    if (z2 > 0 && spec.x(z2) > 0) o = double(x - d) / double(spec.x(z2));
                    const double v = w * rho;
                    fnew[z2] += v * (1.0 - o);
                    fold[z2] += v * o;
                }
            }
            if (D > 0.0)
                for (int z2 = 0; z2 < Zn; ++z2) {
                    if (fold[z2] == 0.0) continue;
                    for (int l = 1; l < L; ++l) next[spec.index(z2, l)] += fold[z2] * xi[l] / D;
                }
        }
        for (int z2 = 0; z2 < Zn; ++z2)
            for (int l = 1; l <= L; ++l) next[spec.index(z2, l)] += fnew[z2] * spec.service[l - 1];
        tr.mu.emplace_back(std::move(next));
    }
    return tr;
}

PricingPass efficient_pass(const PricingSpec& spec, const ArrivalTables& arr, const PartitionedPolicy& policy,
                           bool with_qbar) {
    PricingPass out;
    out.trace = efficient_forward(spec, arr, policy);
    const int Zn = spec.counters();
    const int A = spec.actions();
    auto& v = out.value;
    v.per_period.assign(spec.T, 0.0);
    double revenue = 0.0, waiting = 0.0;
    for (int t = 0; t < spec.T; ++t) {
        const Pmf& mu = out.trace.mu[t];
        const double c = spec.penalized(t) ? penalty_value(spec, mu) : 0.0;
        double rt = 0.0, wt = 0.0;
        for (int z = 0; z < Zn; ++z) {
            const double m = counter_mass(spec, mu, z);
            if (!(m > 0.0)) continue;
            const Pmf xi = label_conditional(spec, mu, z);
            const auto th = policy.row(t, z);
            for (int a = 0; a < A; ++a)
                if (th[a] > 0.0) rt += m * th[a] * revenue_hat(spec, arr.at(t, a), spec.prices[a], xi, z);
            wt -= m * spec.c_W * std::max(0, z - spec.n);
        }
        revenue += rt;
        waiting += wt;
        v.penalty += c;
        v.per_period[t] = rt + wt + c;
    }
    const Pmf& muT = out.trace.mu[spec.T];
    double term = 0.0;
    for (int z = 0; z < Zn; ++z) term -= spec.c_T * z * counter_mass(spec, muT, z);
    v.penalty += penalty_value(spec, muT);
    v.running = revenue + waiting;
    v.terminal = term;
    v.revenue = revenue;
    v.waiting = waiting;
    v.total = v.running + v.terminal + v.penalty;
    if (!with_qbar) return out;

    out.sigma.assign(spec.T + 1, Vector());
    out.sigma[spec.T] = terminal_sigma(spec, muT);
    out.qbar = opt::QBarTable(spec.T, Zn, A);
    for (int t = spec.T - 1; t >= 0; --t) {
        const Pmf& mu = out.trace.mu[t];
        SigmaStep st = efficient_sigma_step(spec, arr, t, mu, policy, out.sigma[t + 1]);
        for (int z = 0; z < Zn; ++z) {
            const double m = counter_mass(spec, mu, z);
            out.qbar.reach_at(t, z) = m;
            if (!(m > 0.0)) continue;
            for (int a = 0; a < A; ++a) out.qbar.at(t, z, a) = st.constant + st.qhat(z, a);
        }
        out.sigma[t] = std::move(st.sigma);
    }
    return out;
}

opt::Evaluation PricingEvaluator::evaluate(const PartitionedPolicy& policy, bool with_qbar) const {
    PricingPass p = efficient_pass(spec_, arr_, policy, with_qbar);
    opt::Evaluation ev;
    ev.value = std::move(p.value);
    if (with_qbar) ev.qbar = std::move(p.qbar);
    return ev;
}

PartitionedPolicy PricingEvaluator::initial_policy() const {
    return PartitionedPolicy(spec_.T, counter_assignment(spec_), spec_.counters(), spec_.actions());
}

} // namespace qdp::qplex
