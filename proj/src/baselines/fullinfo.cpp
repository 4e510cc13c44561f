#include "qdp/baselines/fullinfo.hpp"

#include "qdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace qdp::baselines {

namespace {

double binom(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

// All vectors of length L with non-negative entries summing to k, in lexicographic order.
void compositions(int k, int L, const std::function<void(const std::vector<int>&)>& visit) {
    std::vector<int> c(L, 0);
    std::function<void(int, int)> rec = [&](int pos, int left) {
        if (pos == L - 1) {
            c[pos] = left;
            visit(c);
            c[pos] = 0;
            return;
        }
        for (int v = left; v >= 0; --v) {
            c[pos] = v;
            rec(pos + 1, left - v);
        }
        c[pos] = 0;
    };
    if (L > 0) rec(0, k);
}

struct Entrants {
    std::vector<std::vector<int>> comps;
    std::vector<double> probs;
};

// Multinomial(e, g) restricted to positive-probability outcomes.
Entrants entrant_law(int e, const Pmf& g) {
    Entrants out;
    const int L = int(g.size());
    const double lf = std::lgamma(e + 1.0);
    compositions(e, L, [&](const std::vector<int>& c) {
        double lp = lf;
        for (int l = 0; l < L; ++l) {
            if (c[l] == 0) continue;
            if (g[l] == 0.0) return;
            lp += c[l] * std::log(g[l]) - std::lgamma(c[l] + 1.0);
        }
        out.comps.push_back(c);
        out.probs.push_back(std::exp(lp));
    });
    return out;
}

void require_plain(const qplex::PricingSpec& spec) {
    if (!spec.size.empty()) throw UnsupportedModelError("full-information model needs the default size function");
    if (spec.penalty.C > 0.0)
        throw UnsupportedModelError("full-information model has no distribution-dependent penalty term");
}

} // namespace

double FullInfoModel::state_count(const qplex::PricingSpec& spec) {
    const int L = spec.labels();
    double total = 0.0;
    for (int z = 0; z <= spec.max_count(); ++z) total += binom(std::min(z, spec.n) + L - 1, L - 1);
    return total;
}

std::string FullInfoModel::key(int z, const std::vector<int>& h) const {
    std::string k;
    k.reserve(h.size() + 1);
    k.push_back(char(z));
    for (int v : h) k.push_back(char(v));
    return k;
}

FullInfoModel::FullInfoModel(qplex::PricingSpec spec, double guard) : spec_(std::move(spec)), arr_(spec_) {
    spec_.validate();
    require_plain(spec_);
    if (spec_.n > 120 || spec_.max_count() > 127) throw ResourceGuardError("full-information counts", spec_.max_count(), 127);
    const double count = state_count(spec_);
    if (count > guard) throw ResourceGuardError("full-information state space", count, guard);
    const int L = spec_.labels(), n = spec_.n;

    for (int z = 0; z <= spec_.max_count(); ++z)
        compositions(std::min(z, n), L, [&](const std::vector<int>& h) {
            index_.emplace(key(z, h), int(states_.size()));
            states_.push_back({z, h});
        });

    std::vector<Entrants> law;
    for (int e = 0; e <= n; ++e) law.push_back(entrant_law(e, spec_.service));

    // size check before filling
    double entries = 0.0;
    for (const auto& s : states_) {
        const int d = s.h.empty() ? 0 : s.h[0];
        const int busy = std::min(s.z, n) - d;
        for (int m = 0; m <= spec_.max_count() + d - s.z; ++m)
            entries += double(law[std::min(s.z - d + m, n) - busy].probs.size());
    }
    if (entries > 50.0 * guard) throw ResourceGuardError("full-information transition entries", entries, 50.0 * guard);

    row_offset_.reserve(states_.size() + 1);
    std::vector<int> base(L);
    for (const auto& s : states_) {
        row_offset_.push_back(entry_offset_.size());
        const int d = s.h.empty() ? 0 : s.h[0];
        const int busy = std::min(s.z, n) - d;
        for (int l = 0; l < L; ++l) base[l] = l + 1 < L ? s.h[l + 1] : 0;
        for (int m = 0; m <= spec_.max_count() + d - s.z; ++m) {
            entry_offset_.push_back(next_.size());
            const int z2 = s.z - d + m;
            const Entrants& en = law[std::min(z2, n) - busy];
            std::vector<int> h2(L);
            for (std::size_t k = 0; k < en.comps.size(); ++k) {
                for (int l = 0; l < L; ++l) h2[l] = base[l] + en.comps[k][l];
                const auto it = index_.find(key(z2, h2));
                if (it == index_.end()) throw ModelContractError("full-information successor outside the state space");
                next_.push_back(it->second);
                prob_.push_back(en.probs[k]);
            }
        }
    }
    row_offset_.push_back(entry_offset_.size());
    entry_offset_.push_back(next_.size());
}

int FullInfoModel::index_of(int z, const std::vector<int>& h) const {
    if (z < 0 || z > spec_.max_count() || int(h.size()) != spec_.labels()) return -1;
    const auto it = index_.find(key(z, h));
    return it == index_.end() ? -1 : it->second;
}

int FullInfoModel::capacity(int i) const { return spec_.max_count() + departures(i) - states_[i].z; }

std::span<const int> FullInfoModel::next_states(int i, int m) const {
    const std::size_t r = row_offset_[i] + m;
    return {next_.data() + entry_offset_[r], entry_offset_[r + 1] - entry_offset_[r]};
}

std::span<const double> FullInfoModel::next_probs(int i, int m) const {
    const std::size_t r = row_offset_[i] + m;
    return {prob_.data() + entry_offset_[r], entry_offset_[r + 1] - entry_offset_[r]};
}

double FullInfoModel::admit_prob(int t, int a, int i, int m) const {
    const int c = capacity(i);
    const PoissonTable& pt = arr_.at(t, a);
    return m < c ? pt.pmf(m) : (m == c ? pt.sf(c) : 0.0);
}

double FullInfoModel::reward(int t, int i, int a) const {
    const int z = states_[i].z;
    return spec_.prices[a] * arr_.at(t, a).truncated_mean(capacity(i)) - spec_.c_W * std::max(0, z - spec_.n);
}

double FullInfoModel::terminal(int i) const { return -spec_.c_T * states_[i].z; }

namespace {

std::vector<double> terminal_values(const FullInfoModel& m) {
    std::vector<double> V(m.size());
    for (int i = 0; i < m.size(); ++i) V[i] = m.terminal(i);
    return V;
}

// W(i, m) = Σ p(next | i, m)·V(next), stored per state with capacity+1 entries
std::vector<std::vector<double>> continuation(const FullInfoModel& m, const std::vector<double>& V) {
    std::vector<std::vector<double>> W(m.size());
    for (int i = 0; i < m.size(); ++i) {
        W[i].resize(m.capacity(i) + 1);
        for (int k = 0; k <= m.capacity(i); ++k) {
            const auto ns = m.next_states(i, k);
            const auto ps = m.next_probs(i, k);
            double v = 0.0;
            for (std::size_t j = 0; j < ns.size(); ++j) v += ps[j] * V[ns[j]];
            W[i][k] = v;
        }
    }
    return W;
}

double q_value(const FullInfoModel& m, int t, int i, int a, const std::vector<double>& W) {
    double q = m.reward(t, i, a);
    for (int k = 0; k <= m.capacity(i); ++k) q += m.admit_prob(t, a, i, k) * W[k];
    return q;
}

void check_policy(const FullInfoModel& m, const PartitionedPolicy& p) {
    if (p.horizon() != m.spec().T || p.expert_count() != m.spec().counters() || p.action_count() != m.spec().actions())
        throw DomainError("policy dimensions do not match the instance");
}

} // namespace

BellmanResult bellman_optimal(const FullInfoModel& m) {
    const int T = m.spec().T, A = m.spec().actions();
    BellmanResult out;
    out.V.assign(T + 1, {});
    out.policy.assign(T, std::vector<int>(m.size(), 0));
    out.V[T] = terminal_values(m);
    for (int t = T - 1; t >= 0; --t) {
        const auto W = continuation(m, out.V[t + 1]);
        out.V[t].assign(m.size(), 0.0);
        for (int i = 0; i < m.size(); ++i) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                const double q = q_value(m, t, i, a, W[i]);
                if (q > best) {
                    best = q;
                    out.policy[t][i] = a;
                }
            }
            out.V[t][i] = best;
        }
    }
    out.value = out.V[0][m.empty_state()];
    return out;
}

PolicyValue bellman_evaluate(const FullInfoModel& m, const PartitionedPolicy& policy) {
    check_policy(m, policy);
    const int T = m.spec().T, A = m.spec().actions();
    PolicyValue out;
    out.V.assign(T + 1, {});
    out.V[T] = terminal_values(m);
    for (int t = T - 1; t >= 0; --t) {
        const auto W = continuation(m, out.V[t + 1]);
        out.V[t].assign(m.size(), 0.0);
        for (int i = 0; i < m.size(); ++i) {
            const int z = m.state(i).z;
            double v = 0.0;
            for (int a = 0; a < A; ++a) {
                const double th = policy.prob(t, z, a);
                if (th > 0.0) v += th * q_value(m, t, i, a, W[i]);
            }
            out.V[t][i] = v;
        }
    }
    out.value = out.V[0][m.empty_state()];
    return out;
}

PolicyValue bellman_evaluate(const FullInfoModel& m, const CountPolicy& policy) {
    return bellman_evaluate(m, policy.to_policy(qplex::counter_assignment(m.spec()), m.spec().actions()));
}

namespace {

template <class ActionWeights>
ValueTable forward_impl(const FullInfoModel& m, ActionWeights&& weights) {
    const int T = m.spec().T, A = m.spec().actions();
    ValueTable mu(T + 1, std::vector<double>(m.size(), 0.0));
    mu[0][m.empty_state()] = 1.0;
    std::vector<double> th(A);
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < m.size(); ++i) {
            const double w = mu[t][i];
            if (!(w > 0.0)) continue;
            weights(t, i, th);
            for (int k = 0; k <= m.capacity(i); ++k) {
                double pk = 0.0;
                for (int a = 0; a < A; ++a)
                    if (th[a] > 0.0) pk += th[a] * m.admit_prob(t, a, i, k);
                if (!(pk > 0.0)) continue;
                const auto ns = m.next_states(i, k);
                const auto ps = m.next_probs(i, k);
                for (std::size_t j = 0; j < ns.size(); ++j) mu[t + 1][ns[j]] += w * pk * ps[j];
            }
        }
    return mu;
}

} // namespace

ValueTable forward_distribution(const FullInfoModel& m, const std::vector<std::vector<int>>& actions) {
    return forward_impl(m, [&](int t, int i, std::vector<double>& th) {
        std::fill(th.begin(), th.end(), 0.0);
        th[actions[t][i]] = 1.0;
    });
}

ValueTable forward_distribution(const FullInfoModel& m, const PartitionedPolicy& policy) {
    check_policy(m, policy);
    return forward_impl(m, [&](int t, int i, std::vector<double>& th) {
        for (int a = 0; a < int(th.size()); ++a) th[a] = policy.prob(t, m.state(i).z, a);
    });
}

// Optimal full-information Q averaged over h given z under the optimal occupation measure.
CountPolicy extract_count_policy(const FullInfoModel& m, const BellmanResult& optimal) {
    const int T = m.spec().T, A = m.spec().actions(), Z = m.spec().counters();
    const ValueTable mu = forward_distribution(m, optimal.policy);
    CountPolicy out(T, Z, 0);
    std::vector<double> agg(std::size_t(Z) * A);
    for (int t = T - 1; t >= 0; --t) {
        std::fill(agg.begin(), agg.end(), 0.0);
        const auto W = continuation(m, optimal.V[t + 1]);
        for (int i = 0; i < m.size(); ++i) {
            const double w = mu[t][i];
            if (!(w > 0.0)) continue;
            const int z = m.state(i).z;
            for (int a = 0; a < A; ++a) agg[std::size_t(z) * A + a] += w * q_value(m, t, i, a, W[i]);
        }
        for (int z = 0; z < Z; ++z) {
            int best = 0;
            for (int a = 1; a < A; ++a)
                if (agg[std::size_t(z) * A + a] > agg[std::size_t(z) * A + best]) best = a;
            out.at(t, z) = best;
        }
    }
    return out;
}

opt::QBarTable extract_q(const FullInfoModel& m, const PartitionedPolicy& policy) {
    check_policy(m, policy);
    const int T = m.spec().T, A = m.spec().actions(), Z = m.spec().counters();
    const ValueTable mu = forward_distribution(m, policy);
    opt::QBarTable out(T, Z, A);
    std::vector<double> V = terminal_values(m), Vn(m.size());
    for (int t = T - 1; t >= 0; --t) {
        const auto W = continuation(m, V);
        for (int i = 0; i < m.size(); ++i) {
            const int z = m.state(i).z;
            double v = 0.0;
            for (int a = 0; a < A; ++a) {
                const double q = q_value(m, t, i, a, W[i]);
                v += policy.prob(t, z, a) * q;
                if (mu[t][i] > 0.0) out.at(t, z, a) += mu[t][i] * q;
            }
            if (mu[t][i] > 0.0) out.reach_at(t, z) += mu[t][i];
            Vn[i] = v;
        }
        for (int z = 0; z < Z; ++z)
            if (out.reach_at(t, z) > 0.0)
                for (int a = 0; a < A; ++a) out.at(t, z, a) /= out.reach_at(t, z);
        std::swap(V, Vn);
    }
    return out;
}

QComparison compare_centered(const opt::QBarTable& x, const opt::QBarTable& y) {
    if (x.horizon() != y.horizon() || x.experts() != y.experts() || x.actions() != y.actions())
        throw DomainError("Q tables have different shapes");
    const auto cx = opt::approx_natural_gradient(x), cy = opt::approx_natural_gradient(y);
    QComparison out;
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (int t = 0; t < x.horizon(); ++t)
        for (int z = 0; z < x.experts(); ++z) {
            if (!(x.reach_at(t, z) > 0.0) || !(y.reach_at(t, z) > 0.0)) continue;
            ++out.support;
            for (int a = 0; a < x.actions(); ++a) {
                dot += cx.at(t, z, a) * cy.at(t, z, a);
                nx += cx.at(t, z, a) * cx.at(t, z, a);
                ny += cy.at(t, z, a) * cy.at(t, z, a);
            }
        }
    out.cosine = (nx > 0.0 && ny > 0.0) ? dot / std::sqrt(nx * ny) : (nx == ny ? 1.0 : 0.0);
    out.norm_ratio = nx > 0.0 ? std::sqrt(ny / nx) : (ny == 0.0 ? 1.0 : std::numeric_limits<double>::infinity());
    return out;
}

QComparison q_extract_diagnostic(const FullInfoModel& m, const PartitionedPolicy& policy, const opt::QBarTable& qdp) {
    return compare_centered(extract_q(m, policy), qdp);
}

} // namespace qdp::baselines
