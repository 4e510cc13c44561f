#include "qdp/core/oracles.hpp"

#include "qdp/errors.hpp"

#include <cmath>
#include <random>

namespace qdp::core {

std::vector<Trajectory> enumerate_trajectories(const NonlinearModel& model, const PartitionedPolicy& policy,
                                               const Pmf& mu0, double guard) {
    const int T = model.horizon();
    const int S = model.state_count();
    const int A = model.action_count();
    const double count = std::pow(double(S), T + 1) * std::pow(double(A), T);
    if (count > guard) throw ResourceGuardError("trajectory enumeration", count, guard);

    const MarginalsTrace tr = forward_marginals(model, policy, mu0);
    std::vector<Trajectory> out;
    Trajectory cur;
    cur.states.resize(T + 1);
    cur.actions.resize(T);

    auto recurse = [&](auto&& self, int t, double prob) -> void {
        if (prob == 0.0) return;
        if (t == T) {
            cur.prob = prob;
            out.push_back(cur);
            return;
        }
        const int s = cur.states[t];
        for (int a = 0; a < A; ++a) {
            const double pa = policy.action_prob(t, s, a);
            if (pa == 0.0) continue;
            cur.actions[t] = a;
            const Pmf p = model.kernel(t, tr.mu[t], s, a);
            for (int s2 = 0; s2 < S; ++s2) {
                cur.states[t + 1] = s2;
                self(self, t + 1, prob * pa * p[s2]);
            }
        }
    };
    for (int s = 0; s < S; ++s) {
        cur.states[0] = s;
        recurse(recurse, 0, mu0[s]);
    }
    return out;
}

Matrix fisher_by_enumeration(const NonlinearModel& model, const PartitionedPolicy& policy, const Pmf& mu0) {
    const int T = model.horizon();
    const int S = model.state_count();
    const int A = model.action_count();
    const int Z = policy.expert_count();
    const int D = Z * A;
    const MarginalsTrace tr = forward_marginals(model, policy, mu0);

    // kernel values and partial matrices per (t, s, a)
    std::vector<Vector> P(std::size_t(T) * S * A);
    std::vector<Matrix> dP(std::size_t(T) * S * A);
    auto idx = [&](int t, int s, int a) { return (std::size_t(t) * S + s) * A + a; };
    for (int t = 0; t < T; ++t)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const Pmf p = model.kernel(t, tr.mu[t], s, a);
                P[idx(t, s, a)] = Eigen::Map<const Vector>(p.weights().data(), S);
                Matrix full = Matrix::Zero(S, S); // (s', k)
                const SparsePartials sp = model.kernel_mu_partials(t, tr.mu[t], s, a);
                for (std::size_t j = 0; j < sp.columns.size(); ++j) full.col(sp.columns[j]) = sp.values.col(Eigen::Index(j));
                dP[idx(t, s, a)] = full;
            }

    // tangent[t][p] holds dμ^(τ)/dγ_p^(t) for τ = 0..T (zero for τ <= t)
    std::vector<std::vector<std::vector<Vector>>> tangent(T, std::vector<std::vector<Vector>>(D));
    for (int t = 0; t < T; ++t)
        for (int z = 0; z < Z; ++z)
            for (int a = 0; a < A; ++a) {
                auto& tan = tangent[t][z * A + a];
                tan.assign(T + 1, Vector::Zero(S));
                const auto pi = policy.row(t, z);
                for (int s = 0; s < S; ++s) {
                    if (policy.expert_of(s) != z) continue;
                    for (int b = 0; b < A; ++b) {
                        const double dpi = pi[b] * ((a == b ? 1.0 : 0.0) - pi[a]);
                        tan[t + 1] += tr.mu[t][s] * dpi * P[idx(t, s, b)];
                    }
                }
                for (int tau = t + 1; tau < T; ++tau) {
                    const Vector& d = tan[tau];
                    Vector nxt = Vector::Zero(S);
                    for (int s = 0; s < S; ++s)
                        for (int b = 0; b < A; ++b) {
                            const double pb = policy.action_prob(tau, s, b);
                            nxt += d[s] * pb * P[idx(tau, s, b)];
                            nxt += tr.mu[tau][s] * pb * (dP[idx(tau, s, b)] * d);
                        }
                    tan[tau + 1] = nxt;
                }
            }

    const std::vector<Trajectory> trajs = enumerate_trajectories(model, policy, mu0);
    Matrix F = Matrix::Zero(Eigen::Index(T) * D, Eigen::Index(T) * D);
    Vector score(Eigen::Index(T) * D);
    for (const Trajectory& tj : trajs) {
        // kernel scores ∇_μ log p at each transition
        std::vector<Vector> zs(T);
        for (int tau = 0; tau < T; ++tau) {
            const std::size_t i = idx(tau, tj.states[tau], tj.actions[tau]);
            const double p = P[i][tj.states[tau + 1]];
            zs[tau] = dP[i].row(tj.states[tau + 1]).transpose() / p;
        }
        score.setZero();
        for (int t = 0; t < T; ++t) {
            const int z = policy.expert_of(tj.states[t]);
            const auto pi = policy.row(t, z);
            for (int b = 0; b < A; ++b) score[t * D + z * A + b] += (tj.actions[t] == b ? 1.0 : 0.0) - pi[b];
            for (int p = 0; p < D; ++p)
                for (int tau = t + 1; tau < T; ++tau) score[t * D + p] += tangent[t][p][tau].dot(zs[tau]);
        }
        F += tj.prob * score * score.transpose();
    }
    return F;
}

FdReport gradient_fd_check(const NonlinearModel& model, const PartitionedPolicy& policy, const Pmf& mu0, double h,
                           double floor) {
    const MarginalsTrace tr = forward_marginals(model, policy, mu0);
    const SigmaTrace sg = backward_sigma(model, policy, tr);
    const ExpertActionTable g = policy_gradient(model, policy, tr, sg);
    const int A = policy.action_count();
    FdReport rep;
    auto J = [&](const PartitionedPolicy& p) { return expected_total_reward(model, p, forward_marginals(model, p, mu0)).total; };
    for (int t = 0; t < policy.horizon(); ++t)
        for (int z = 0; z < policy.expert_count(); ++z)
            for (int a = 0; a < A; ++a) {
                const int a2 = (a + 1) % A;
                if (a2 == a) continue;
                auto shifted = [&](double eps) {
                    PartitionedPolicy p = policy;
                    std::vector<double> row(policy.row(t, z).begin(), policy.row(t, z).end());
                    row[a] += eps;
                    row[a2] -= eps;
                    p.set_row(t, z, Pmf(row));
                    return p;
                };
                const double fd = (J(shifted(h)) - J(shifted(-h))) / (2 * h);
                const double an = g.at(t, z, a) - g.at(t, z, a2);
                const double rel = std::abs(fd - an) / std::max({std::abs(an), std::abs(fd), floor});
                if (rel > rep.max_rel_error || rep.worst_t < 0)
                    rep = {std::max(rel, rep.max_rel_error), t, z, a, an, fd};
            }
    return rep;
}

FdReport sigma_fd_check(const NonlinearModel& model, const PartitionedPolicy& policy, const Pmf& mu0, double h,
                        double floor) {
    const MarginalsTrace tr = forward_marginals(model, policy, mu0);
    const SigmaTrace sg = backward_sigma(model, policy, tr);
    const int S = model.state_count();
    FdReport rep;
    for (int t = 0; t <= model.horizon(); ++t) {
        const Pmf& mu = tr.mu[t];
        for (int s = 0; s < S; ++s) {
            const int s2 = (s + 1) % S;
            if (s2 == s) continue;
            auto shifted = [&](double eps) {
                std::vector<double> w = mu.weights();
                w[s] += eps;
                w[s2] -= eps;
                return Pmf(w);
            };
            if (mu[s2] <= h || mu[s] <= h) continue;
            const double fd =
                (tail_objective(model, policy, t, shifted(h)) - tail_objective(model, policy, t, shifted(-h))) / (2 * h);
            const double an = sg.sigma[t][s] - sg.sigma[t][s2];
            const double rel = std::abs(fd - an) / std::max({std::abs(an), std::abs(fd), floor});
            if (rel > rep.max_rel_error || rep.worst_t < 0) rep = {std::max(rel, rep.max_rel_error), t, s, s2, an, fd};
        }
    }
    return rep;
}

PartitionedPolicy random_interior_policy(int horizon, std::vector<int> assignment, int experts, int actions,
                                         std::uint64_t seed) {
    PartitionedPolicy p(horizon, std::move(assignment), experts, actions);
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> e(1.0);
    for (int t = 0; t < horizon; ++t)
        for (int z = 0; z < experts; ++z) {
            std::vector<double> w(actions);
            double tot = 0.0;
            for (auto& v : w) tot += (v = 0.05 + e(rng));
            for (auto& v : w) v /= tot;
            p.set_row(t, z, Pmf(w));
        }
    return p;
}

Pmf random_interior_pmf(int size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> e(1.0);
    std::vector<double> w(size);
    double tot = 0.0;
    for (auto& v : w) tot += (v = 0.05 + e(rng));
    for (auto& v : w) v /= tot;
    return Pmf(w);
}

} // namespace qdp::core
