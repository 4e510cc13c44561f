#include "qdp/core/engine.hpp"

#include "qdp/errors.hpp"

#include <cmath>
#include <string>

namespace qdp::core {

namespace {

void check_dims(const NonlinearModel& model, const PartitionedPolicy& policy) {
    if (policy.horizon() != model.horizon())
        throw DomainError("policy horizon " + std::to_string(policy.horizon()) + " does not match model horizon " +
                          std::to_string(model.horizon()));
    if (policy.state_count() != model.state_count() || policy.action_count() != model.action_count())
        throw DomainError("policy dimensions do not match model");
}

Pmf step(const NonlinearModel& model, const PartitionedPolicy& policy, int t, const Pmf& mu) {
    const int S = model.state_count();
    const int A = model.action_count();
    std::vector<double> next(S, 0.0);
    for (int s = 0; s < S; ++s) {
        if (!(mu[s] > 0.0)) continue;
        for (int a = 0; a < A; ++a) {
            const double w = mu[s] * policy.action_prob(t, s, a);
            if (w == 0.0) continue;
            const Pmf p = model.kernel(t, mu, s, a);
            if (int(p.size()) != S) throw ModelContractError("kernel row has wrong length");
            for (int s2 = 0; s2 < S; ++s2) next[s2] += w * p[s2];
        }
    }
    return Pmf(std::move(next));
}

double running_reward(const NonlinearModel& model, const PartitionedPolicy& policy, int t, const Pmf& mu) {
    double sum = 0.0;
    for (int s = 0; s < model.state_count(); ++s) {
        if (!(mu[s] > 0.0)) continue;
        for (int a = 0; a < model.action_count(); ++a) {
            const double pi = policy.action_prob(t, s, a);
            if (pi == 0.0) continue;
            sum += mu[s] * pi * model.reward(t, mu, s, a);
        }
    }
    return sum;
}

double terminal_value(const NonlinearModel& model, const Pmf& mu) {
    double sum = 0.0;
    for (int s = 0; s < model.state_count(); ++s)
        if (mu[s] > 0.0) sum += mu[s] * model.terminal_reward(mu, s);
    return sum;
}

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw NumericalError(std::string("non-finite entries in ") + what);
}

} // namespace

MarginalsTrace forward_marginals(const NonlinearModel& model, const PartitionedPolicy& policy, const Pmf& mu0) {
    check_dims(model, policy);
    if (int(mu0.size()) != model.state_count()) throw DomainError("initial distribution has wrong length");
    MarginalsTrace tr;
    tr.mu.reserve(model.horizon() + 1);
    tr.mu.push_back(mu0);
    for (int t = 0; t < model.horizon(); ++t) tr.mu.push_back(step(model, policy, t, tr.mu.back()));
    return tr;
}

RewardDecomposition expected_total_reward(const NonlinearModel& model, const PartitionedPolicy& policy,
                                          const MarginalsTrace& trace) {
    check_dims(model, policy);
    const int T = model.horizon();
    RewardDecomposition out;
    out.per_period.resize(T);
    for (int t = 0; t < T; ++t) {
        const double r = running_reward(model, policy, t, trace.mu[t]);
        const double c = model.reward_constant(t, trace.mu[t]);
        out.per_period[t] = r;
        out.running += r - c;
        out.penalty += c;
    }
    const double c = model.terminal_constant(trace.mu[T]);
    out.terminal = terminal_value(model, trace.mu[T]) - c;
    out.penalty += c;
    out.total = out.running + out.terminal + out.penalty;
    return out;
}

Matrix q_function(const NonlinearModel& model, const Pmf& mu, const Vector& sigma_next, int t) {
    const int S = model.state_count();
    const int A = model.action_count();
    if (sigma_next.size() != S) throw DomainError("sigma_next has wrong length");
    Matrix Q(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const Pmf p = model.kernel(t, mu, s, a);
            double v = model.reward(t, mu, s, a);
            for (int s2 = 0; s2 < S; ++s2) v += p[s2] * sigma_next[s2];
            Q(s, a) = v;
        }
    return Q;
}

SigmaTrace backward_sigma(const NonlinearModel& model, const PartitionedPolicy& policy, const MarginalsTrace& trace) {
    check_dims(model, policy);
    const int T = model.horizon();
    const int S = model.state_count();
    const int A = model.action_count();
    SigmaTrace out;
    out.sigma.assign(T + 1, Vector::Zero(S));

    {
        const Pmf& mu = trace.mu[T];
        Vector& sig = out.sigma[T];
        for (int s = 0; s < S; ++s) sig[s] = model.terminal_reward(mu, s);
        for (int st = 0; st < S; ++st)
            if (mu[st] > 0.0) sig += mu[st] * model.terminal_mu_partials(mu, st);
    }

    for (int t = T - 1; t >= 0; --t) {
        const Pmf& mu = trace.mu[t];
        const Vector& next = out.sigma[t + 1];
        const Matrix Q = q_function(model, mu, next, t);
        Vector& sig = out.sigma[t];
        for (int s = 0; s < S; ++s) {
            double v = 0.0;
            for (int a = 0; a < A; ++a) v += policy.action_prob(t, s, a) * Q(s, a);
            sig[s] = v;
        }
        for (int st = 0; st < S; ++st) {
            if (!(mu[st] > 0.0)) continue;
            for (int a = 0; a < A; ++a) {
                const double w = mu[st] * policy.action_prob(t, st, a);
                if (w == 0.0) continue;
                sig += w * model.reward_mu_partials(t, mu, st, a);
                const SparsePartials dp = model.kernel_mu_partials(t, mu, st, a);
                const Vector contrib = dp.values.transpose() * next;
                for (std::size_t j = 0; j < dp.columns.size(); ++j) sig[dp.columns[j]] += w * contrib[Eigen::Index(j)];
            }
        }
        if (!sig.allFinite()) throw NumericalError("non-finite sigma at t=" + std::to_string(t));
    }
    return out;
}

ExpertActionTable policy_gradient(const NonlinearModel& model, const PartitionedPolicy& policy,
                                  const MarginalsTrace& trace, const SigmaTrace& sigmas) {
    check_dims(model, policy);
    const int T = model.horizon();
    const int A = model.action_count();
    ExpertActionTable g(T, policy.expert_count(), A);
    for (int t = 0; t < T; ++t) {
        const Pmf& mu = trace.mu[t];
        const Matrix Q = q_function(model, mu, sigmas.sigma[t + 1], t);
        for (int s = 0; s < model.state_count(); ++s) {
            if (!(mu[s] > 0.0)) continue;
            for (int a = 0; a < A; ++a) g.at(t, policy.expert_of(s), a) += mu[s] * Q(s, a);
        }
    }
    return g;
}

double tail_objective(const NonlinearModel& model, const PartitionedPolicy& policy, int t0, const Pmf& mu0) {
    check_dims(model, policy);
    Pmf mu = mu0;
    double total = 0.0;
    for (int t = t0; t < model.horizon(); ++t) {
        total += running_reward(model, policy, t, mu);
        mu = step(model, policy, t, mu);
    }
    return total + terminal_value(model, mu);
}

Matrix FisherBlocks::assemble() const {
    Matrix F = Matrix::Zero(Eigen::Index(horizon) * dim, Eigen::Index(horizon) * dim);
    for (const auto& [key, blk] : blocks) F.block(key.first * dim, key.second * dim, dim, dim) = blk;
    return F;
}

FisherBlocks fisher_blocks(const NonlinearModel& model, const PartitionedPolicy& policy, const MarginalsTrace& trace) {
    check_dims(model, policy);
    const int T = model.horizon();
    const int S = model.state_count();
    const int A = model.action_count();
    const int Z = policy.expert_count();
    const int D = Z * A;

    FisherBlocks fb;
    fb.horizon = T;
    fb.dim = D;
    std::vector<Matrix> Jg(T), Jm(T);
    fb.K.assign(T, Matrix::Zero(D, D));
    fb.M.assign(T, Matrix::Zero(S, S));

    for (int t = 0; t < T; ++t) {
        const Pmf& mu = trace.mu[t];
        Matrix& K = fb.K[t];
        Matrix& M = fb.M[t];
        Matrix& jg = Jg[t];
        Matrix& jm = Jm[t];
        jg = Matrix::Zero(D, S);
        jm = Matrix::Zero(S, S);
        for (int s = 0; s < S; ++s) {
            const int z = policy.expert_of(s);
            const auto pi = policy.row(t, z);
            Matrix P(A, S);
            for (int a = 0; a < A; ++a) {
                const Pmf p = model.kernel(t, mu, s, a);
                for (int s2 = 0; s2 < S; ++s2) P(a, s2) = p[s2];
            }
            Vector avg = Vector::Zero(S);
            for (int a = 0; a < A; ++a) avg += pi[a] * P.row(a).transpose();
            jm.row(s) += avg.transpose();
            if (!(mu[s] > 0.0)) continue;

            for (int a = 0; a < A; ++a) {
                // ∂π̂(ã)/∂γ_a = π̂(ã)(1(ã=a) − π̂(a)), summed against the kernel rows
                jg.row(z * A + a) += mu[s] * pi[a] * (P.row(a) - avg.transpose());
                // softmax score e_a − π̂ on block z
                Vector y = Vector::Zero(D);
                for (int b = 0; b < A; ++b) y[z * A + b] = (a == b ? 1.0 : 0.0) - pi[b];
                K += mu[s] * pi[a] * y * y.transpose();
            }

            for (int a = 0; a < A; ++a) {
                const double w = mu[s] * pi[a];
                if (w == 0.0) continue;
                const SparsePartials dp = model.kernel_mu_partials(t, mu, s, a);
                for (std::size_t j = 0; j < dp.columns.size(); ++j)
                    jm.row(dp.columns[j]) += w * dp.values.col(Eigen::Index(j)).transpose();
                for (int s2 = 0; s2 < S; ++s2) {
                    const double p = P(a, s2);
                    if (!(p > 0.0)) continue;
                    Vector g = Vector::Zero(S);
                    for (std::size_t j = 0; j < dp.columns.size(); ++j)
                        g[dp.columns[j]] = dp.values(s2, Eigen::Index(j)) / p;
                    M += w * p * g * g.transpose();
                }
            }
        }
        require_finite(jg, "policy Jacobian");
        require_finite(jm, "marginal Jacobian");
        require_finite(M, "kernel score matrix");
    }

    fb.G.assign(T + 1, Matrix::Zero(S, S));
    for (int t = T - 1; t >= 1; --t) fb.G[t] = fb.M[t] + Jm[t] * fb.G[t + 1] * Jm[t].transpose();
    if (T >= 1) fb.G[0] = fb.M[0] + Jm[0] * fb.G[1] * Jm[0].transpose();

    for (int t2 = 0; t2 < T; ++t2) {
        const Matrix right = fb.G[t2 + 1] * Jg[t2].transpose(); // |S| x D
        fb.blocks[{t2, t2}] = fb.K[t2] + Jg[t2] * right;
        // ∇_{γ(t1)} μ^(t2+1) = Jg(t1)·Jm(t1+1)···Jm(t2), built right to left
        Matrix chain = Jm.empty() ? Matrix() : Matrix::Identity(S, S);
        for (int t1 = t2 - 1; t1 >= 0; --t1) {
            chain = Jm[t1 + 1] * chain;
            const Matrix blk = Jg[t1] * chain * right;
            fb.blocks[{t1, t2}] = blk;
            fb.blocks[{t2, t1}] = blk.transpose();
        }
    }
    for (const auto& [k, blk] : fb.blocks) require_finite(blk, "Fisher block");
    return fb;
}

} // namespace qdp::core
