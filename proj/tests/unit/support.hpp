#pragma once

#include "qdp/core/engine.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

namespace qdp::test {

using core::Matrix;
using core::Vector;

/// Plain μ-independent MDP given by explicit tables.
struct TabularMarkov : core::NonlinearModel {
    int T, S, A;
    std::vector<Matrix> P; // [t*A + a](s, s')
    std::vector<Matrix> R; // [t](s, a)
    Vector RT;

    TabularMarkov(int T, int S, int A) : T(T), S(S), A(A), P(std::size_t(T) * A, Matrix::Zero(S, S)),
                                         R(T, Matrix::Zero(S, A)), RT(Vector::Zero(S)) {}

    int horizon() const override { return T; }
    int state_count() const override { return S; }
    int action_count() const override { return A; }
    Pmf kernel(int t, const Pmf&, int s, int a) const override {
        return Pmf(row(P[std::size_t(t) * A + a], s));
    }
    double reward(int t, const Pmf&, int s, int a) const override { return R[t](s, a); }
    double terminal_reward(const Pmf&, int s) const override { return RT[s]; }
    core::SparsePartials kernel_mu_partials(int, const Pmf&, int, int) const override {
        core::SparsePartials p;
        p.values = Matrix::Zero(S, 0);
        return p;
    }
    Vector reward_mu_partials(int, const Pmf&, int, int) const override { return Vector::Zero(S); }
    Vector terminal_mu_partials(const Pmf&, int) const override { return Vector::Zero(S); }

    static std::vector<double> row(const Matrix& m, int s) {
        std::vector<double> r(m.cols());
        for (int j = 0; j < m.cols(); ++j) r[j] = m(s, j);
        return r;
    }
};

/// Relabels the states of another model by a permutation: new index perm[s] ↔ old s.
struct PermutedModel : core::NonlinearModel {
    const core::NonlinearModel& base;
    std::vector<int> perm, inv;

    PermutedModel(const core::NonlinearModel& base, std::vector<int> perm) : base(base), perm(std::move(perm)) {
        inv.resize(this->perm.size());
        for (std::size_t s = 0; s < this->perm.size(); ++s) inv[this->perm[s]] = int(s);
    }
    Pmf to_old(const Pmf& mu) const {
        std::vector<double> w(mu.size());
        for (std::size_t s = 0; s < mu.size(); ++s) w[s] = mu[perm[s]];
        return Pmf(w);
    }
    Pmf to_new(const Pmf& mu) const {
        std::vector<double> w(mu.size());
        for (std::size_t s = 0; s < mu.size(); ++s) w[perm[s]] = mu[s];
        return Pmf(w);
    }
    int horizon() const override { return base.horizon(); }
    int state_count() const override { return base.state_count(); }
    int action_count() const override { return base.action_count(); }
    Pmf kernel(int t, const Pmf& mu, int s, int a) const override { return to_new(base.kernel(t, to_old(mu), inv[s], a)); }
    double reward(int t, const Pmf& mu, int s, int a) const override { return base.reward(t, to_old(mu), inv[s], a); }
    double terminal_reward(const Pmf& mu, int s) const override { return base.terminal_reward(to_old(mu), inv[s]); }
};

inline void check_close(double a, double b, double tol) {
    CHECK_MESSAGE(std::abs(a - b) <= tol, a, " vs ", b, " (tol ", tol, ")");
}

} // namespace qdp::test
