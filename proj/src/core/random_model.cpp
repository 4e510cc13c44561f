#include "qdp/core/random_model.hpp"

#include <cmath>
#include <random>

namespace qdp::core {

RandomSmoothModel::RandomSmoothModel(const Options& opt, std::uint64_t seed)
    : T_(opt.horizon), S_(opt.states), A_(opt.actions), kappa_(opt.mu_dependent ? opt.curvature : 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double cpl = opt.mu_dependent ? opt.coupling : 0.0;
    const double rs = opt.zero_rewards ? 0.0 : 1.0;
    const std::size_t n3 = std::size_t(T_) * S_ * A_;
    W_.resize(n3 * S_);
    U_.resize(n3 * S_ * S_);
    R_.resize(n3);
    V_.resize(n3 * S_);
    B_.resize(std::size_t(T_ + 1) * S_);
    RT_.resize(S_);
    VT_.resize(std::size_t(S_) * S_);
    for (auto& v : W_) v = u(rng);
    for (auto& v : U_) v = cpl * u(rng);
    for (auto& v : R_) v = rs * u(rng);
    for (auto& v : V_) v = rs * cpl * u(rng);
    for (auto& v : B_) v = rs * u(rng);
    for (auto& v : RT_) v = rs * u(rng);
    for (auto& v : VT_) v = rs * cpl * u(rng);
}

Vector RandomSmoothModel::logits(int t, const Pmf& mu, int s, int a) const {
    Vector x(S_);
    for (int s2 = 0; s2 < S_; ++s2) {
        double v = W_[k4(t, s, a, s2)];
        const double* U = &U_[k4(t, s, a, s2) * S_];
        for (int k = 0; k < S_; ++k) v += U[k] * mu[k];
        x[s2] = v;
    }
    return x;
}

Pmf RandomSmoothModel::kernel(int t, const Pmf& mu, int s, int a) const {
    Vector x = logits(t, mu, s, a);
    x.array() -= x.maxCoeff();
    x = x.array().exp();
    x /= x.sum();
    return Pmf(std::vector<double>(x.data(), x.data() + S_));
}

SparsePartials RandomSmoothModel::kernel_mu_partials(int t, const Pmf& mu, int s, int a) const {
    const Pmf p = kernel(t, mu, s, a);
    SparsePartials out;
    out.columns.resize(S_);
    out.values = Matrix::Zero(S_, S_);
    for (int k = 0; k < S_; ++k) {
        out.columns[k] = k;
        double mean = 0.0;
        for (int j = 0; j < S_; ++j) mean += p[j] * U_[k4(t, s, a, j) * S_ + k];
        for (int s2 = 0; s2 < S_; ++s2)
            out.values(s2, k) = corrupt_ * p[s2] * (U_[k4(t, s, a, s2) * S_ + k] - mean);
    }
    return out;
}

double RandomSmoothModel::reward_constant(int t, const Pmf& mu) const {
    double bm = 0.0;
    for (int k = 0; k < S_; ++k) bm += B_[std::size_t(t) * S_ + k] * mu[k];
    return kappa_ * bm * bm;
}

double RandomSmoothModel::terminal_constant(const Pmf& mu) const { return reward_constant(T_, mu); }

double RandomSmoothModel::reward(int t, const Pmf& mu, int s, int a) const {
    const std::size_t i = (std::size_t(t) * S_ + s) * A_ + a;
    double v = R_[i];
    for (int k = 0; k < S_; ++k) v += V_[i * S_ + k] * mu[k];
    return v + reward_constant(t, mu);
}

Vector RandomSmoothModel::reward_mu_partials(int t, const Pmf& mu, int s, int a) const {
    const std::size_t i = (std::size_t(t) * S_ + s) * A_ + a;
    double bm = 0.0;
    for (int k = 0; k < S_; ++k) bm += B_[std::size_t(t) * S_ + k] * mu[k];
    Vector g(S_);
    for (int k = 0; k < S_; ++k) g[k] = V_[i * S_ + k] + 2.0 * kappa_ * bm * B_[std::size_t(t) * S_ + k];
    return g;
}

double RandomSmoothModel::terminal_reward(const Pmf& mu, int s) const {
    double v = RT_[s];
    for (int k = 0; k < S_; ++k) v += VT_[std::size_t(s) * S_ + k] * mu[k];
    return v + terminal_constant(mu);
}

Vector RandomSmoothModel::terminal_mu_partials(const Pmf& mu, int s) const {
    double bm = 0.0;
    for (int k = 0; k < S_; ++k) bm += B_[std::size_t(T_) * S_ + k] * mu[k];
    Vector g(S_);
    for (int k = 0; k < S_; ++k) g[k] = VT_[std::size_t(s) * S_ + k] + 2.0 * kappa_ * bm * B_[std::size_t(T_) * S_ + k];
    return g;
}

} // namespace qdp::core
