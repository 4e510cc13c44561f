#include "qdp/qplex/pricing.hpp"

#include "qdp/errors.hpp"

#include <cmath>

namespace qdp::qplex {

double PricingSpec::mean_service() const {
    double m = 0.0;
    for (std::size_t i = 0; i < service.size(); ++i) m += double(i + 1) * service[i];
    return m;
}

void PricingSpec::validate() const {
    std::vector<std::string> bad;
    if (n < 1) bad.push_back("n");
    if (b < 0) bad.push_back("b");
    if (T < 0) bad.push_back("T");
    if (prices.empty()) bad.push_back("prices");
    if (service.empty()) bad.push_back("service_pmf");
    if (int(lambda.size()) != T) bad.push_back("lambda");
    for (const auto& row : lambda)
        if (int(row.size()) != actions() || std::any_of(row.begin(), row.end(), [](double v) { return !(v >= 0.0) || !std::isfinite(v); })) {
            bad.push_back("lambda");
            break;
        }
    if (!(c_W >= 0.0)) bad.push_back("c_W");
    if (!(c_T >= 0.0)) bad.push_back("c_T");
    if (!(penalty.C >= 0.0)) bad.push_back("penalty.C");
    if (!(penalty.k >= 1.0)) bad.push_back("penalty.k");
    if (!(penalty.alpha > 0.0 && penalty.alpha < 1.0)) bad.push_back("penalty.alpha");
    if (penalty.zhat > n + b) bad.push_back("penalty.zhat");
    if (!size.empty()) {
        if (int(size.size()) != counters()) bad.push_back("size");
        else
            for (int z = 0; z < counters(); ++z)
                if (size[z] < 0 || size[z] > z || size[z] > n || (z > 0 && size[z] == 0)) {
                    bad.push_back("size");
                    break;
                }
    }
    if (!bad.empty()) {
        std::string msg = "invalid pricing spec:";
        for (const auto& k : bad) msg += " " + k;
        throw ConfigError(msg, bad);
    }
}

ArrivalTables::ArrivalTables(const PricingSpec& spec) : actions_(spec.actions()) {
    tables_.reserve(std::size_t(spec.T) * actions_);
    for (int t = 0; t < spec.T; ++t)
        for (int a = 0; a < actions_; ++a) tables_.push_back(arrival_law(spec, t, a));
}

PoissonTable arrival_law(const PricingSpec& spec, int t, int a) {
    // largest cap is n+b+x(z)-z <= 2(n+b)
    return PoissonTable(spec.lambda.at(t).at(a), 2 * spec.max_count() + 1);
}

Pmf label_conditional(const PricingSpec& spec, const Pmf& mu, int z) {
    const int L = spec.labels();
    double m = 0.0;
    for (int l = 1; l <= L; ++l) m += mu[spec.index(z, l)];
    if (!(m > 0.0)) return spec.service;
    std::vector<double> xi(L);
    for (int l = 1; l <= L; ++l) xi[l - 1] = mu[spec.index(z, l)] / m;
    return Pmf(std::move(xi));
}

double continuing_mass(const Pmf& xi) {
    double d = 0.0;
    for (std::size_t l = 1; l < xi.size(); ++l) d += xi[l];
    return d;
}

Pmf departures_pmf(const PricingSpec& spec, const Pmf& xi, int z) { return Pmf(binomial_pmf(spec.x(z), xi[0])); }

namespace {

double routing_prob(const PricingSpec& spec, const PoissonTable& pt, int z, int d, int z2) {
    const int y = z2 + d - z;
    if (y < 0) return 0.0;
    if (z2 < spec.max_count()) return pt.pmf(y);
    return pt.sf(spec.max_count() + d - z);
}

double old_prob(const PricingSpec& spec, int z, int d, int z2) {
    if (z2 == 0) return 0.0;
    const int xs = spec.x(z2);
    return xs == 0 ? 0.0 : double(spec.x(z) - d) / double(xs);
}

} // namespace

Pmf routing_pmf(const PricingSpec& spec, int t, int z, int d, int a) {
    if (d < 0 || d > spec.x(z)) throw DomainError("departures exceed customers in service");
    const PoissonTable pt = arrival_law(spec, t, a);
    std::vector<double> out(spec.counters());
    for (int z2 = 0; z2 <= spec.max_count(); ++z2) out[z2] = routing_prob(spec, pt, z, d, z2);
    return Pmf(std::move(out));
}

Pmf type_pmf(const PricingSpec& spec, int z, int d, int z_next) {
    const double o = old_prob(spec, z, d, z_next);
    return Pmf({1.0 - o, o});
}

Pmf label_pmf(const PricingSpec& spec, const Pmf& xi, LabelType k) {
    if (k == New) return spec.service;
    const double D = continuing_mass(xi);
    if (!(D > 0.0)) throw DomainError("old-customer label undefined when every service completes");
    std::vector<double> out(xi.size(), 0.0);
    for (std::size_t l = 0; l + 1 < xi.size(); ++l) out[l] = xi[l + 1] / D;
    return Pmf(std::move(out));
}

std::vector<double> kernel_hat(const PricingSpec& spec, const PoissonTable& arrivals, const Pmf& xi, int z) {
    const int L = spec.labels();
    const int Zn = spec.counters();
    const int x = spec.x(z);
    const std::vector<double> qd = binomial_pmf(x, xi[0]);
    const double D = continuing_mass(xi);
    std::vector<double> fnew(Zn, 0.0), fold(Zn, 0.0);
    for (int d = 0; d <= x; ++d) {
        if (qd[d] == 0.0) continue;
        for (int z2 = std::max(0, z - d); z2 < Zn; ++z2) {
            const double w = qd[d] * routing_prob(spec, arrivals, z, d, z2);
            const double o = old_prob(spec, z, d, z2);
            fnew[z2] += w * (1.0 - o);
            fold[z2] += w * o;
        }
    }
    std::vector<double> out(std::size_t(Zn) * L, 0.0);
    for (int z2 = 0; z2 < Zn; ++z2) {
        double* row = &out[std::size_t(z2) * L];
        for (int l = 0; l < L; ++l) row[l] = fnew[z2] * spec.service[l];
        if (D > 0.0 && fold[z2] != 0.0)
            for (int l = 0; l + 1 < L; ++l) row[l] += fold[z2] * xi[l + 1] / D;
    }
    return out;
}

Pmf kernel(const PricingSpec& spec, int t, const Pmf& mu, int s, int a) {
    const int z = spec.counter_of(s);
    return Pmf(kernel_hat(spec, arrival_law(spec, t, a), label_conditional(spec, mu, z), z));
}

double buffer_mass(const PricingSpec& spec, const Pmf& mu) {
    const int L = spec.labels();
    double v = 0.0;
    for (int z = spec.zhat() + 1; z <= spec.max_count(); ++z)
        for (int l = 1; l <= L; ++l) v += mu[spec.index(z, l)];
    return v;
}

double penalty_value(const PricingSpec& spec, const Pmf& mu) {
    if (!(spec.penalty.C > 0.0)) return 0.0;
    const double v = buffer_mass(spec, mu) - spec.penalty.alpha;
    return v > 0.0 ? -spec.penalty.C * std::pow(v, spec.penalty.k) : 0.0;
}

double penalty_slope(const PricingSpec& spec, const Pmf& mu) {
    if (!(spec.penalty.C > 0.0)) return 0.0;
    const double v = buffer_mass(spec, mu) - spec.penalty.alpha;
    return v > 0.0 ? -spec.penalty.C * spec.penalty.k * std::pow(v, spec.penalty.k - 1.0) : 0.0;
}

double revenue_hat(const PricingSpec& spec, const PoissonTable& arrivals, double price, const Pmf& xi, int z) {
    const int x = spec.x(z);
    const std::vector<double> qd = binomial_pmf(x, xi[0]);
    double r = 0.0;
    for (int d = 0; d <= x; ++d) r += qd[d] * arrivals.truncated_mean(spec.max_count() + d - z);
    return price * r;
}

RewardParts reward(const PricingSpec& spec, int t, const Pmf& mu, int s, int a) {
    const int z = spec.counter_of(s);
    RewardParts r;
    r.revenue = revenue_hat(spec, arrival_law(spec, t, a), spec.prices[a], label_conditional(spec, mu, z), z);
    r.waiting = -spec.c_W * std::max(0, z - spec.n);
    r.penalty = spec.penalized(t) ? penalty_value(spec, mu) : 0.0;
    return r;
}

double terminal_reward(const PricingSpec& spec, const Pmf& mu, int s) {
    return -spec.c_T * spec.counter_of(s) + penalty_value(spec, mu);
}

Pmf initial_distribution(const PricingSpec& spec) {
    std::vector<double> w(spec.states(), 0.0);
    for (int l = 1; l <= spec.labels(); ++l) w[spec.index(0, l)] = spec.service[l - 1];
    return Pmf(std::move(w));
}

std::vector<int> counter_assignment(const PricingSpec& spec) {
    std::vector<int> a(spec.states());
    for (int s = 0; s < spec.states(); ++s) a[s] = spec.counter_of(s);
    return a;
}

std::vector<double> buffer_probabilities(const PricingSpec& spec, const core::MarginalsTrace& trace) {
    std::vector<double> out;
    for (const Pmf& mu : trace.mu) out.push_back(buffer_mass(spec, mu));
    return out;
}

// ---------------------------------------------------------------------------
// Generic-model view

PricingModel::PricingModel(PricingSpec spec) : spec_(std::move(spec)), arr_(spec_) { spec_.validate(); }

Pmf PricingModel::kernel(int t, const Pmf& mu, int s, int a) const {
    const int z = spec_.counter_of(s);
    return Pmf(kernel_hat(spec_, arr_.at(t, a), label_conditional(spec_, mu, z), z));
}

double PricingModel::reward(int t, const Pmf& mu, int s, int a) const {
    const int z = spec_.counter_of(s);
    double r = revenue_hat(spec_, arr_.at(t, a), spec_.prices[a], label_conditional(spec_, mu, z), z) -
               spec_.c_W * std::max(0, z - spec_.n);
    return r + reward_constant(t, mu);
}

double PricingModel::terminal_reward(const Pmf& mu, int s) const { return qplex::terminal_reward(spec_, mu, s); }

double PricingModel::reward_constant(int t, const Pmf& mu) const {
    return spec_.penalized(t) ? penalty_value(spec_, mu) : 0.0;
}

double PricingModel::terminal_constant(const Pmf& mu) const { return penalty_value(spec_, mu); }

namespace {

// ∂/∂p of Binomial(x, p) probabilities, via x·[Bin(x−1,p)(d−1) − Bin(x−1,p)(d)]
std::vector<double> binomial_dp(int x, double p) {
    std::vector<double> out(x + 1, 0.0);
    if (x == 0) return out;
    const std::vector<double> lower = binomial_pmf(x - 1, p);
    for (int d = 0; d <= x; ++d) {
        const double a = d >= 1 ? lower[d - 1] : 0.0;
        const double b = d <= x - 1 ? lower[d] : 0.0;
        out[d] = x * (a - b);
    }
    return out;
}

} // namespace

Matrix PricingModel::kernel_xi_partials(int t, const Pmf& xi, int z, int a) const {
    const int L = spec_.labels();
    const int Zn = spec_.counters();
    const int x = spec_.x(z);
    const PoissonTable& pt = arr_.at(t, a);
    const std::vector<double> qd = binomial_pmf(x, xi[0]);
    const std::vector<double> dq = binomial_dp(x, xi[0]);
    const double D = continuing_mass(xi);
    Matrix R = Matrix::Zero(L, spec_.states());
    for (int d = 0; d <= x; ++d)
        for (int z2 = std::max(0, z - d); z2 < Zn; ++z2) {
            const double rho = routing_prob(spec_, pt, z, d, z2);
            const double o = old_prob(spec_, z, d, z2);
            for (int l2 = 1; l2 <= L; ++l2) {
                const int s2 = spec_.index(z2, l2);
                const double lab_old = (D > 0.0 && l2 < L) ? xi[l2] / D : 0.0;
                // binomial factor depends on ξ(1) only
                R(0, s2) += dq[d] * rho * ((1.0 - o) * spec_.service[l2 - 1] + o * lab_old);
                if (!(D > 0.0) || l2 == L) continue;
                // label factor ξ(ℓ'+1)/Σ_{ℓ≥2}ξ(ℓ)
                for (int lt = 1; lt <= L; ++lt) {
                    double dl = (lt == l2 + 1 ? 1.0 / D : 0.0);
                    if (lt >= 2) dl -= xi[l2] / (D * D);
                    R(lt - 1, s2) += qd[d] * rho * o * dl;
                }
            }
        }
    return R;
}

core::SparsePartials PricingModel::kernel_mu_partials(int t, const Pmf& mu, int s, int a) const {
    const int z = spec_.counter_of(s);
    const int L = spec_.labels();
    core::SparsePartials out;
    double m = 0.0;
    for (int l = 1; l <= L; ++l) m += mu[spec_.index(z, l)];
    if (!(m > 0.0)) {
        out.values = Matrix::Zero(spec_.states(), 0);
        return out;
    }
    const Pmf xi = label_conditional(spec_, mu, z);
    const Matrix R = kernel_xi_partials(t, xi, z, a);
    // ∂ξ(ℓ̃)/∂μ(z,ℓ) = (1(ℓ̃=ℓ) − ξ(ℓ̃))/μ(z)
    Matrix J(L, L);
    for (int lt = 0; lt < L; ++lt)
        for (int l = 0; l < L; ++l) J(lt, l) = ((lt == l ? 1.0 : 0.0) - xi[lt]) / m;
    out.values = R.transpose() * J;
    for (int l = 1; l <= L; ++l) out.columns.push_back(spec_.index(z, l));
    return out;
}

Vector PricingModel::reward_mu_partials(int t, const Pmf& mu, int s, int a) const {
    const int z = spec_.counter_of(s);
    const int L = spec_.labels();
    Vector g = Vector::Zero(spec_.states());
    if (spec_.penalized(t)) {
        const double slope = penalty_slope(spec_, mu);
        for (int z2 = spec_.zhat() + 1; z2 <= spec_.max_count(); ++z2)
            for (int l = 1; l <= L; ++l) g[spec_.index(z2, l)] += slope;
    }
    double m = 0.0;
    for (int l = 1; l <= L; ++l) m += mu[spec_.index(z, l)];
    if (m > 0.0) {
        const Pmf xi = label_conditional(spec_, mu, z);
        const std::vector<double> dq = binomial_dp(spec_.x(z), xi[0]);
        double raw = 0.0;
        for (int d = 0; d <= spec_.x(z); ++d) raw += dq[d] * arr_.at(t, a).truncated_mean(spec_.max_count() + d - z);
        raw *= spec_.prices[a];
        for (int l = 1; l <= L; ++l) g[spec_.index(z, l)] += ((l == 1 ? 1.0 : 0.0) - xi[0]) * raw / m;
    }
    return g;
}

Vector PricingModel::terminal_mu_partials(const Pmf& mu, int) const {
    Vector g = Vector::Zero(spec_.states());
    const double slope = penalty_slope(spec_, mu);
    for (int z2 = spec_.zhat() + 1; z2 <= spec_.max_count(); ++z2)
        for (int l = 1; l <= spec_.labels(); ++l) g[spec_.index(z2, l)] = slope;
    return g;
}

} // namespace qdp::qplex
