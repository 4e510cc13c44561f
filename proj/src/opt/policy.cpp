#include "qdp/policy.hpp"

#include "qdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace qdp {

PartitionedPolicy::PartitionedPolicy(int horizon, std::vector<int> assignment, int expert_count, int action_count)
    : horizon_(horizon), experts_(expert_count), actions_(action_count), assignment_(std::move(assignment)) {
    if (horizon < 0 || expert_count <= 0 || action_count <= 0)
        throw DomainError("policy dimensions must be positive");
    for (int z : assignment_)
        if (z < 0 || z >= experts_) throw DomainError("state assigned to unknown expert " + std::to_string(z));
    const std::size_t n = std::size_t(horizon_) * experts_ * actions_;
    theta_.assign(n, 1.0 / actions_);
    logp_.assign(n, -std::log(double(actions_)));
}

PartitionedPolicy PartitionedPolicy::tabular(int horizon, int state_count, int action_count) {
    std::vector<int> assign(state_count);
    for (int s = 0; s < state_count; ++s) assign[s] = s;
    return PartitionedPolicy(horizon, std::move(assign), state_count, action_count);
}

void PartitionedPolicy::set_row(int t, int z, const Pmf& p) {
    if (int(p.size()) != actions_) throw DomainError("row length does not match action count");
    const std::size_t o = offset(t, z);
    for (int a = 0; a < actions_; ++a) {
        theta_[o + a] = p[a];
        logp_[o + a] = p[a] > 0.0 ? std::log(p[a]) : -std::numeric_limits<double>::infinity();
    }
}

void PartitionedPolicy::set_log_row(int t, int z, std::span<const double> logits) {
    if (int(logits.size()) != actions_) throw DomainError("row length does not match action count");
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits) {
        if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
            throw NumericalError("policy logit is not finite");
        mx = std::max(mx, v);
    }
    if (mx == -std::numeric_limits<double>::infinity()) throw DomainError("policy row has no support");
    double total = 0.0;
    for (double v : logits) total += std::exp(v - mx);
    const double lse = mx + std::log(total);
    const std::size_t o = offset(t, z);
    for (int a = 0; a < actions_; ++a) {
        logp_[o + a] = logits[a] - lse;
        theta_[o + a] = std::exp(logp_[o + a]);
    }
}

void PartitionedPolicy::restore_row(int t, int z, std::span<const double> p, std::span<const double> logp) {
    if (int(p.size()) != actions_ || int(logp.size()) != actions_)
        throw DomainError("row length does not match action count");
    double total = 0.0;
    for (int a = 0; a < actions_; ++a) {
        if (!(p[a] >= 0.0) || std::isnan(logp[a]) || logp[a] > 0.0) throw DomainError("stored policy row is invalid");
        if (std::abs(std::exp(logp[a]) - p[a]) > 1e-12) throw DomainError("stored probabilities and logs disagree");
        total += p[a];
    }
    if (std::abs(total - 1.0) > Pmf::sum_tolerance) throw DomainError("stored policy row does not sum to one");
    const std::size_t o = offset(t, z);
    std::copy(p.begin(), p.end(), theta_.begin() + o);
    std::copy(logp.begin(), logp.end(), logp_.begin() + o);
}

void PartitionedPolicy::set_point_mass(int t, int z, int a) { set_row(t, z, Pmf::point_mass(actions_, a)); }

bool PartitionedPolicy::is_interior() const {
    return std::all_of(logp_.begin(), logp_.end(), [](double v) { return std::isfinite(v); });
}

bool PartitionedPolicy::is_pure() const {
    for (int t = 0; t < horizon_; ++t)
        for (int z = 0; z < experts_; ++z) {
            auto r = row(t, z);
            if (std::count(r.begin(), r.end(), 1.0) != 1) return false;
        }
    return true;
}

void PartitionedPolicy::set_sharing(std::vector<SharingGroup> groups) {
    std::vector<int> seen(std::size_t(horizon_) * experts_, 0);
    for (const auto& g : groups) {
        if (g.experts.empty() || g.times.empty()) throw DomainError("empty sharing group");
        for (int t : g.times)
            for (int z : g.experts) {
                if (t < 0 || t >= horizon_ || z < 0 || z >= experts_)
                    throw DomainError("sharing group cell out of range");
                ++seen[std::size_t(t) * experts_ + z];
            }
    }
    for (int c : seen)
        if (c != 1) throw ConfigError("sharing groups must partition experts x times");
    for (const auto& g : groups) {
        const std::size_t src = offset(g.times[0], g.experts[0]);
        for (int t : g.times)
            for (int z : g.experts) {
                const std::size_t o = offset(t, z);
                std::copy_n(theta_.begin() + src, actions_, theta_.begin() + o);
                std::copy_n(logp_.begin() + src, actions_, logp_.begin() + o);
            }
    }
    sharing_ = std::move(groups);
}

std::vector<double> PartitionedPolicy::expert_mass(const Pmf& mu) const {
    std::vector<double> m(experts_, 0.0);
    for (std::size_t s = 0; s < assignment_.size(); ++s) m[assignment_[s]] += mu[s];
    return m;
}

} // namespace qdp
