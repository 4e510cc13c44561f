#include "qdp/harness/gradcheck.hpp"

#include "qdp/core/oracles.hpp"
#include "qdp/core/random_model.hpp"
#include "qdp/errors.hpp"

#include <cmath>
#include <random>

namespace qdp::harness {

namespace {

std::string loc(const char* what, long a, int t, int z, int b) {
    return std::string(what) + " " + std::to_string(a) + " t=" + std::to_string(t) + " z=" + std::to_string(z) +
           " a=" + std::to_string(b);
}

void absorb(CheckResult& c, double err, const std::string& where) {
    ++c.cases;
    if (!(err <= c.max_error)) {
        c.max_error = std::isnan(err) ? INFINITY : err;
        c.worst = where;
    }
}

PartitionedPolicy tabular_random(const core::NonlinearModel& m, std::uint64_t seed) {
    std::vector<int> assign(m.state_count());
    for (int s = 0; s < m.state_count(); ++s) assign[s] = s;
    return core::random_interior_policy(m.horizon(), assign, m.state_count(), m.action_count(), seed);
}

} // namespace

std::vector<CheckResult> run_gradcheck(const GradcheckOptions& opt) {
    std::vector<CheckResult> out;
    std::mt19937_64 rng(opt.seed);

    CheckResult grad{"policy_gradient_fd", 0, 0.0, 1e-6, ""};
    CheckResult sig{"sigma_fd", 0, 0.0, 1e-6, ""};
    for (int k = 0; k < opt.trials; ++k) {
        core::RandomSmoothModel::Options o;
        o.horizon = 1 + int(rng() % 5);
        o.states = 1 + int(rng() % 4);
        o.actions = 1 + int(rng() % 3);
        const std::uint64_t s = rng();
        core::RandomSmoothModel m(o, s);
        m.corrupt_partials(opt.corrupt);
        const auto r = core::gradient_fd_check(m, tabular_random(m, s + 1), core::random_interior_pmf(o.states, s + 2));
        absorb(grad, r.max_rel_error, loc("trial", k, r.worst_t, r.worst_z, r.worst_a));

        o.states = 2 + int(rng() % 3);
        core::RandomSmoothModel m2(o, s + 3);
        m2.corrupt_partials(opt.corrupt);
        const auto r2 = core::sigma_fd_check(m2, tabular_random(m2, s + 4), core::random_interior_pmf(o.states, s + 5));
        absorb(sig, r2.max_rel_error, loc("trial", k, r2.worst_t, r2.worst_z, r2.worst_a));
    }
    out.push_back(grad);
    out.push_back(sig);

    CheckResult fis{"fisher_vs_enumeration", 0, 0.0, 1e-10, ""};
    for (int k = 0; k < std::min(opt.trials, 20); ++k) {
        core::RandomSmoothModel::Options o;
        o.horizon = 2;
        o.states = 2;
        o.actions = 2;
        const std::uint64_t s = rng();
        core::RandomSmoothModel m(o, s);
        m.corrupt_partials(opt.corrupt);
        const auto pi = tabular_random(m, s + 1);
        const Pmf mu0 = core::random_interior_pmf(2, s + 2);
        const core::Matrix F = core::fisher_blocks(m, pi, core::forward_marginals(m, pi, mu0)).assemble();
        const core::Matrix E = core::fisher_by_enumeration(m, pi, mu0);
        absorb(fis, (F - E).cwiseAbs().maxCoeff(), "trial " + std::to_string(k));
    }
    out.push_back(fis);

    if (opt.pricing) {
        const qplex::PricingSpec spec = to_spec(*opt.pricing);
        if (spec.states() > opt.max_pricing_states)
            throw ResourceGuardError("gradcheck pricing instance", spec.states(), opt.max_pricing_states);
        const qplex::ArrivalTables arr(spec);
        const qplex::PricingModel model(spec);
        const Pmf mu0 = qplex::initial_distribution(spec);
        CheckResult eq{"pricing_efficient_vs_generic", 0, 0.0, 1e-10, ""};
        for (int k = 0; k < std::max(1, std::min(opt.trials, 3)); ++k) {
            const auto pi = core::random_interior_policy(spec.T, qplex::counter_assignment(spec), spec.counters(),
                                                         spec.actions(), rng());
            const auto pass = qplex::efficient_pass(spec, arr, pi, true);
            const auto tr = core::forward_marginals(model, pi, mu0);
            const auto sg = core::backward_sigma(model, pi, tr);
            const auto qb = opt::qbar(tr, model, sg, pi);
            const double scale = std::max(1.0, std::abs(pass.value.total));
            absorb(eq, std::abs(pass.value.total - core::expected_total_reward(model, pi, tr).total) / scale,
                   "policy " + std::to_string(k) + " value");
            for (int t = 0; t <= spec.T; ++t)
                for (int i = 0; i < spec.states(); ++i) {
                    absorb(eq, std::abs(pass.trace.mu[t][i] - tr.mu[t][i]), loc("mu policy", k, t, i, -1));
                    absorb(eq, std::abs(pass.sigma[t][i] - sg.sigma[t][i]) / scale, loc("sigma policy", k, t, i, -1));
                }
            for (std::size_t j = 0; j < qb.q.values.size(); ++j)
                absorb(eq, std::abs(qb.q.values[j] - pass.qbar.q.values[j]) / scale,
                       "qbar policy " + std::to_string(k) + " entry " + std::to_string(j));
        }
        out.push_back(eq);

        if (double(spec.T) * spec.counters() * spec.actions() * spec.states() <= 2e5) {
            CheckResult pg{"pricing_gradient_fd", 0, 0.0, 1e-6, ""};
            const auto pi = core::random_interior_policy(spec.T, qplex::counter_assignment(spec), spec.counters(),
                                                         spec.actions(), rng());
            const auto r = core::gradient_fd_check(model, pi, mu0);
            absorb(pg, r.max_rel_error, loc("policy", 0, r.worst_t, r.worst_z, r.worst_a));
            out.push_back(pg);
        }
    }
    return out;
}

} // namespace qdp::harness
