#include "qdp/baselines/qlearn.hpp"

#include "qdp/csv.hpp"
#include "qdp/errors.hpp"
#include "qdp/sim/simulator.hpp"

#include <algorithm>

namespace qdp::baselines {

CountPolicy greedy_policy(const std::vector<double>& q, int T, int Z, int A) {
    CountPolicy p(T, Z);
    for (int t = 0; t < T; ++t)
        for (int z = 0; z < Z; ++z) {
            const double* row = q.data() + (std::size_t(t) * Z + z) * A;
            p.at(t, z) = int(std::max_element(row, row + A) - row);
        }
    return p;
}

QLearnResult qlearn_aggregated(const qplex::PricingSpec& spec, const QLearnOptions& opt) {
    if (opt.rates.empty() || opt.episodes < 1 || opt.eval_every < 1 || opt.eval_reps < 1)
        throw DomainError("Q-learning needs rates, episodes, an evaluation interval and evaluation replications");
    if (spec.penalty.C > 0.0) throw UnsupportedModelError("Q-learning baseline has no distribution-dependent penalty");
    const sim::QueueSimulator simulator(spec);
    const int T = spec.T, Z = spec.counters(), A = spec.actions();
    // evaluation streams live under a different root seed than training streams
    const std::uint64_t eval_seed = sim::mix64(opt.seed ^ 0x5eed0fe7a1ull);
    QLearnResult out;
    bool have_best = false;
    for (std::size_t ri = 0; ri < opt.rates.size(); ++ri) {
        const double alpha = opt.rates[ri];
        std::vector<double> q(std::size_t(T) * Z * A, 0.0);
        auto Q = [&](int t, int z, int a) -> double& { return q[(std::size_t(t) * Z + z) * A + a]; };
        const std::uint64_t train_seed = sim::mix64(opt.seed + ri);
        for (long ep = 1; ep <= opt.episodes; ++ep) {
            sim::SplitMix64 rng(train_seed, std::uint64_t(ep));
            auto s = simulator.initial_state();
            for (int t = 0; t < T; ++t) {
                const int z = s.z;
                int a;
                if (opt.epsilon >= 1.0 || rng.uniform() < opt.epsilon) a = rng.below(A);
                else {
                    a = 0;
                    for (int b = 1; b < A; ++b)
                        if (Q(t, z, b) > Q(t, z, a)) a = b;
                }
                const auto st = simulator.step(s, a, rng);
                double target = st.revenue + st.waiting;
                if (t + 1 < T) {
                    double mx = Q(t + 1, s.z, 0);
                    for (int b = 1; b < A; ++b) mx = std::max(mx, Q(t + 1, s.z, b));
                    target += mx;
                } else {
                    target -= spec.c_T * s.z;
                }
                Q(t, z, a) += alpha * (target - Q(t, z, a));
            }
            if (ep % opt.eval_every == 0 || ep == opt.episodes) {
                const CountPolicy g = greedy_policy(q, T, Z, A);
                const auto r = sim::simulate_policy(simulator, g, opt.eval_reps, eval_seed, opt.threads);
                out.curve.push_back({ep, alpha, r.mean, r.ci_halfwidth});
                if (!have_best || r.mean > out.best_value) {
                    have_best = true;
                    out.best_value = r.mean;
                    out.best_ci = r.ci_halfwidth;
                    out.best_rate = alpha;
                    out.best_episode = ep;
                    out.best_policy = g;
                }
            }
        }
        out.final_q.push_back(std::move(q));
    }
    return out;
}

std::string qlearn_curve_csv(const QLearnResult& r) {
    CsvTable tab;
    tab.header = {"episode", "rate", "value_estimate", "ci_halfwidth"};
    for (const auto& p : r.curve)
        tab.add_row({std::to_string(p.episode), fmt_double(p.rate), fmt_double(p.value_estimate), fmt_double(p.ci_halfwidth)});
    return to_csv(tab);
}

} // namespace qdp::baselines
