#include "support.hpp"

#include "qdp/core/oracles.hpp"
#include "qdp/errors.hpp"
#include "qdp/qplex/pricing.hpp"

#include <cmath>
#include <random>

using namespace qdp;
using namespace qdp::qplex;
using qdp::test::check_close;

namespace {

PricingSpec small_spec(int n, int b, int T, Pmf g, double C = 0.0, std::uint64_t seed = 1) {
    InstanceParams p;
    p.n = n;
    p.b = b;
    p.T = T;
    p.service = std::move(g);
    p.c_W = 0.1;
    p.c_T = 1.5;
    p.penalty.C = C;
    p.penalty.alpha = 0.05;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.3, 1.5);
    for (int t = 0; t < T; ++t) p.shape.push_back(U(rng));
    return build_spec(p);
}

Pmf random_pmf(int n, std::mt19937_64& rng) {
    std::gamma_distribution<double> G(1.0, 1.0);
    std::vector<double> w(n);
    double tot = 0.0;
    for (double& v : w) tot += (v = G(rng) + 1e-3);
    for (double& v : w) v /= tot;
    return Pmf(std::move(w));
}

PartitionedPolicy random_counter_policy(const PricingSpec& spec, std::uint64_t seed) {
    return core::random_interior_policy(spec.T, counter_assignment(spec), spec.counters(), spec.actions(), seed);
}

} // namespace

TEST_SUITE("qplex components") {
    TEST_CASE("departures") {
        PricingSpec s = small_spec(3, 2, 1, Pmf({0.5, 0.5}));
        CHECK(departures_pmf(s, Pmf({0.5, 0.5}), 0) == Pmf({1.0}));
        const Pmf d = departures_pmf(s, Pmf({0.5, 0.5}), 2);
        check_close(d[0], 0.25, 1e-15);
        check_close(d[1], 0.5, 1e-15);
        check_close(d[2], 0.25, 1e-15);
        const Pmf all = departures_pmf(s, Pmf({1.0, 0.0}), 3);
        CHECK(all[3] == 1.0);
    }

    TEST_CASE("routing") {
        PricingSpec s = small_spec(1, 1, 1, Pmf({1.0}));
        s.lambda = {{1.0, 0.0}};
        s.prices = {0.1, 1.1};
        const Pmf r = routing_pmf(s, 0, 0, 0, 0);
        check_close(r[0], std::exp(-1.0), 1e-15);
        check_close(r[1], std::exp(-1.0), 1e-15);
        check_close(r[2], 1.0 - 2.0 * std::exp(-1.0), 1e-15);
        const Pmf rej = routing_pmf(s, 0, 2, 1, 1);
        CHECK(rej[1] == 1.0);

        PricingSpec big = small_spec(3, 3, 4, named_service_pmf("Uni"));
        std::mt19937_64 rng(5);
        for (int i = 0; i < 200; ++i) {
            const int z = int(rng() % 7), t = int(rng() % 4), a = int(rng() % 11);
            const int d = int(rng() % (big.x(z) + 1));
            double tot = 0.0;
            for (double v : routing_pmf(big, t, z, d, a)) tot += v;
            check_close(tot, 1.0, 1e-12);
        }
    }

    TEST_CASE("type") {
        PricingSpec s = small_spec(3, 3, 1, Pmf({1.0}));
        CHECK(type_pmf(s, 2, 0, 0)[New] == 1.0);
        CHECK(type_pmf(s, 3, 3, 2)[New] == 1.0);
        const Pmf k = type_pmf(s, 3, 1, 4);
        check_close(k[Old], 2.0 / 3.0, 1e-15);
        check_close(k[New], 1.0 / 3.0, 1e-15);
    }

    TEST_CASE("label worked example") {
        PricingSpec s = small_spec(1, 0, 1, Pmf({0.25, 0.25, 0.25, 0.25}));
        const Pmf old = label_pmf(s, Pmf({0.1, 0.2, 0.3, 0.4}), Old);
        CHECK(std::abs(old[0] - 2.0 / 9.0) <= 1e-15);
        CHECK(std::abs(old[1] - 1.0 / 3.0) <= 1e-15);
        CHECK(std::abs(old[2] - 4.0 / 9.0) <= 1e-15);
        CHECK(old[3] == 0.0);
        CHECK(label_pmf(s, Pmf({0.1, 0.2, 0.3, 0.4}), New) == s.service);
        PricingSpec s5 = small_spec(1, 0, 1, Pmf::uniform(5));
        CHECK(label_pmf(s5, Pmf::point_mass(5, 4), Old) == Pmf::point_mass(5, 3));
        CHECK_THROWS_AS(label_pmf(s, Pmf({1.0, 0.0, 0.0, 0.0}), Old), DomainError);
    }

    TEST_CASE("arrival table") {
        const auto lam = build_arrival_table(std::vector<double>(4, 1.0), 5.0, 3, 10.5, default_prices());
        check_close(lam[0][0], 10.0 / 7.0, 1e-14);
        for (const auto& row : lam) {
            CHECK(row.back() == 0.0);
            CHECK(row[3] == lam[0][3]);
        }
        CHECK_THROWS_AS(normalize_shape({1.0, -0.5}), ConfigError);
        for (const char* name : {"DEC", "INC", "ALT", "CON"}) {
            const auto sh = named_shape(name, 50);
            double tot = 0.0;
            for (double v : sh) tot += v;
            check_close(tot / 50.0, 1.0, 1e-12);
        }
    }

    TEST_CASE("named service pmfs") {
        InstanceParams p;
        p.T = 1;
        p.service = named_service_pmf("Uni");
        check_close(build_spec(p).mean_service(), 10.5, 1e-12);
        p.service = named_service_pmf("UniH");
        check_close(build_spec(p).mean_service(), 18.0, 1e-12);
        CHECK_THROWS_AS(named_service_pmf("nope"), ConfigError);
    }
}

TEST_SUITE("qplex kernel and rewards") {
    TEST_CASE("kernel rows are pmfs, label-free, and match a nested-sum evaluation") {
        PricingSpec s = small_spec(3, 2, 3, named_service_pmf("BB"));
        std::mt19937_64 rng(7);
        for (int i = 0; i < 100; ++i) {
            const Pmf mu = random_pmf(s.states(), rng);
            const int z = int(rng() % s.counters()), a = int(rng() % s.actions()), t = int(rng() % s.T);
            const Pmf p = kernel(s, t, mu, s.index(z, 1), a);
            double tot = 0.0;
            for (double v : p) tot += v;
            check_close(tot, 1.0, 1e-12);
            CHECK(p == kernel(s, t, mu, s.index(z, 7), a));

            // four nested sums over d, z', k', ℓ'
            const Pmf xi = label_conditional(s, mu, z);
            const Pmf dep = departures_pmf(s, xi, z);
            for (int z2 = 0; z2 < s.counters(); ++z2)
                for (int l2 = 1; l2 <= s.labels(); ++l2) {
                    double v = 0.0;
                    for (int d = 0; d <= s.x(z); ++d) {
                        const double r = routing_pmf(s, t, z, d, a)[z2];
                        if (r == 0.0) continue;
                        const Pmf k = type_pmf(s, z, d, z2);
                        v += dep[d] * r * k[New] * s.service[l2 - 1];
                        if (k[Old] > 0.0 && xi[0] < 1.0) v += dep[d] * r * k[Old] * label_pmf(s, xi, Old)[l2 - 1];
                    }
                    CHECK(std::abs(v - p[s.index(z2, l2)]) <= 1e-14);
                }
        }
    }

    TEST_CASE("revenue, waiting and penalty") {
        PricingSpec s = small_spec(1, 1, 2, Pmf({1.0}));
        s.lambda = {{1.0, 0.0}, {1.0, 0.0}};
        s.prices = {0.5, 1.1};
        const Pmf mu = Pmf::point_mass(s.states(), s.index(1, 1));
        // z=1, ξ(1)=1: one departure, cap n+b+d−z = 2
        const PoissonTable pt(1.0, 10);
        check_close(reward(s, 0, mu, s.index(1, 1), 0).revenue, 0.5 * pt.truncated_mean(2), 1e-15);
        check_close(PoissonTable(1.0, 5).truncated_mean(1), 1.0 - std::exp(-1.0), 1e-15);
        CHECK(reward(s, 0, mu, s.index(1, 1), 1).revenue == 0.0);
        check_close(reward(s, 0, mu, s.index(2, 1), 1).waiting, -s.c_W, 1e-15);
        CHECK(reward(s, 1, mu, s.index(2, 1), 1).penalty == 0.0);

        PricingSpec t = small_spec(3, 3, 1, Pmf({1.0}));
        t.c_T = 1.5;
        CHECK(terminal_reward(t, Pmf::point_mass(t.states(), 0), t.index(0, 1)) == 0.0);
        check_close(terminal_reward(t, Pmf::point_mass(t.states(), 0), t.index(4, 1)), -6.0, 1e-15);
        t.penalty.C = 100.0;
        t.penalty.k = 1.0;
        t.penalty.alpha = 0.05;
        std::vector<double> w(t.states(), 0.0);
        w[t.index(0, 1)] = 1.0 - 0.15;
        w[t.index(4, 1)] = 0.15;
        const Pmf mu2(w);
        check_close(terminal_reward(t, mu2, t.index(4, 1)), -6.0 - 10.0, 1e-12);
        check_close(penalty_slope(t, mu2), -100.0, 1e-12);
    }

    TEST_CASE("kernel μ-partials match tangent finite differences") {
        PricingSpec s = small_spec(2, 2, 2, Pmf({0.2, 0.3, 0.5}), 50.0);
        PricingModel m(s);
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 20; ++trial) {
            const Pmf mu = random_pmf(s.states(), rng);
            const int z = int(rng() % s.counters()), a = int(rng() % s.actions());
            const int i = int(rng() % s.states()), j = int(rng() % s.states());
            if (i == j) continue;
            const auto sp = m.kernel_mu_partials(0, mu, s.index(z, 1), a);
            const Vector r = m.reward_mu_partials(1, mu, s.index(z, 1), a);
            const double h = 1e-6;
            std::vector<double> wp = mu.weights(), wm = mu.weights();
            wp[i] += h; wp[j] -= h; wm[i] -= h; wm[j] += h;
            const Pmf kp = m.kernel(0, Pmf(wp), s.index(z, 1), a), km = m.kernel(0, Pmf(wm), s.index(z, 1), a);
            // values: rows s', columns the partial coordinates listed in `columns`
            auto part = [&](int s2, int coord) {
                for (std::size_t c = 0; c < sp.columns.size(); ++c)
                    if (sp.columns[c] == coord) return sp.values(s2, c);
                return 0.0;
            };
            for (int s2 = 0; s2 < s.states(); ++s2) {
                const double fd = (kp[s2] - km[s2]) / (2 * h);
                const double an = part(s2, i) - part(s2, j);
                CHECK(std::abs(fd - an) <= 1e-6 * std::max({std::abs(fd), std::abs(an), 1e-3}));
            }
            const double rfd = (m.reward(1, Pmf(wp), s.index(z, 1), a) - m.reward(1, Pmf(wm), s.index(z, 1), a)) / (2 * h);
            CHECK(std::abs(rfd - (r[i] - r[j])) <= 1e-6 * std::max({std::abs(rfd), 1e-2}));
        }
    }

    TEST_CASE("conditional-gradient reduction for a random functional of μ_|z") {
        PricingSpec s = small_spec(2, 1, 1, Pmf({0.1, 0.4, 0.5}));
        std::mt19937_64 rng(9);
        const Pmf mu = random_pmf(s.states(), rng);
        const int zt = 2;
        Vector wts = Vector::Random(3);
        auto h = [&](const Pmf& m) {
            const Pmf xi = label_conditional(s, m, zt);
            return std::sin(wts[0] * xi[0] + wts[1] * xi[1] * xi[1]) + wts[2] * xi[2];
        };
        const Pmf xi = label_conditional(s, mu, zt);
        // gradient in ξ, then centered
        Vector gx(3);
        gx << wts[0] * std::cos(wts[0] * xi[0] + wts[1] * xi[1] * xi[1]),
            2 * wts[1] * xi[1] * std::cos(wts[0] * xi[0] + wts[1] * xi[1] * xi[1]), wts[2];
        const double mean = xi[0] * gx[0] + xi[1] * gx[1] + xi[2] * gx[2];
        double muz = 0.0;
        for (int l = 1; l <= 3; ++l) muz += mu[s.index(zt, l)];
        for (int z = 0; z < s.counters(); ++z)
            for (int l = 1; l <= 3; ++l) {
                const int i = s.index(z, l);
                const double e = 1e-6;
                std::vector<double> wp = mu.weights(), wm = mu.weights();
                wp[i] += e;
                wm[i] -= e;
                // ambient perturbation of a single coordinate; μ_|z is scale-invariant so no renormalization needed
                auto cond = [&](std::vector<double> w) {
                    double tot = 0.0;
                    for (double v : w) tot += v;
                    for (double& v : w) v /= tot;
                    return Pmf(w);
                };
                const double fd = (h(cond(wp)) - h(cond(wm))) / (2 * e);
                const double an = z == zt ? (gx[l - 1] - mean) / muz : 0.0;
                // renormalizing scales μ but leaves μ_|z and hence h unchanged
                CHECK(std::abs(fd - an) <= 1e-8 * std::max(std::abs(an), 1.0) + 1e-9);
            }
    }
}

TEST_SUITE("qplex efficient scheme") {
    TEST_CASE("Q̂ ξ-gradient matches tangent finite differences") {
        PricingSpec s = small_spec(3, 2, 2, Pmf({0.1, 0.2, 0.3, 0.4}));
        ArrivalTables arr(s);
        std::mt19937_64 rng(2);
        for (int trial = 0; trial < 20; ++trial) {
            const Vector sig = Vector::Random(s.states());
            const Pmf xi = random_pmf(4, rng);
            const int z = 1 + int(rng() % (s.counters() - 1));
            const QhatGradient g = qhat_with_gradient(s, arr, 0, xi, z, sig);
            for (int i = 0; i < 4; ++i)
                for (int j = i + 1; j < 4; ++j) {
                    const double h = 1e-6;
                    std::vector<double> wp = xi.weights(), wm = xi.weights();
                    wp[i] += h; wp[j] -= h; wm[i] -= h; wm[j] += h;
                    const auto qp = qhat_with_gradient(s, arr, 0, Pmf(wp), z, sig).qhat;
                    const auto qm = qhat_with_gradient(s, arr, 0, Pmf(wm), z, sig).qhat;
                    for (int a = 0; a < s.actions(); ++a) {
                        const double fd = (qp[a] - qm[a]) / (2 * h);
                        const double an = g.centered(a, i) - g.centered(a, j);
                        CHECK(std::abs(fd - an) <= 1e-6 * std::max({std::abs(fd), std::abs(an), 1e-3}));
                    }
                }
        }
    }

    TEST_CASE("efficient pass equals the generic recursion") {
        for (const char* pmf : {"Uni", "BB"}) {
            InstanceParams p;
            p.n = 2;
            p.b = 2;
            p.T = 6;
            p.service = named_service_pmf(pmf);
            p.shape = named_shape("DEC", 6);
            p.c_W = 0.1;
            p.c_T = 1.0;
            p.penalty.C = 100.0;
            p.penalty.alpha = 0.05;
            const PricingSpec s = build_spec(p);
            const ArrivalTables arr(s);
            const PricingModel m(s);
            const PartitionedPolicy pi = random_counter_policy(s, 4);
            const PricingPass pass = efficient_pass(s, arr, pi, true);
            const auto tr = core::forward_marginals(m, pi, initial_distribution(s));
            const auto sg = core::backward_sigma(m, pi, tr);
            const auto rd = core::expected_total_reward(m, pi, tr);
            check_close(pass.value.total, rd.total, 1e-10);
            check_close(pass.value.penalty, rd.penalty, 1e-10);
            for (int t = 0; t <= s.T; ++t) {
                for (int i = 0; i < s.states(); ++i) {
                    CHECK(std::abs(pass.trace.mu[t][i] - tr.mu[t][i]) <= 1e-12);
                    CHECK(std::abs(pass.sigma[t][i] - sg.sigma[t][i]) <= 1e-10);
                }
            }
            const auto qb = opt::qbar(tr, m, sg, pi);
            for (std::size_t k = 0; k < qb.q.values.size(); ++k) CHECK(std::abs(qb.q.values[k] - pass.qbar.q.values[k]) <= 1e-10);
        }
    }

    TEST_CASE("deterministic one-period service reduces to the count MDP") {
        InstanceParams p;
        p.n = 2;
        p.b = 2;
        p.T = 5;
        p.service = Pmf({1.0});
        p.c_W = 0.2;
        p.c_T = 0.7;
        const PricingSpec s = build_spec(p);
        const ArrivalTables arr(s);
        const PartitionedPolicy pi = random_counter_policy(s, 8);
        const PricingPass pass = efficient_pass(s, arr, pi, true);
        // all in service leave each period; z' = min(z − x(z) + Y, n+b)
        const int Z = s.counters();
        std::vector<double> V(Z);
        for (int z = 0; z < Z; ++z) V[z] = -s.c_T * z;
        for (int t = s.T - 1; t >= 0; --t) {
            std::vector<double> W(Z, 0.0);
            for (int z = 0; z < Z; ++z)
                for (int a = 0; a < s.actions(); ++a) {
                    const double lam = s.lambda[t][a];
                    const int base = z - std::min(z, s.n);
                    double q = -s.c_W * std::max(0, z - s.n), tail = 1.0, rev = 0.0;
                    for (int y = 0; base + y < Z; ++y) {
                        const double py = poisson_pmf(lam, y);
                        if (base + y == Z - 1) {
                            q += tail * V[Z - 1];
                            rev += tail * y;
                        } else {
                            q += py * V[base + y];
                            rev += py * y;
                        }
                        tail -= py;
                    }
                    W[z] += pi.prob(t, z, a) * (q + s.prices[a] * rev);
                }
            V = W;
            for (int z = 0; z < Z; ++z) check_close(pass.sigma[t][s.index(z, 1)], V[z], 1e-10);
        }
    }

    TEST_CASE("rows with certain completion carry no old-type mass") {
        PricingSpec s = small_spec(2, 1, 1, Pmf({0.5, 0.5}));
        std::vector<double> w(s.states(), 0.0);
        w[s.index(2, 1)] = 1.0;
        const Pmf p = kernel(s, 0, Pmf(w), s.index(2, 1), 0);
        // every survivor would be old; none survive so labels follow g
        for (int z2 = 0; z2 < s.counters(); ++z2) {
            const double tot = p[s.index(z2, 1)] + p[s.index(z2, 2)];
            if (tot > 0.0) check_close(p[s.index(z2, 1)] / tot, 0.5, 1e-14);
        }
    }

    TEST_CASE("evaluator and buffer probabilities") {
        PricingSpec s = small_spec(2, 2, 4, named_service_pmf("UniH"));
        PricingEvaluator ev(s);
        const PartitionedPolicy pi = ev.initial_policy();
        CHECK(pi.expert_count() == s.counters());
        const auto e = ev.evaluate(pi, true);
        CHECK(e.qbar.has_value());
        const auto pass = efficient_pass(s, ev.arrivals(), pi, false);
        const auto bp = buffer_probabilities(s, pass.trace);
        CHECK(bp.size() == std::size_t(s.T + 1));
        CHECK(bp[0] == 0.0);
        for (double v : bp) CHECK((v >= 0.0 && v <= 1.0));
    }
}
