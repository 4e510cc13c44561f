#include "support.hpp"

#include "qdp/baselines/fullinfo.hpp"
#include "qdp/csv.hpp"
#include "qdp/errors.hpp"
#include "qdp/sim/simulator.hpp"

#include <cmath>

using namespace qdp;
using namespace qdp::sim;

namespace {

qplex::PricingSpec instance(int n, int b, int T, Pmf g, double cW, double cT, double u = 5.0,
                            std::vector<double> prices = qplex::default_prices()) {
    qplex::InstanceParams p;
    p.n = n;
    p.b = b;
    p.T = T;
    p.service = std::move(g);
    p.shape = qplex::named_shape("ALT", T);
    p.u_avg_max = u;
    p.c_W = cW;
    p.c_T = cT;
    p.prices = std::move(prices);
    p.penalty.alpha = 0.05;
    return qplex::build_spec(p);
}

} // namespace

TEST_SUITE("rng") {
    TEST_CASE("streams are reproducible and distinct") {
        SplitMix64 a(7, 3), b(7, 3), c(7, 4), d(8, 3);
        const auto x = a.next();
        CHECK(x == b.next());
        CHECK(x != c.next());
        CHECK(x != d.next());
        SplitMix64 u(1, 1);
        double m = 0.0;
        for (int i = 0; i < 100000; ++i) {
            const double v = u.uniform();
            CHECK((v >= 0.0 && v < 1.0));
            m += v;
        }
        CHECK(std::abs(m / 100000 - 0.5) < 0.01);
    }
}

TEST_SUITE("simulate_policy") {
    TEST_CASE("reject always with no costs") {
        const auto s = instance(3, 2, 10, qplex::named_service_pmf("Uni"), 0.0, 0.0);
        const auto r = simulate_policy(s, CountPolicy(s.T, s.counters(), s.actions() - 1), 2000, 1);
        CHECK(r.mean == 0.0);
        for (double p : r.p_hat) CHECK(p == 0.0);
        CHECK(r.p_hat.size() == std::size_t(s.T));
    }

    TEST_CASE("bit-identical across runs and thread counts") {
        const auto s = instance(3, 2, 12, qplex::named_service_pmf("BB"), 0.1, 1.0);
        CountPolicy cp(s.T, s.counters(), 2);
        const auto a = simulate_policy(s, cp, 5000, 42, 1);
        const auto b = simulate_policy(s, cp, 5000, 42, 1);
        const auto c = simulate_policy(s, cp, 5000, 42, 4);
        for (const auto* r : {&b, &c}) {
            CHECK(r->mean == a.mean);
            CHECK(r->std_error == a.std_error);
            CHECK(r->revenue == a.revenue);
            CHECK(r->p_hat == a.p_hat);
        }
        CHECK(simulate_policy(s, cp, 5000, 43, 1).mean != a.mean);
        CHECK(a.ci_halfwidth == 3.0 * a.std_error);
    }

    TEST_CASE("conservation per replication") {
        const auto s = instance(2, 3, 15, qplex::named_service_pmf("UniM"), 0.1, 1.0, 8.0);
        const QueueSimulator sim(s);
        const CountPolicy cp(s.T, s.counters(), 3);
        for (std::uint64_t r = 0; r < 200; ++r) {
            const auto o = simulate_replication(sim, cp, 5, r);
            CHECK(o.admitted == o.departed + o.final_count);
            test::check_close(o.revenue, s.prices[3] * o.admitted, 1e-9);
            CHECK(o.final_count <= s.max_count());
        }
    }

    TEST_CASE("agrees with the exact value") {
        const auto s = instance(2, 2, 8, qplex::named_service_pmf("UniH"), 0.1, 1.0);
        CountPolicy cp(s.T, s.counters());
        for (int t = 0; t < s.T; ++t)
            for (int z = 0; z < s.counters(); ++z) cp.at(t, z) = std::min(10, 3 + 2 * z);
        const baselines::FullInfoModel m(s);
        const double exact = baselines::bellman_evaluate(m, cp).value;
        const auto r = simulate_policy(s, cp, 200000, 9);
        CHECK(std::abs(r.mean - exact) <= 4.0 * r.std_error);

        // violation probabilities match the exact forward distribution as well
        const auto mu = baselines::forward_distribution(m, cp.to_policy(qplex::counter_assignment(s), s.actions()));
        for (int t = 1; t <= s.T; ++t) {
            double p = 0.0;
            for (int i = 0; i < m.size(); ++i)
                if (m.state(i).z > s.zhat()) p += mu[t][i];
            CHECK(std::abs(r.p_hat[t - 1] - p) <= 4.0 * std::max(r.p_se[t - 1], 1e-4));
        }
    }

    TEST_CASE("overloaded system at the lowest price fills the buffer") {
        const auto s = instance(2, 2, 30, qplex::named_service_pmf("UniH"), 0.0, 0.0, 10.0);
        const auto v = estimate_violations(s, CountPolicy(s.T, s.counters(), 0), 4000, 3);
        CHECK(v.p_hat.back() > 0.95);
        CHECK(v.p_hat.front() < v.p_hat.back());
    }

    TEST_CASE("csv outputs round-trip") {
        const auto s = instance(1, 1, 3, Pmf({0.5, 0.5}), 0.1, 1.0);
        const auto r = simulate_policy(s, CountPolicy(s.T, s.counters(), 1), 100, 1);
        const CsvTable v = parse_csv(violation_csv(r));
        CHECK(v.rows.size() == 3);
        CHECK(to_csv(v) == violation_csv(r));
        const CsvTable sm = parse_csv(sim_summary_csv({{"p", r}}));
        CHECK(parse_double(sm.rows[0][2]) == r.mean);
    }
}

TEST_SUITE("exhaustive_restricted") {
    TEST_CASE("single candidate") {
        const auto s = instance(2, 1, 5, Pmf({0.5, 0.5}), 0.0, 0.0);
        ExhaustiveOptions o;
        o.reps = 2000;
        const auto r = exhaustive_restricted(s, {{0, 3}}, {4}, o);
        CHECK(r.candidates.size() == 1);
        CHECK(parse_csv(exhaustive_csv(s, r)).rows.size() == 1);
    }

    TEST_CASE("a dominated price leaves existing results and the winner unchanged") {
        const auto s = instance(2, 2, 10, qplex::named_service_pmf("UniH"), 0.05, 0.5, 5.0, {0.0, 0.5, 0.8, 1.1});
        ExhaustiveOptions o;
        o.reps = 3000;
        o.seed = 5;
        o.top_k = 2;
        o.rerun_reps = 3000;
        const std::vector<std::pair<int, int>> blocks{{0, 1}, {2, 4}};
        const auto base = exhaustive_restricted(s, blocks, {1, 2, 3}, o);
        const auto more = exhaustive_restricted(s, blocks, {0, 1, 2, 3}, o);
        CHECK(more.candidates.size() == 16);
        for (const auto& c : base.candidates)
            for (const auto& d : more.candidates)
                if (c.actions == d.actions) CHECK(c.result.mean == d.result.mean);
        REQUIRE(!base.ranking.empty());
        CHECK(base.candidates[base.ranking[0]].actions == more.candidates[more.ranking[0]].actions);
        CHECK(more.rerun_ranking.size() == 2);
    }

    TEST_CASE("guard") {
        const auto s = instance(2, 2, 3, Pmf({1.0}), 0.0, 0.0);
        ExhaustiveOptions o;
        o.guard = 10;
        CHECK_THROWS_AS(exhaustive_restricted(s, {{0, 1}, {2, 4}}, {0, 1, 2, 3}, o), ResourceGuardError);
        CHECK_THROWS_AS(block_policy(s, {{0, 1}, {3, 4}}, {0, 1}), ConfigError);
    }
}
