#include "support.hpp"

#include "qdp/core/oracles.hpp"
#include "qdp/core/random_model.hpp"
#include "qdp/errors.hpp"
#include "qdp/csv.hpp"
#include "qdp/opt/optimizer.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <random>

using namespace qdp;
using namespace qdp::opt;
using qdp::test::check_close;

namespace {

QBarTable single(std::vector<double> q, double reach = 1.0) {
    QBarTable qb(1, 1, int(q.size()));
    for (std::size_t a = 0; a < q.size(); ++a) qb.at(0, 0, int(a)) = q[a];
    qb.reach_at(0, 0) = reach;
    return qb;
}

QBarTable random_qbar(int T, int Z, int A, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, scale);
    QBarTable qb(T, Z, A);
    for (double& v : qb.q.values) v = N(rng);
    for (double& r : qb.reach) r = std::abs(N(rng)) + 0.1;
    return qb;
}

std::vector<int> iota(int n) {
    std::vector<int> v(n);
    for (int i = 0; i < n; ++i) v[i] = i;
    return v;
}

} // namespace

TEST_SUITE("qbar") {
    TEST_CASE("tabular partition gives Q itself") {
        core::RandomSmoothModel::Options o;
        o.mu_dependent = true;
        core::RandomSmoothModel m(o, 3);
        const auto pi = core::random_interior_policy(3, iota(3), 3, 2, 1);
        const auto tr = core::forward_marginals(m, pi, core::random_interior_pmf(3, 2));
        const auto sg = core::backward_sigma(m, pi, tr);
        const QBarTable qb = qbar(tr, m, sg, pi);
        for (int t = 0; t < 3; ++t) {
            const core::Matrix Q = core::q_function(m, tr.mu[t], sg.sigma[t + 1], t);
            for (int s = 0; s < 3; ++s)
                for (int a = 0; a < 2; ++a) check_close(qb.at(t, s, a), Q(s, a), 1e-13);
        }
    }

    TEST_CASE("weighted average over a two-state expert") {
        // expert {0,1} with μ = (0.25, 0.75); Q(·,0) = (4, 8), Q(·,1) = (1, 1)
        test::TabularMarkov m(1, 2, 2);
        m.P[0] << 1.0, 0.0, 0.0, 1.0;
        m.P[1] << 1.0, 0.0, 0.0, 1.0;
        m.R[0] << 4.0, 1.0, 8.0, 1.0;
        PartitionedPolicy pi(1, {0, 0}, 1, 2);
        const auto tr = core::forward_marginals(m, pi, Pmf({0.25, 0.75}));
        const QBarTable qb = qbar(tr, m, core::backward_sigma(m, pi, tr), pi);
        check_close(qb.at(0, 0, 0), 7.0, 1e-15);
        check_close(qb.at(0, 0, 1), 1.0, 1e-15);
        check_close(qb.reach_at(0, 0), 1.0, 1e-15);
    }

    TEST_CASE("unreachable expert row is zero") {
        test::TabularMarkov m(1, 2, 2);
        m.P[0] << 1.0, 0.0, 0.0, 1.0;
        m.P[1] << 1.0, 0.0, 0.0, 1.0;
        m.R[0] << 4.0, 1.0, 8.0, 1.0;
        auto pi = PartitionedPolicy::tabular(1, 2, 2);
        const auto tr = core::forward_marginals(m, pi, Pmf({1.0, 0.0}));
        const QBarTable qb = qbar(tr, m, core::backward_sigma(m, pi, tr), pi);
        CHECK(qb.reach_at(0, 1) == 0.0);
        CHECK(qb.at(0, 1, 0) == 0.0);
        CHECK(qb.at(0, 1, 1) == 0.0);
    }
}

TEST_SUITE("exp_q_update") {
    TEST_CASE("hand example") {
        PartitionedPolicy pi(1, {0}, 1, 2);
        const auto out = exp_q_update(pi, single({std::log(3.0), 0.0}), 1.0);
        check_close(out.prob(0, 0, 0), 0.75, 1e-15);
        check_close(out.prob(0, 0, 1), 0.25, 1e-15);
    }
    TEST_CASE("constant Q̄ and tiny η leave the policy unchanged") {
        const auto pi = core::random_interior_policy(2, iota(3), 3, 4, 5);
        QBarTable qb(2, 3, 4);
        for (double& v : qb.q.values) v = 2.5;
        for (double& r : qb.reach) r = 1.0;
        const auto out = exp_q_update(pi, qb, 7.0);
        for (int t = 0; t < 2; ++t)
            for (int z = 0; z < 3; ++z)
                for (int a = 0; a < 4; ++a) check_close(out.prob(t, z, a), pi.prob(t, z, a), 1e-15);
        const auto small = exp_q_update(pi, random_qbar(2, 3, 4, 1), 1e-300);
        for (int t = 0; t < 2; ++t)
            for (int z = 0; z < 3; ++z)
                for (int a = 0; a < 4; ++a) check_close(small.prob(t, z, a), pi.prob(t, z, a), 1e-15);
    }
    TEST_CASE("boundary policy is rejected") {
        auto pi = PartitionedPolicy::tabular(1, 1, 2);
        pi.set_point_mass(0, 0, 0);
        CHECK_THROWS_AS(exp_q_update(pi, single({1.0, 0.0}), 1.0), DomainError);
    }
    TEST_CASE("simplex preservation and shift invariance") {
        const auto pi = core::random_interior_policy(3, iota(4), 4, 3, 2);
        QBarTable qb = random_qbar(3, 4, 3, 9, 10.0);
        const auto out = exp_q_update(pi, qb, 3.0);
        for (int t = 0; t < 3; ++t)
            for (int z = 0; z < 4; ++z) {
                double tot = 0.0;
                for (int a = 0; a < 3; ++a) {
                    CHECK(out.prob(t, z, a) > 0.0);
                    tot += out.prob(t, z, a);
                }
                check_close(tot, 1.0, 1e-12);
                const double c = 17.0 * t - 3.0 * z;
                for (int a = 0; a < 3; ++a) qb.at(t, z, a) += c;
            }
        const auto shifted = exp_q_update(pi, qb, 3.0);
        for (std::size_t i = 0; i < 3 * 4 * 3; ++i) {
            const int t = int(i / 12), z = int(i / 3 % 4), a = int(i % 3);
            CHECK(std::abs(shifted.prob(t, z, a) - out.prob(t, z, a)) <= 1e-12);
        }
    }
    TEST_CASE("equals softmax of logits plus η times centered Q̄") {
        const auto pi = core::random_interior_policy(2, iota(3), 3, 4, 11);
        const QBarTable qb = random_qbar(2, 3, 4, 12);
        const double eta = 0.7;
        const auto out = exp_q_update(pi, qb, eta);
        const auto ng = approx_natural_gradient(qb);
        for (int t = 0; t < 2; ++t)
            for (int z = 0; z < 3; ++z) {
                std::vector<double> w(4);
                double tot = 0.0;
                for (int a = 0; a < 4; ++a) tot += w[a] = std::exp(std::log(pi.prob(t, z, a)) + eta * ng.at(t, z, a));
                for (int a = 0; a < 4; ++a) CHECK(std::abs(out.prob(t, z, a) - w[a] / tot) <= 1e-12);
            }
    }
    TEST_CASE("KL of one small step matches half η² times the variance") {
        const auto pi = core::random_interior_policy(1, iota(5), 5, 3, 4);
        const QBarTable qb = random_qbar(1, 5, 3, 6);
        for (double eta : {0.1, 0.05, 0.01}) {
            const auto out = exp_q_update(pi, qb, eta);
            for (int z = 0; z < 5; ++z) {
                double kl = 0.0, mean = 0.0, var = 0.0;
                for (int a = 0; a < 3; ++a) {
                    kl += pi.prob(0, z, a) * std::log(pi.prob(0, z, a) / out.prob(0, z, a));
                    mean += pi.prob(0, z, a) * qb.at(0, z, a);
                }
                for (int a = 0; a < 3; ++a) var += pi.prob(0, z, a) * std::pow(qb.at(0, z, a) - mean, 2);
                const double approx = 0.5 * eta * eta * var;
                CHECK(std::abs(kl - approx) <= 0.1 * approx);
            }
        }
    }
}

TEST_SUITE("stopping_stat") {
    TEST_CASE("Bernoulli variance") {
        PartitionedPolicy pi(1, {0}, 1, 2);
        check_close(stopping_stat(pi, single({1.0, 0.0})), 0.25, 1e-15);
    }
    TEST_CASE("pure policy and constant rows give zero") {
        auto pi = PartitionedPolicy::tabular(1, 1, 3);
        CHECK(stopping_stat(pi, single({2.0, 2.0, 2.0})) == 0.0);
        pi.set_point_mass(0, 0, 2);
        CHECK(stopping_stat(pi, single({1.0, -4.0, 3.0})) == 0.0);
    }
}

TEST_SUITE("to_pure_policy") {
    TEST_CASE("mode with lowest-index ties") {
        PartitionedPolicy pi(1, {0, 1}, 2, 3);
        pi.set_row(0, 0, Pmf({0.2, 0.5, 0.3}));
        pi.set_row(0, 1, Pmf({0.4, 0.4, 0.2}));
        const auto p = to_pure_policy(pi);
        CHECK(p.prob(0, 0, 1) == 1.0);
        CHECK(p.prob(0, 1, 0) == 1.0);
        CHECK(to_pure_policy(p) == p);
        CHECK(p.is_pure());
    }
}

TEST_SUITE("shared_update") {
    TEST_CASE("singleton groups reduce to the plain update") {
        auto pi = core::random_interior_policy(2, iota(2), 2, 3, 3);
        const QBarTable qb = random_qbar(2, 2, 3, 4);
        const auto plain = exp_q_update(pi, qb, 0.9);
        std::vector<SharingGroup> g;
        for (int t = 0; t < 2; ++t)
            for (int z = 0; z < 2; ++z) g.push_back({{z}, {t}});
        pi.set_sharing(g);
        const auto sh = shared_update(pi, qb, 0.9);
        for (int t = 0; t < 2; ++t)
            for (int z = 0; z < 2; ++z)
                for (int a = 0; a < 3; ++a) check_close(sh.prob(t, z, a), plain.prob(t, z, a), 1e-14);
    }
    TEST_CASE("opposing cells cancel; summed exponent hand example") {
        PartitionedPolicy pi(2, {0}, 1, 2);
        pi.set_sharing({{{0}, {0, 1}}});
        QBarTable qb(2, 1, 2);
        qb.at(0, 0, 0) = 1.0;
        qb.at(1, 0, 1) = 1.0;
        qb.reach = {1.0, 1.0};
        const auto same = shared_update(pi, qb, 1.0);
        check_close(same.prob(1, 0, 0), 0.5, 1e-15);
        qb.at(0, 0, 0) = std::log(3.0) / 2;
        qb.at(1, 0, 0) = std::log(3.0) / 2;
        qb.at(1, 0, 1) = 0.0;
        const auto out = shared_update(pi, qb, 1.0);
        for (int t = 0; t < 2; ++t) {
            check_close(out.prob(t, 0, 0), 0.75, 1e-15);
            check_close(out.prob(t, 0, 1), 0.25, 1e-15);
        }
    }
    TEST_CASE("missing sharing scheme is a domain error") {
        PartitionedPolicy pi(1, {0}, 1, 2);
        CHECK_THROWS_AS(shared_update(pi, single({1.0, 0.0}), 1.0), DomainError);
    }
    TEST_CASE("sharing groups must partition the table") {
        PartitionedPolicy pi(2, {0, 1}, 2, 2);
        CHECK_THROWS_AS(pi.set_sharing({{{0, 1}, {0}}}), ConfigError);
    }
}

TEST_SUITE("approx_natural_gradient") {
    TEST_CASE("centering") {
        const QBarTable qb = random_qbar(3, 2, 4, 1);
        const auto ng = approx_natural_gradient(qb);
        for (int t = 0; t < 3; ++t)
            for (int z = 0; z < 2; ++z) {
                double s = 0.0;
                for (int a = 0; a < 4; ++a) s += ng.at(t, z, a);
                CHECK(std::abs(s) <= 1e-12);
            }
        const auto c = approx_natural_gradient(single({3.0, 3.0, 3.0}));
        for (double v : c.values) CHECK(v == 0.0);
    }
    TEST_CASE("equals the pseudoinverse of the softmax Fisher block applied to the gradient") {
        const auto pi = core::random_interior_policy(2, iota(3), 3, 4, 21);
        const QBarTable qb = random_qbar(2, 3, 4, 22);
        const auto ng = approx_natural_gradient(qb);
        for (int t = 0; t < 2; ++t)
            for (int z = 0; z < 3; ++z) {
                Eigen::VectorXd p(4), g(4);
                for (int a = 0; a < 4; ++a) p[a] = pi.prob(t, z, a);
                const double r = qb.reach_at(t, z);
                // gradient in softmax coordinates: r·(diag(p) − ppᵀ)·Q̄
                for (int a = 0; a < 4; ++a) g[a] = qb.at(t, z, a);
                const Eigen::MatrixXd F = r * (Eigen::MatrixXd(p.asDiagonal()) - p * p.transpose());
                const Eigen::VectorXd grad = F * g;
                Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(F);
                cod.setThreshold(1e-10);
                const Eigen::VectorXd sol = cod.pseudoInverse() * grad;
                for (int a = 0; a < 4; ++a) CHECK(std::abs(sol[a] - ng.at(t, z, a)) <= 1e-8);
            }
    }
}

TEST_SUITE("local_opt_check") {
    TEST_CASE("pure policies") {
        auto pi = PartitionedPolicy::tabular(1, 1, 3);
        pi.set_point_mass(0, 0, 2);
        CHECK(local_opt_check(pi, single({0.0, 1.0, 2.0}), 1e-4).empty());
        pi.set_point_mass(0, 0, 0);
        const auto v = local_opt_check(pi, single({0.0, 1.0, 2.0}), 1e-4);
        REQUIRE(v.size() == 1);
        CHECK(v[0].a == 0);
        check_close(v[0].gap, 2.0, 1e-15);
    }
}

TEST_SUITE("train") {
    TEST_CASE("zero rewards stop after one episode") {
        core::RandomSmoothModel::Options o;
        o.zero_rewards = true;
        core::RandomSmoothModel m(o, 1);
        GenericEvaluator ev(m, Pmf::uniform(3), iota(3), 3);
        const auto init = ev.initial_policy();
        const TrainTrace tr = train(ev, init, {});
        REQUIRE(tr.episodes.size() == 1);
        CHECK(tr.episodes[0].stopping_stat == 0.0);
        CHECK(tr.final_policy == init);
        CHECK(tr.converged);
    }

    TEST_CASE("Markov case reaches the Bellman optimum") {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            core::RandomSmoothModel::Options o;
            o.horizon = 4;
            o.states = 3;
            o.actions = 3;
            o.mu_dependent = false;
            core::RandomSmoothModel m(o, seed);
            const Pmf mu0 = core::random_interior_pmf(3, seed);
            GenericEvaluator ev(m, mu0, iota(3), 3);
            TrainOptions opt;
            opt.eta = 20.0;
            opt.epsilon = 1e-12;
            const TrainTrace tr = train(ev, ev.initial_policy(), opt);
            CHECK(tr.converged);
            const auto pure = to_pure_policy(tr.final_policy);
            const double J = ev.evaluate(pure, false).value.total;
            // Bellman optimality on explicit tables
            const Pmf any = Pmf::uniform(3);
            std::vector<double> V(3);
            for (int s = 0; s < 3; ++s) V[s] = m.terminal_reward(any, s);
            for (int t = 3; t >= 0; --t) {
                std::vector<double> W(3, -1e300);
                for (int s = 0; s < 3; ++s)
                    for (int a = 0; a < 3; ++a) {
                        const Pmf p = m.kernel(t, any, s, a);
                        double q = m.reward(t, any, s, a);
                        for (int s2 = 0; s2 < 3; ++s2) q += p[s2] * V[s2];
                        W[s] = std::max(W[s], q);
                    }
                V = W;
            }
            const double opt_v = mu0.expect(V);
            CHECK(std::abs(J - opt_v) <= 1e-8 * std::abs(opt_v));
            CHECK(local_opt_check(tr.final_policy, *ev.evaluate(tr.final_policy, true).qbar, 1e-4).empty());
        }
    }

    TEST_CASE("adaptive steps never decrease accepted J") {
        core::RandomSmoothModel::Options o;
        o.horizon = 4;
        o.mu_dependent = true;
        o.coupling = 2.0;
        core::RandomSmoothModel m(o, 17);
        GenericEvaluator ev(m, Pmf::uniform(3), iota(3), 3);
        TrainOptions opt;
        opt.eta = 50.0;
        opt.adaptive = true;
        opt.max_episodes = 60;
        const TrainTrace tr = train(ev, ev.initial_policy(), opt);
        for (std::size_t i = 1; i < tr.episodes.size(); ++i) {
            CHECK(tr.episodes[i].episode == tr.episodes[i - 1].episode + 1);
            if (tr.episodes[i - 1].accepted) CHECK(tr.episodes[i].value.total >= tr.episodes[i - 1].value.total);
        }
    }

    TEST_CASE("non-finite objective aborts with a record") {
        struct Exploding : test::TabularMarkov {
            using TabularMarkov::TabularMarkov;
            double reward(int, const Pmf&, int, int) const override { return std::nan(""); }
        } m(1, 1, 2);
        m.P[0] << 1.0;
        m.P[1] << 1.0;
        GenericEvaluator ev(m, Pmf({1.0}), {0}, 1);
        int seen = 0;
        CHECK_THROWS_AS(train(ev, ev.initial_policy(), {}, [&](const EpisodeRecord&) { ++seen; }), NumericalError);
        CHECK(seen == 1);
    }

    TEST_CASE("episode cap") {
        core::RandomSmoothModel::Options o;
        core::RandomSmoothModel m(o, 2);
        GenericEvaluator ev(m, Pmf::uniform(3), iota(3), 3);
        TrainOptions opt;
        opt.eta = 1e-3;
        opt.max_episodes = 3;
        opt.snapshot_every = 2;
        const TrainTrace tr = train(ev, ev.initial_policy(), opt);
        CHECK(tr.episodes.size() == 3);
        CHECK_FALSE(tr.converged);
        CHECK(tr.snapshots.size() == 1);
    }
}

TEST_SUITE("policy files") {
    TEST_CASE("json round trip keeps log-probabilities and sharing") {
        auto pi = core::random_interior_policy(2, {0, 0, 1}, 2, 3, 4);
        pi.set_log_row(1, 1, std::vector<double>{0.0, -800.0, -std::numeric_limits<double>::infinity()});
        PartitionedPolicy back = policy_from_json(policy_to_json(pi));
        CHECK(back == pi);
        pi.set_sharing({{{0, 1}, {0}}, {{0, 1}, {1}}});
        back = policy_from_json(policy_to_json(pi));
        CHECK(back == pi);
        CHECK_THROWS_AS(policy_from_json("{\"format\":\"x\"}"), ConfigError);
        CHECK_THROWS_AS(policy_from_json("not json"), ConfigError);
        const auto path = (std::filesystem::temp_directory_path() / "qdp_policy_test.json").string();
        save_policy(pi, path);
        CHECK(load_policy(path) == pi);
        std::filesystem::remove(path);
    }
    TEST_CASE("pure csv and trace csv") {
        PartitionedPolicy pi(2, {0, 1}, 2, 3);
        pi.set_point_mass(0, 0, 2);
        pi.set_point_mass(0, 1, 1);
        pi.set_row(1, 0, Pmf({0.5, 0.5, 0.0}));
        const CsvTable tab = parse_csv(pure_policy_csv(pi));
        CHECK(tab.header == std::vector<std::string>{"t", "z0", "z1"});
        CHECK(tab.rows[0] == std::vector<std::string>{"0", "2", "1"});
        CHECK(tab.rows[1] == std::vector<std::string>{"1", "0", "0"});
        TrainTrace tr;
        tr.episodes.push_back({1, {}, 0.5, 1.0, true});
        const CsvTable t2 = parse_csv(trace_csv(tr));
        CHECK(t2.column("eta_effective") == 5);
        CHECK(parse_double(t2.rows[0][4]) == 0.5);
    }
}
