// Command-line front end. Exit codes: 0 ok, 1 usage/config, 2 invariant failure, 3 resource guard.

#include "qdp/baselines/fullinfo.hpp"
#include "qdp/baselines/geometric.hpp"
#include "qdp/baselines/qlearn.hpp"
#include "qdp/csv.hpp"
#include "qdp/errors.hpp"
#include "qdp/harness/config.hpp"
#include "qdp/harness/design.hpp"
#include "qdp/harness/gradcheck.hpp"
#include "qdp/sim/simulator.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

using namespace qdp;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    int threads = 0;
};

struct InvariantFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

harness::RunConfig load(const Globals& g) {
    if (g.config.empty()) throw ConfigError("--config is required", {"--config"});
    auto c = harness::load_config(g.config);
    if (g.seed) {
        c.seed = *g.seed;
        c.qlearn.seed = *g.seed;
    }
    return c;
}

std::string out_path(const Globals& g, const std::string& name) {
    fs::create_directories(g.out);
    return (fs::path(g.out) / name).string();
}

void emit(const Globals& g, const std::string& name, const std::string& text) {
    const std::string p = out_path(g, name);
    write_text_file(p, text);
    std::cout << "wrote " << p << "\n";
}

/// .json: randomized policy file; anything else: count-policy CSV.
PartitionedPolicy load_policy_any(const std::string& path, const qplex::PricingSpec& spec) {
    PartitionedPolicy p = fs::path(path).extension() == ".json"
                              ? opt::load_policy(path)
                              : count_policy_from_csv(read_text_file(path))
                                    .to_policy(qplex::counter_assignment(spec), spec.actions());
    if (p.horizon() != spec.T || p.expert_count() != spec.counters() || p.action_count() != spec.actions() ||
        p.assignment() != qplex::counter_assignment(spec))
        throw ConfigError("policy shape (" + std::to_string(p.horizon()) + "x" + std::to_string(p.expert_count()) + "x" +
                              std::to_string(p.action_count()) + ") does not match the config",
                          {"--policy"});
    return p;
}

void print_value(const char* label, const core::RewardDecomposition& v) {
    std::printf("%s J=%.12g revenue=%.12g waiting=%.12g terminal=%.12g penalty=%.12g\n", label, v.total,
                v.revenue.value_or(v.running), v.waiting.value_or(0.0), v.terminal, v.penalty);
}

opt::TrainTrace train_with_log(const harness::RunConfig& c, const qplex::PricingSpec& spec, bool quiet) {
    const qplex::PricingEvaluator ev(spec);
    return opt::train(ev, harness::initial_policy(c, spec), c.train, [&](const opt::EpisodeRecord& r) {
        if (!quiet && (r.episode % 50 == 0)) std::fprintf(stderr, "episode %d J=%.10g stat=%.3g\n", r.episode,
                                                          r.value.total, r.stopping_stat);
    });
}

std::string sim_summary(const harness::RunConfig& c, const sim::SimResult& r) {
    return sim::sim_summary_csv({{harness::config_hash(c), r}});
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Queue pricing policies: optimization, baselines and simulation"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "run configuration (JSON)");
    app.add_option("--out", g.out, "output directory")->capture_default_str();
    app.add_option("--seed", g.seed, "override the configured seed");
    app.add_option("--threads", g.threads, "worker threads (0 = hardware)")->capture_default_str();

    std::function<void()> action;

    // train
    auto* train = app.add_subcommand("train", "optimize a policy on the QPLEX model");
    std::optional<double> eta, epsilon;
    std::optional<int> max_episodes;
    bool adaptive = false, quiet = false;
    std::string sharing;
    std::vector<double> sweep;
    train->add_option("--eta", eta, "step size");
    train->add_option("--epsilon", epsilon, "stopping tolerance");
    train->add_option("--max-episodes", max_episodes);
    train->add_flag("--adaptive", adaptive, "halve the step when the objective drops");
    train->add_option("--sharing", sharing, "none | time")->check(CLI::IsMember({"none", "time"}));
    train->add_option("--eta-sweep", sweep, "train once per step size and report episode counts");
    train->add_flag("--quiet", quiet);
    train->callback([&] {
        action = [&] {
            auto c = load(g);
            if (eta) c.train.eta = *eta;
            if (epsilon) c.train.epsilon = *epsilon;
            if (max_episodes) c.train.max_episodes = *max_episodes;
            if (adaptive) c.train.adaptive = true;
            if (sharing == "none") c.sharing.kind = harness::SharingSpec::None;
            if (sharing == "time") c.sharing.kind = harness::SharingSpec::TimeHomogeneous;
            const auto spec = harness::to_spec(c);
            if (!sweep.empty()) {
                CsvTable t;
                t.header = {"eta", "episodes", "J", "converged"};
                for (double e : sweep) {
                    c.train.eta = e;
                    const auto tr = train_with_log(c, spec, true);
                    t.add_row({fmt_double(e), std::to_string(tr.episodes.size()), fmt_double(tr.final_value.total),
                               tr.converged ? "1" : "0"});
                    std::printf("eta=%g episodes=%zu J=%.12g\n", e, tr.episodes.size(), tr.final_value.total);
                    emit(g, "trace_eta_" + fmt_double(e) + ".csv", opt::trace_csv(tr));
                }
                emit(g, "eta_sweep.csv", to_csv(t));
                return;
            }
            const auto tr = train_with_log(c, spec, quiet);
            print_value("final", tr.final_value);
            std::printf("episodes=%zu converged=%d stat=%.3g hash=%s\n", tr.episodes.size(), int(tr.converged),
                        tr.final_stat, harness::config_hash(c).c_str());
            opt::save_policy(tr.final_policy, out_path(g, "policy.json"));
            std::cout << "wrote " << out_path(g, "policy.json") << "\n";
            emit(g, "policy_pure.csv", opt::pure_policy_csv(tr.final_policy));
            emit(g, "trace.csv", opt::trace_csv(tr));
        };
    });

    // eval
    auto* eval = app.add_subcommand("eval", "QPLEX value of a policy");
    std::string policy_path;
    bool marginals = false;
    eval->add_option("--policy", policy_path, "policy.json or count-policy CSV")->required();
    eval->add_flag("--marginals", marginals, "write per-period counter distributions");
    eval->callback([&] {
        action = [&] {
            const auto c = load(g);
            const auto spec = harness::to_spec(c);
            const auto pi = load_policy_any(policy_path, spec);
            const qplex::ArrivalTables arr(spec);
            const auto pass = qplex::efficient_pass(spec, arr, pi, false);
            print_value("qplex", pass.value);
            if (marginals) {
                CsvTable t;
                t.header = {"t", "z", "probability"};
                for (int tt = 0; tt <= spec.T; ++tt)
                    for (int z = 0; z < spec.counters(); ++z) {
                        double m = 0.0;
                        for (int l = 1; l <= spec.labels(); ++l) m += pass.trace.mu[tt][spec.index(z, l)];
                        t.add_row({std::to_string(tt), std::to_string(z), fmt_double(m)});
                    }
                emit(g, "marginals.csv", to_csv(t));
            }
        };
    });

    // gradcheck
    auto* grad = app.add_subcommand("gradcheck", "finite-difference and oracle checks");
    harness::GradcheckOptions gopt;
    grad->add_option("--trials", gopt.trials)->capture_default_str();
    grad->add_option("--corrupt", gopt.corrupt)->group("");
    grad->callback([&] {
        action = [&] {
            if (g.seed) gopt.seed = *g.seed;
            if (!g.config.empty()) gopt.pricing = load(g);
            bool ok = true;
            for (const auto& r : harness::run_gradcheck(gopt)) {
                std::printf("%s %-30s cases=%d max_error=%.3e tol=%.0e worst=%s\n", r.pass() ? "PASS" : "FAIL",
                            r.name.c_str(), r.cases, r.max_error, r.tolerance, r.worst.c_str());
                ok = ok && r.pass();
            }
            if (!ok) throw InvariantFailure("gradcheck failed");
        };
    });

    // design
    auto* design = app.add_subcommand("design", "run an experiment grid");
    std::string design_path;
    bool svg = false;
    design->add_option("--design", design_path)->required();
    design->add_flag("--svg", svg, "write gap histograms");
    design->callback([&] {
        action = [&] {
            const auto d = harness::load_design(design_path);
            const int par = g.threads > 0 ? g.threads : int(std::max(1u, std::thread::hardware_concurrency()));
            std::printf("%zu cells, %d in parallel\n", d.cardinality(), par);
            const auto r = harness::run_design(d, par, g.out, [](const harness::CellResult& c) {
                std::fprintf(stderr, "cell %zu done\n", c.summary.cell);
            });
            std::cout << "wrote " << out_path(g, "records.csv") << "\nwrote " << out_path(g, "summary.csv") << "\n";
            bool dominance = true;
            std::vector<double> gq, gm, ge;
            for (const auto& c : r.cells) {
                dominance = dominance && c.summary.dominance();
                gq.push_back(c.summary.gap_qplex());
                gm.push_back(c.summary.gap_mdp());
                ge.push_back(c.summary.gap_extract());
            }
            if (svg) {
                emit(g, "gap_qplex.svg", harness::histogram_svg(gq, "(v_qdp qplex - v_qdp exact) / |v_qdp exact|"));
                emit(g, "gap_mdp.svg", harness::histogram_svg(gm, "(v_mdp - v_qdp exact) / |v_mdp|"));
                emit(g, "gap_extract.svg", harness::histogram_svg(ge, "(v_extract - v_qdp exact) / |v_qdp exact|"));
            }
            if (!dominance) throw InvariantFailure("full-information optimum dominated in some cell");
        };
    });

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo value of a count policy");
    std::optional<long> reps;
    simulate->add_option("--policy", policy_path, "policy.json or count-policy CSV (default: train first)");
    simulate->add_option("--reps", reps);
    simulate->callback([&] {
        action = [&] {
            const auto c = load(g);
            const auto spec = harness::to_spec(c);
            const PartitionedPolicy pi =
                policy_path.empty() ? train_with_log(c, spec, true).final_policy : load_policy_any(policy_path, spec);
            const auto r = sim::simulate_policy(spec, CountPolicy::from_policy(pi), reps.value_or(c.simulate.reps),
                                                c.seed, g.threads);
            double worst = 0.0;
            for (double p : r.p_hat) worst = std::max(worst, p);
            std::printf("mean=%.10g se=%.3g ci=%.3g revenue=%.10g waiting=%.10g terminal=%.10g max_p_hat=%.4g\n",
                        r.mean, r.std_error, r.ci_halfwidth, r.revenue, r.waiting, r.terminal, worst);
            emit(g, "sim_summary.csv", sim_summary(c, r));
            emit(g, "violations.csv", sim::violation_csv(r));
        };
    });

    // exhaustive
    auto* exh = app.add_subcommand("exhaustive", "simulate every block-constant policy of a restricted class");
    exh->callback([&] {
        action = [&] {
            const auto c = load(g);
            const auto spec = harness::to_spec(c);
            if (c.exhaustive.blocks.empty()) throw ConfigError("exhaustive.blocks is empty", {"exhaustive.blocks"});
            std::vector<int> subset = c.exhaustive.price_indices;
            if (subset.empty())
                for (int a = 0; a < spec.actions(); ++a) subset.push_back(a);
            sim::ExhaustiveOptions o;
            o.reps = c.exhaustive.reps;
            o.seed = c.seed;
            o.top_k = c.exhaustive.top_k;
            o.rerun_reps = c.exhaustive.rerun_reps;
            o.threads = g.threads;
            const auto r = sim::exhaustive_restricted(spec, c.exhaustive.blocks, subset, o);
            if (r.ranking.empty()) std::printf("no feasible candidate\n");
            else {
                const auto& w = r.candidates[r.ranking[0]];
                std::printf("best mean=%.10g ci=%.3g prices:", w.result.mean, w.result.ci_halfwidth);
                for (int a : w.actions) std::printf(" %g", spec.prices[a]);
                std::printf("\n");
            }
            emit(g, "exhaustive.csv", sim::exhaustive_csv(spec, r));
        };
    });

    // qlearn
    auto* ql = app.add_subcommand("qlearn", "state-aggregated Q-learning baseline");
    ql->callback([&] {
        action = [&] {
            auto c = load(g);
            c.qlearn.threads = g.threads;
            const auto r = baselines::qlearn_aggregated(harness::to_spec(c), c.qlearn);
            std::printf("best value=%.10g ci=%.3g rate=%g episode=%ld\n", r.best_value, r.best_ci, r.best_rate,
                        r.best_episode);
            emit(g, "qlearn_curve.csv", baselines::qlearn_curve_csv(r));
            emit(g, "qlearn_policy.csv", count_policy_csv(r.best_policy));
        };
    });

    // bellman-full
    auto* bf = app.add_subcommand("bellman-full", "full-information optimum (and optional policy value)");
    bf->add_option("--policy", policy_path);
    bf->callback([&] {
        action = [&] {
            const auto spec = harness::to_spec(load(g));
            const baselines::FullInfoModel m(spec);
            std::printf("states=%d\n", m.size());
            std::printf("optimum=%.12g\n", baselines::bellman_optimal(m).value);
            if (!policy_path.empty())
                std::printf("policy=%.12g\n", baselines::bellman_evaluate(m, load_policy_any(policy_path, spec)).value);
        };
    });

    // bellman-geom
    auto* bg = app.add_subcommand("bellman-geom", "memoryless count-model optimum");
    bg->add_option("--policy", policy_path);
    bg->callback([&] {
        action = [&] {
            const auto spec = harness::to_spec(load(g));
            const auto r = baselines::geometric_exact(spec);
            std::printf("optimum=%.12g completion_probability=%.10g\n", r.value,
                        baselines::completion_probability(spec.service));
            if (!policy_path.empty())
                std::printf("policy=%.12g\n", baselines::geometric_evaluate(spec, load_policy_any(policy_path, spec)));
            emit(g, "geom_policy.csv", count_policy_csv(r.policy));
        };
    });

    // extract
    auto* ex = app.add_subcommand("extract", "count policy extracted from the full-information optimum");
    ex->add_option("--policy", policy_path, "also compare this policy's Q-bar with the extracted Q");
    ex->callback([&] {
        action = [&] {
            const auto spec = harness::to_spec(load(g));
            const baselines::FullInfoModel m(spec);
            const auto opt = baselines::bellman_optimal(m);
            const CountPolicy cp = baselines::extract_count_policy(m, opt);
            std::printf("optimum=%.12g extracted=%.12g\n", opt.value, baselines::bellman_evaluate(m, cp).value);
            if (!policy_path.empty()) {
                const auto pi = load_policy_any(policy_path, spec);
                const qplex::ArrivalTables arr(spec);
                const auto d = baselines::q_extract_diagnostic(m, pi, qplex::efficient_pass(spec, arr, pi, true).qbar);
                std::printf("qbar cosine=%.10g norm_ratio=%.10g rows=%d\n", d.cosine, d.norm_ratio, d.support);
            }
            emit(g, "extracted_policy.csv", count_policy_csv(cp));
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }
    try {
        action();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const ResourceGuardError& e) {
        std::cerr << "resource guard: " << e.what() << "\n";
        return 3;
    } catch (const UnsupportedModelError& e) {
        std::cerr << "unsupported: " << e.what() << "\n";
        return 1;
    } catch (const InvariantFailure& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "invariant failure: " << e.what() << "\n";
        return 2;
    }
}
