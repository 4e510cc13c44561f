#include "qdp/opt/optimizer.hpp"

#include "qdp/count_policy.hpp"
#include "qdp/csv.hpp"
#include "qdp/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace qdp::opt {

QBarTable qbar(const core::MarginalsTrace& trace, const core::NonlinearModel& model, const core::SigmaTrace& sigmas,
               const PartitionedPolicy& policy) {
    const int T = model.horizon();
    const int A = model.action_count();
    QBarTable qb(T, policy.expert_count(), A);
    for (int t = 0; t < T; ++t) {
        const Pmf& mu = trace.mu[t];
        const core::Matrix Q = core::q_function(model, mu, sigmas.sigma[t + 1], t);
        for (int s = 0; s < model.state_count(); ++s) {
            if (!(mu[s] > 0.0)) continue;
            const int z = policy.expert_of(s);
            qb.reach_at(t, z) += mu[s];
            for (int a = 0; a < A; ++a) qb.at(t, z, a) += mu[s] * Q(s, a);
        }
        for (int z = 0; z < policy.expert_count(); ++z) {
            const double r = qb.reach_at(t, z);
            if (r > 0.0)
                for (int a = 0; a < A; ++a) qb.at(t, z, a) /= r;
        }
    }
    return qb;
}

namespace {

void require_interior(const PartitionedPolicy& p) {
    if (!p.is_interior()) throw DomainError("exponentiated update needs a strictly interior policy");
}

void require_shape(const PartitionedPolicy& p, const QBarTable& qb) {
    if (qb.horizon() != p.horizon() || qb.experts() != p.expert_count() || qb.actions() != p.action_count())
        throw DomainError("Q-bar table does not match policy dimensions");
}

} // namespace

PartitionedPolicy exp_q_update(const PartitionedPolicy& policy, const QBarTable& qb, double eta) {
    if (!(eta > 0.0)) throw DomainError("learning rate must be positive");
    require_interior(policy);
    require_shape(policy, qb);
    PartitionedPolicy out = policy;
    std::vector<double> logits(policy.action_count());
    for (int t = 0; t < policy.horizon(); ++t)
        for (int z = 0; z < policy.expert_count(); ++z) {
            if (!(qb.reach_at(t, z) > 0.0)) continue;
            const auto lr = policy.log_row(t, z);
            double mx = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < policy.action_count(); ++a) mx = std::max(mx, eta * qb.at(t, z, a));
            for (int a = 0; a < policy.action_count(); ++a) logits[a] = lr[a] + (eta * qb.at(t, z, a) - mx);
            out.set_log_row(t, z, logits);
        }
    return out;
}

double stopping_stat(const PartitionedPolicy& policy, const QBarTable& qb) {
    require_shape(policy, qb);
    double total = 0.0;
    for (int t = 0; t < policy.horizon(); ++t)
        for (int z = 0; z < policy.expert_count(); ++z) {
            const double r = qb.reach_at(t, z);
            if (!(r > 0.0)) continue;
            const auto th = policy.row(t, z);
            double mean = 0.0;
            for (int a = 0; a < policy.action_count(); ++a) mean += th[a] * qb.at(t, z, a);
            double var = 0.0;
            for (int a = 0; a < policy.action_count(); ++a) {
                const double d = qb.at(t, z, a) - mean;
                var += th[a] * d * d;
            }
            total += r * var;
        }
    return total;
}

PartitionedPolicy shared_update(const PartitionedPolicy& policy, const QBarTable& qb, double eta) {
    if (!policy.sharing()) throw DomainError("shared update needs a sharing scheme");
    if (!(eta > 0.0)) throw DomainError("learning rate must be positive");
    require_interior(policy);
    require_shape(policy, qb);
    PartitionedPolicy out = policy;
    const int A = policy.action_count();
    std::vector<double> expo(A), logits(A);
    for (const SharingGroup& g : *policy.sharing()) {
        std::fill(expo.begin(), expo.end(), 0.0);
        for (int t : g.times)
            for (int z : g.experts)
                for (int a = 0; a < A; ++a) expo[a] += qb.at(t, z, a);
        const double mx = eta * *std::max_element(expo.begin(), expo.end());
        const auto lr = policy.log_row(g.times[0], g.experts[0]);
        for (int a = 0; a < A; ++a) logits[a] = lr[a] + (eta * expo[a] - mx);
        for (int t : g.times)
            for (int z : g.experts) out.set_log_row(t, z, logits);
    }
    return out;
}

ExpertActionTable approx_natural_gradient(const QBarTable& qb) {
    ExpertActionTable out = qb.q;
    const int A = qb.actions();
    for (int t = 0; t < qb.horizon(); ++t)
        for (int z = 0; z < qb.experts(); ++z) {
            double m = 0.0;
            for (int a = 0; a < A; ++a) m += qb.at(t, z, a);
            m /= A;
            for (int a = 0; a < A; ++a) out.at(t, z, a) = qb.at(t, z, a) - m;
        }
    return out;
}

PartitionedPolicy to_pure_policy(const PartitionedPolicy& policy) {
    PartitionedPolicy out = policy;
    for (int t = 0; t < policy.horizon(); ++t)
        for (int z = 0; z < policy.expert_count(); ++z) {
            const auto lr = policy.log_row(t, z);
            int best = 0;
            for (int a = 1; a < policy.action_count(); ++a)
                if (lr[a] > lr[best]) best = a;
            out.set_point_mass(t, z, best);
        }
    return out;
}

std::vector<Violation> local_opt_check(const PartitionedPolicy& policy, const QBarTable& qb, double tol) {
    require_shape(policy, qb);
    std::vector<Violation> out;
    for (int t = 0; t < policy.horizon(); ++t)
        for (int z = 0; z < policy.expert_count(); ++z) {
            const double r = qb.reach_at(t, z);
            if (!(r > 0.0)) continue;
            double mx = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < policy.action_count(); ++a) mx = std::max(mx, qb.at(t, z, a));
            for (int a = 0; a < policy.action_count(); ++a) {
                const double p = policy.prob(t, z, a);
                const double gap = mx - qb.at(t, z, a);
                if (p > 0.0 && gap > tol && r * p * gap > tol) out.push_back({t, z, a, p, gap, r});
            }
        }
    return out;
}

Evaluation GenericEvaluator::evaluate(const PartitionedPolicy& policy, bool with_qbar) const {
    const core::MarginalsTrace tr = core::forward_marginals(model_, policy, mu0_);
    Evaluation ev;
    ev.value = core::expected_total_reward(model_, policy, tr);
    if (with_qbar) ev.qbar = qbar(tr, model_, core::backward_sigma(model_, policy, tr), policy);
    return ev;
}

PartitionedPolicy GenericEvaluator::initial_policy() const {
    return PartitionedPolicy(model_.horizon(), assignment_, experts_, model_.action_count());
}

TrainTrace train(const Evaluator& evaluator, PartitionedPolicy init, const TrainOptions& opt,
                 const std::function<void(const EpisodeRecord&)>& on_episode) {
    if (!(opt.epsilon > 0.0)) throw DomainError("stopping tolerance must be positive");
    if (!(opt.eta > 0.0)) throw DomainError("learning rate must be positive");
    require_interior(init);
    const bool shared = init.sharing().has_value();
    auto update = [&](const PartitionedPolicy& p, const QBarTable& qb, double eta) {
        return shared ? shared_update(p, qb, eta) : exp_q_update(p, qb, eta);
    };

    // A recursion that blows up is reported through the episode record, not the exception.
    auto evaluate = [&](const PartitionedPolicy& p) {
        try {
            return evaluator.evaluate(p, true);
        } catch (const NumericalError&) {
            Evaluation bad;
            bad.value.total = std::numeric_limits<double>::quiet_NaN();
            return bad;
        }
    };

    TrainTrace trace;
    PartitionedPolicy policy = std::move(init);
    Evaluation cur = evaluate(policy);
    for (int ep = 1;; ++ep) {
        EpisodeRecord rec;
        rec.episode = ep;
        rec.value = cur.value;
        if (!std::isfinite(cur.value.total)) {
            rec.accepted = false;
            trace.episodes.push_back(rec);
            if (on_episode) on_episode(rec);
            throw NumericalError("non-finite objective at episode " + std::to_string(ep));
        }
        rec.stopping_stat = stopping_stat(policy, *cur.qbar);
        if (opt.snapshot_every > 0 && ep % opt.snapshot_every == 0) trace.snapshots.emplace_back(ep, policy);
        if (rec.stopping_stat < opt.epsilon) {
            trace.converged = true;
            trace.episodes.push_back(rec);
            if (on_episode) on_episode(rec);
            break;
        }
        if (ep >= opt.max_episodes) {
            trace.episodes.push_back(rec);
            if (on_episode) on_episode(rec);
            break;
        }

        if (!opt.adaptive) {
            rec.eta_effective = opt.eta;
            policy = update(policy, *cur.qbar, opt.eta);
            cur = evaluate(policy);
        } else {
            double eta = opt.eta;
            std::optional<std::pair<PartitionedPolicy, Evaluation>> best;
            double best_eta = eta;
            bool accepted = false;
            for (int h = 0; h <= opt.max_halvings; ++h, eta *= 0.5) {
                PartitionedPolicy cand = update(policy, *cur.qbar, eta);
                Evaluation ev = evaluate(cand);
                if (!std::isfinite(ev.value.total)) continue;
                if (ev.value.total > cur.value.total) {
                    rec.eta_effective = eta;
                    policy = std::move(cand);
                    cur = std::move(ev);
                    accepted = true;
                    break;
                }
                if (!best || ev.value.total > best->second.value.total) {
                    best.emplace(std::move(cand), std::move(ev));
                    best_eta = eta;
                }
            }
            if (!accepted && !best) {
                rec.accepted = false;
                trace.episodes.push_back(rec);
                if (on_episode) on_episode(rec);
                throw NumericalError("every step size gave a non-finite objective at episode " + std::to_string(ep));
            }
            if (!accepted) {
                rec.accepted = false;
                rec.eta_effective = best_eta;
                policy = std::move(best->first);
                cur = std::move(best->second);
            }
        }
        trace.episodes.push_back(rec);
        if (on_episode) on_episode(rec);
    }
    trace.final_value = cur.value;
    trace.final_stat = trace.episodes.back().stopping_stat;
    trace.final_policy = std::move(policy);
    return trace;
}

std::string policy_to_json(const PartitionedPolicy& policy) {
    using nlohmann::json;
    json j;
    j["format"] = "qdp-policy";
    j["version"] = 1;
    j["horizon"] = policy.horizon();
    j["experts"] = policy.expert_count();
    j["actions"] = policy.action_count();
    j["assignment"] = policy.assignment();
    json rows = json::array();
    for (int t = 0; t < policy.horizon(); ++t)
        for (int z = 0; z < policy.expert_count(); ++z) {
            json lp = json::array();
            for (double v : policy.log_row(t, z)) lp.push_back(std::isfinite(v) ? json(v) : json(nullptr));
            auto r = policy.row(t, z);
            rows.push_back({{"t", t}, {"z", z}, {"p", std::vector<double>(r.begin(), r.end())}, {"logp", lp}});
        }
    j["rows"] = rows;
    if (policy.sharing()) {
        json g = json::array();
        for (const auto& grp : *policy.sharing()) g.push_back({{"experts", grp.experts}, {"times", grp.times}});
        j["sharing"] = g;
    }
    return j.dump(1);
}

PartitionedPolicy policy_from_json(const std::string& text) {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("policy file is not valid JSON: ") + e.what());
    }
    if (j.value("format", "") != "qdp-policy") throw ConfigError("not a policy file", {"format"});
    try {
        PartitionedPolicy p(j.at("horizon").get<int>(), j.at("assignment").get<std::vector<int>>(),
                            j.at("experts").get<int>(), j.at("actions").get<int>());
        for (const json& r : j.at("rows")) {
            const int t = r.at("t"), z = r.at("z");
            if (r.contains("logp")) {
                std::vector<double> lp;
                for (const json& v : r.at("logp"))
                    lp.push_back(v.is_null() ? -std::numeric_limits<double>::infinity() : v.get<double>());
                if (r.contains("p")) p.restore_row(t, z, r.at("p").get<std::vector<double>>(), lp);
                else p.set_log_row(t, z, lp);
            } else {
                p.set_row(t, z, Pmf(r.at("p").get<std::vector<double>>()));
            }
        }
        if (j.contains("sharing")) {
            std::vector<SharingGroup> groups;
            for (const json& g : j.at("sharing"))
                groups.push_back({g.at("experts").get<std::vector<int>>(), g.at("times").get<std::vector<int>>()});
            p.set_sharing(std::move(groups));
        }
        return p;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed policy file: ") + e.what());
    }
}

void save_policy(const PartitionedPolicy& policy, const std::string& path) {
    write_text_file(path, policy_to_json(policy));
}

PartitionedPolicy load_policy(const std::string& path) { return policy_from_json(read_text_file(path)); }

std::string pure_policy_csv(const PartitionedPolicy& policy) {
    return count_policy_csv(CountPolicy::from_policy(policy));
}

std::string trace_csv(const TrainTrace& trace) {
    CsvTable tab;
    tab.header = {"episode", "J", "revenue", "penalty", "stopping_stat", "eta_effective", "accepted"};
    for (const auto& r : trace.episodes)
        tab.add_row({std::to_string(r.episode), fmt_double(r.value.total),
                     fmt_double(r.value.revenue.value_or(r.value.running)), fmt_double(r.value.penalty),
                     fmt_double(r.stopping_stat), fmt_double(r.eta_effective), r.accepted ? "1" : "0"});
    return to_csv(tab);
}

} // namespace qdp::opt
