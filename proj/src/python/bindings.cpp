// Python bindings. Configs cross the boundary as JSON text; the Python package
// wraps these functions with dict/path handling.

#include "qdp/baselines/fullinfo.hpp"
#include "qdp/baselines/geometric.hpp"
#include "qdp/errors.hpp"
#include "qdp/harness/config.hpp"
#include "qdp/harness/design.hpp"
#include "qdp/harness/gradcheck.hpp"
#include "qdp/opt/optimizer.hpp"
#include "qdp/qplex/pricing.hpp"
#include "qdp/sim/simulator.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>

namespace py = pybind11;
using namespace qdp;

namespace {

using Rows = std::vector<std::vector<int>>;

Rows to_rows(const CountPolicy& p) {
    Rows r(p.horizon, std::vector<int>(p.counters));
    for (int t = 0; t < p.horizon; ++t)
        for (int z = 0; z < p.counters; ++z) r[t][z] = p.at(t, z);
    return r;
}

CountPolicy from_rows(const Rows& rows, const qplex::PricingSpec& spec) {
    if (int(rows.size()) != spec.T) throw ConfigError("policy has " + std::to_string(rows.size()) + " rows, expected T");
    CountPolicy p(spec.T, spec.counters());
    for (int t = 0; t < spec.T; ++t) {
        if (int(rows[t].size()) != spec.counters()) throw ConfigError("policy row has the wrong number of counters");
        for (int z = 0; z < spec.counters(); ++z) {
            const int a = rows[t][z];
            if (a < 0 || a >= spec.actions()) throw ConfigError("action index out of range");
            p.at(t, z) = a;
        }
    }
    return p;
}

py::dict decomposition(const core::RewardDecomposition& v) {
    py::dict d;
    d["total"] = v.total;
    d["running"] = v.running;
    d["terminal"] = v.terminal;
    d["penalty"] = v.penalty;
    d["revenue"] = v.revenue ? py::cast(*v.revenue) : py::none();
    d["waiting"] = v.waiting ? py::cast(*v.waiting) : py::none();
    return d;
}

py::object maybe(double v) { return std::isnan(v) ? py::none() : py::cast(v); }

harness::RunConfig config(const std::string& text) { return harness::parse_config_text(text); }

py::dict train(const std::string& text) {
    const auto c = config(text);
    const auto spec = harness::to_spec(c);
    const qplex::PricingEvaluator ev(spec);
    opt::TrainTrace tr;
    {
        py::gil_scoped_release nogil;
        tr = opt::train(ev, harness::initial_policy(c, spec), c.train);
    }
    const auto pure = opt::to_pure_policy(tr.final_policy);
    py::list J, stat;
    for (const auto& e : tr.episodes) {
        J.append(e.value.total);
        stat.append(e.stopping_stat);
    }
    py::dict d;
    d["value"] = decomposition(tr.final_value);
    d["pure_value"] = decomposition(ev.evaluate(pure, false).value);
    d["episodes"] = tr.episodes.size();
    d["converged"] = tr.converged;
    d["stopping_stat"] = tr.final_stat;
    d["trace_J"] = J;
    d["trace_stat"] = stat;
    d["pure_policy"] = to_rows(CountPolicy::from_policy(pure));
    d["policy_json"] = opt::policy_to_json(tr.final_policy);
    d["hash"] = harness::config_hash(c);
    return d;
}

py::dict evaluate(const std::string& text, const Rows& rows) {
    const auto c = config(text);
    const auto spec = harness::to_spec(c);
    const qplex::PricingEvaluator ev(spec);
    const auto pol = from_rows(rows, spec).to_policy(qplex::counter_assignment(spec), spec.actions());
    const auto pass = qplex::efficient_pass(spec, ev.arrivals(), pol, false);
    py::dict d = decomposition(pass.value);
    d["buffer_probabilities"] = qplex::buffer_probabilities(spec, pass.trace);
    return d;
}

py::dict simulate(const std::string& text, const Rows& rows, long reps, std::uint64_t seed, int threads) {
    const auto c = config(text);
    const auto spec = harness::to_spec(c);
    const auto pol = from_rows(rows, spec);
    sim::SimResult r;
    {
        py::gil_scoped_release nogil;
        r = sim::simulate_policy(spec, pol, reps, seed, threads);
    }
    py::dict d;
    d["reps"] = r.reps;
    d["mean"] = r.mean;
    d["revenue"] = r.revenue;
    d["waiting"] = r.waiting;
    d["terminal"] = r.terminal;
    d["std_error"] = r.std_error;
    d["ci_halfwidth"] = r.ci_halfwidth;
    d["p_hat"] = r.p_hat;
    return d;
}

py::dict bellman_full(const std::string& text, std::optional<Rows> rows) {
    const auto c = config(text);
    const auto spec = harness::to_spec(c);
    const baselines::FullInfoModel m(spec);
    const auto opt = baselines::bellman_optimal(m);
    py::dict d;
    d["states"] = m.size();
    d["optimum"] = opt.value;
    d["extracted"] = baselines::bellman_evaluate(m, baselines::extract_count_policy(m, opt)).value;
    if (rows) d["policy_value"] = baselines::bellman_evaluate(m, from_rows(*rows, spec)).value;
    return d;
}

py::dict bellman_geom(const std::string& text, std::optional<Rows> rows) {
    const auto c = config(text);
    const auto spec = harness::to_spec(c);
    const auto r = baselines::geometric_exact(spec);
    py::dict d;
    d["optimum"] = r.value;
    d["policy"] = to_rows(r.policy);
    if (rows) d["policy_value"] = baselines::geometric_evaluate(spec, from_rows(*rows, spec));
    return d;
}

py::list gradcheck(int trials, std::uint64_t seed, std::optional<std::string> text) {
    harness::GradcheckOptions o;
    o.trials = trials;
    o.seed = seed;
    if (text) o.pricing = config(*text);
    std::vector<harness::CheckResult> res;
    {
        py::gil_scoped_release nogil;
        res = harness::run_gradcheck(o);
    }
    py::list out;
    for (const auto& r : res) {
        py::dict d;
        d["name"] = r.name;
        d["cases"] = r.cases;
        d["max_error"] = r.max_error;
        d["tolerance"] = r.tolerance;
        d["worst"] = r.worst;
        d["passed"] = r.pass();
        out.append(d);
    }
    return out;
}

py::list run_design(const std::string& text, int parallel, const std::string& out_dir) {
    const auto d = harness::parse_design(nlohmann::json::parse(text));
    harness::DesignResult res;
    {
        py::gil_scoped_release nogil;
        res = harness::run_design(d, parallel, out_dir);
    }
    py::list out;
    for (const auto& c : res.cells) {
        const auto& s = c.summary;
        py::dict row;
        row["cell"] = s.cell;
        row["hash"] = s.hash;
        row["levels"] = s.levels;
        row["v_train_qplex"] = maybe(s.v_train_qplex);
        row["v_qdp_qplex"] = maybe(s.v_qdp_qplex);
        row["v_qdp_exact"] = maybe(s.v_qdp_exact);
        row["v_mdp_exact"] = maybe(s.v_mdp_exact);
        row["v_extract_exact"] = maybe(s.v_extract_exact);
        row["v_geom_opt"] = maybe(s.v_geom_opt);
        row["v_qdp_geom"] = maybe(s.v_qdp_geom);
        row["v_qdp_sim"] = maybe(s.v_qdp_sim);
        row["gap_qplex"] = maybe(s.gap_qplex());
        row["gap_mdp"] = maybe(s.gap_mdp());
        row["gap_extract"] = maybe(s.gap_extract());
        row["gap_geom"] = maybe(s.gap_geom());
        py::list statuses;
        for (const auto& r : c.records) statuses.append(py::make_tuple(harness::method_name(r.method), r.quantity, r.status));
        row["records"] = statuses;
        out.append(row);
    }
    return out;
}

} // namespace

PYBIND11_MODULE(_qdp, m) {
    m.doc() = "Queue pricing policy optimization core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ResourceGuardError>(m, "ResourceGuardError", PyExc_MemoryError);
    py::register_exception<UnsupportedModelError>(m, "UnsupportedModelError", PyExc_NotImplementedError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("resolve_config", [](const std::string& text) { return harness::resolved_json(config(text)).dump(); },
          "Canonical JSON text of a config with every default filled in.");
    m.def("config_hash", [](const std::string& text) { return harness::config_hash(config(text)); });
    m.def("train", &train, py::arg("config"));
    m.def("evaluate", &evaluate, py::arg("config"), py::arg("policy"));
    m.def("simulate", &simulate, py::arg("config"), py::arg("policy"), py::arg("reps") = 100000,
          py::arg("seed") = 1, py::arg("threads") = 0);
    m.def("bellman_full", &bellman_full, py::arg("config"), py::arg("policy") = py::none());
    m.def("bellman_geom", &bellman_geom, py::arg("config"), py::arg("policy") = py::none());
    m.def("gradcheck", &gradcheck, py::arg("trials") = 50, py::arg("seed") = 1, py::arg("config") = py::none());
    m.def("run_design", &run_design, py::arg("design"), py::arg("parallel") = 1, py::arg("out_dir") = "");
    m.def(
        "old_label_pmf",
        [](const std::vector<double>& service, const std::vector<double>& xi) {
            qplex::InstanceParams p;
            p.n = 1;
            p.b = 0;
            p.T = 1;
            p.service = Pmf(service);
            const auto s = qplex::build_spec(p);
            const Pmf out = qplex::label_pmf(s, Pmf(xi), qplex::Old);
            return std::vector<double>(out.begin(), out.end());
        },
        py::arg("service"), py::arg("xi"), "Remaining-duration pmf of a continuing customer.");
}
