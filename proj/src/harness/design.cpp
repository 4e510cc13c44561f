#include "qdp/harness/design.hpp"

#include "qdp/baselines/fullinfo.hpp"
#include "qdp/baselines/geometric.hpp"
#include "qdp/baselines/qlearn.hpp"
#include "qdp/errors.hpp"
#include "qdp/sim/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <thread>

namespace qdp::harness {

using nlohmann::json;

namespace {

const std::vector<std::pair<Method, const char*>> method_names{
    {Method::Qdp, "qdp"},         {Method::BellmanFull, "bellman-full"}, {Method::BellmanGeom, "bellman-geom"},
    {Method::Extract, "extract"}, {Method::QLearn, "qlearn"},            {Method::Simulate, "simulate"}};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string opt_str(const std::optional<double>& v) { return v ? fmt_double(*v) : ""; }

std::string level_string(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

} // namespace

std::string method_name(Method m) {
    for (auto [k, n] : method_names)
        if (k == m) return n;
    return "?";
}

Method method_from_name(const std::string& name) {
    for (auto [k, n] : method_names)
        if (name == n) return k;
    throw ConfigError("unknown method '" + name + "'", {"methods"});
}

std::size_t ExperimentDesign::cardinality() const {
    std::size_t n = std::max<std::size_t>(1, variants.size());
    for (const auto& f : factors) n *= f.second.size();
    return n;
}

json ExperimentDesign::cell_json(std::size_t i) const {
    json j = base;
    for (auto f = factors.rbegin(); f != factors.rend(); ++f) {
        const std::size_t k = f->second.size();
        j[f->first] = f->second[i % k];
        i /= k;
    }
    if (!variants.empty())
        for (auto it = variants[i].begin(); it != variants[i].end(); ++it) j[it.key()] = *it;
    return j;
}

std::vector<std::string> ExperimentDesign::cell_levels(std::size_t i) const {
    const std::size_t off = variants.empty() ? 0 : 1;
    std::vector<std::string> out(factors.size() + off);
    for (std::size_t f = factors.size(); f-- > 0;) {
        const std::size_t k = factors[f].second.size();
        out[f + off] = level_string(factors[f].second[i % k]);
        i /= k;
    }
    if (off) out[0] = variants[i].dump();
    return out;
}

ExperimentDesign parse_design(const json& j) {
    std::vector<std::string> bad;
    ExperimentDesign d;
    if (!j.is_object()) throw ConfigError("design must be an object", {"<root>"});
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        try {
            if (k == "schema_version") {
                if (it->get<int>() != schema_version) bad.push_back(k);
            } else if (k == "base") {
                if (!it->is_object()) throw std::invalid_argument(k);
                d.base = *it;
            } else if (k == "factors") {
                for (auto f = it->begin(); f != it->end(); ++f) {
                    if (!f->is_array() || f->empty()) {
                        bad.push_back("factors." + f.key());
                        continue;
                    }
                    d.factors.emplace_back(f.key(), f->get<std::vector<json>>());
                }
            } else if (k == "variants") {
                for (const json& v : *it) {
                    if (!v.is_object()) throw std::invalid_argument(k);
                    d.variants.push_back(v);
                }
            } else if (k == "methods") {
                for (const json& m : *it) d.methods.push_back(method_from_name(m.get<std::string>()));
            } else if (k == "full_info_guard") {
                d.full_info_guard = it->get<double>();
            } else {
                bad.push_back(k);
            }
        } catch (const std::exception&) {
            bad.push_back(k);
        }
    }
    if (!j.contains("schema_version")) bad.push_back("schema_version");
    if (d.methods.empty()) bad.push_back("methods");
    if (!bad.empty()) {
        std::string msg = "invalid design keys:";
        for (const auto& k : bad) msg += " " + k;
        throw ConfigError(msg, bad);
    }
    if (!d.base.contains("schema_version")) d.base["schema_version"] = schema_version;
    // every cell must be a valid config before anything runs
    for (std::size_t i = 0; i < d.cardinality(); ++i) parse_config(d.cell_json(i));
    return d;
}

ExperimentDesign load_design(const std::string& path) {
    try {
        return parse_design(json::parse(read_text_file(path)));
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("design is not valid JSON: ") + e.what(), {"<document>"});
    }
}

double CellSummary::gap_qplex() const { return (v_qdp_qplex - v_qdp_exact) / std::abs(v_qdp_exact); }
double CellSummary::gap_mdp() const { return (v_mdp_exact - v_qdp_exact) / std::abs(v_mdp_exact); }
double CellSummary::gap_extract() const { return (v_extract_exact - v_qdp_exact) / std::abs(v_qdp_exact); }
double CellSummary::gap_geom() const { return (v_geom_opt - v_qdp_geom) / std::abs(v_geom_opt); }

bool CellSummary::dominance(double tol) const {
    if (std::isnan(v_mdp_exact)) return true;
    for (double v : {v_qdp_exact, v_extract_exact})
        if (!std::isnan(v) && v > v_mdp_exact + tol) return false;
    return true;
}

CellResult run_cell(const RunConfig& config, const std::vector<Method>& methods, std::size_t cell_id,
                    double full_info_guard, int threads) {
    using clock = std::chrono::steady_clock;
    CellResult out;
    CellSummary& s = out.summary;
    s.cell = cell_id;
    s.hash = config_hash(config);
    const qplex::PricingSpec spec = to_spec(config);
    auto wants = [&](Method m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };

    std::optional<PartitionedPolicy> trained; // pure, from the row modes
    std::optional<baselines::FullInfoModel> full;
    std::optional<baselines::BellmanResult> full_opt;

    auto attempt = [&](Method m, const std::string& quantity, const std::function<void(RunRecord&)>& body) {
        RunRecord r;
        r.cell = cell_id;
        r.hash = s.hash;
        r.method = m;
        r.quantity = quantity;
        r.seed = config.seed;
        const auto t0 = clock::now();
        try {
            body(r);
        } catch (const ResourceGuardError& e) {
            r.status = "guard";
            r.message = e.what();
        } catch (const UnsupportedModelError& e) {
            r.status = "unsupported";
            r.message = e.what();
        } catch (const std::exception& e) {
            r.status = "error";
            r.message = e.what();
        }
        if (r.status != "ok") r.value = nan;
        r.wall_seconds = seconds_since(t0);
        out.records.push_back(std::move(r));
    };
    auto need_trained = [&] {
        if (!trained) throw DomainError("needs the qdp method in the same cell");
        return *trained;
    };
    auto need_full = [&] {
        if (!full_opt) {
            full.emplace(spec, full_info_guard);
            full_opt = baselines::bellman_optimal(*full);
        }
    };
    auto fill_decomposition = [](RunRecord& r, const core::RewardDecomposition& v) {
        r.value = v.total;
        r.revenue = v.revenue;
        r.waiting = v.waiting;
        r.penalty = v.penalty;
        r.terminal = v.terminal;
    };

    if (wants(Method::Qdp)) {
        const qplex::PricingEvaluator ev(spec);
        attempt(Method::Qdp, "train_qplex", [&](RunRecord& r) {
            const auto trace = opt::train(ev, initial_policy(config, spec), config.train);
            trained = CountPolicy::from_policy(trace.final_policy)
                          .to_policy(qplex::counter_assignment(spec), spec.actions());
            fill_decomposition(r, trace.final_value);
            r.episodes = long(trace.episodes.size());
            s.v_train_qplex = r.value;
        });
        if (trained)
            attempt(Method::Qdp, "qplex", [&](RunRecord& r) {
                fill_decomposition(r, ev.evaluate(*trained, false).value);
                s.v_qdp_qplex = r.value;
            });
    }
    if (wants(Method::BellmanFull) || wants(Method::Extract)) {
        attempt(Method::BellmanFull, "optimum", [&](RunRecord& r) {
            need_full();
            r.value = full_opt->value;
            s.v_mdp_exact = r.value;
        });
        if (full_opt && trained)
            attempt(Method::BellmanFull, "qdp_policy", [&](RunRecord& r) {
                r.value = baselines::bellman_evaluate(*full, *trained).value;
                s.v_qdp_exact = r.value;
            });
    }
    if (wants(Method::Extract))
        attempt(Method::Extract, "extracted", [&](RunRecord& r) {
            need_full();
            r.value = baselines::bellman_evaluate(*full, baselines::extract_count_policy(*full, *full_opt)).value;
            s.v_extract_exact = r.value;
        });
    if (wants(Method::BellmanGeom)) {
        attempt(Method::BellmanGeom, "optimum", [&](RunRecord& r) {
            r.value = baselines::geometric_exact(spec).value;
            s.v_geom_opt = r.value;
        });
        if (trained)
            attempt(Method::BellmanGeom, "qdp_policy", [&](RunRecord& r) {
                r.value = baselines::geometric_evaluate(spec, *trained);
                s.v_qdp_geom = r.value;
            });
    }
    if (wants(Method::Simulate))
        attempt(Method::Simulate, "qdp_pure", [&](RunRecord& r) {
            const auto res = sim::simulate_policy(spec, CountPolicy::from_policy(need_trained()), config.simulate.reps,
                                                  config.seed, threads);
            r.value = res.mean;
            r.revenue = res.revenue;
            r.waiting = res.waiting;
            r.terminal = res.terminal;
            r.std_error = res.std_error;
            r.episodes = res.reps;
            s.v_qdp_sim = res.mean;
            s.v_qdp_sim_se = res.std_error;
        });
    if (wants(Method::QLearn))
        attempt(Method::QLearn, "best_greedy", [&](RunRecord& r) {
            auto o = config.qlearn;
            o.threads = threads;
            const auto res = baselines::qlearn_aggregated(spec, o);
            r.value = res.best_value;
            r.std_error = res.best_ci / 3.0;
            r.episodes = res.best_episode;
            s.v_qlearn = res.best_value;
        });
    return out;
}

CsvTable records_table(const std::vector<RunRecord>& records) {
    CsvTable t;
    t.header = {"cell",     "hash",     "method",   "quantity",  "status", "value",    "revenue", "waiting",
                "penalty",  "terminal", "std_error", "episodes", "wall_s", "seed",     "message"};
    for (const auto& r : records)
        t.add_row({std::to_string(r.cell), r.hash, method_name(r.method), r.quantity, r.status, fmt_double(r.value),
                   opt_str(r.revenue), opt_str(r.waiting), opt_str(r.penalty), opt_str(r.terminal),
                   opt_str(r.std_error), std::to_string(r.episodes), fmt_double(r.wall_seconds),
                   std::to_string(r.seed), r.message});
    return t;
}

CsvTable summary_table(const ExperimentDesign& d, const DesignResult& r) {
    CsvTable t;
    t.header = {"cell", "hash"};
    if (!d.variants.empty()) t.header.push_back("variant");
    for (const auto& f : d.factors) t.header.push_back(f.first);
    for (const char* c : {"v_train_qplex", "v_qdp_qplex", "v_qdp_exact", "v_mdp_exact", "v_extract_exact", "v_geom_opt",
                          "v_qdp_geom", "v_qdp_sim", "v_qdp_sim_se", "v_qlearn", "gap_qplex", "gap_mdp",
                          "gap_extract", "gap_geom", "dominance"})
        t.header.push_back(c);
    for (const auto& c : r.cells) {
        const CellSummary& s = c.summary;
        std::vector<std::string> row{std::to_string(s.cell), s.hash};
        for (const auto& l : d.cell_levels(s.cell)) row.push_back(l);
        for (double v : {s.v_train_qplex, s.v_qdp_qplex, s.v_qdp_exact, s.v_mdp_exact, s.v_extract_exact, s.v_geom_opt,
                         s.v_qdp_geom, s.v_qdp_sim, s.v_qdp_sim_se, s.v_qlearn, s.gap_qplex(), s.gap_mdp(),
                         s.gap_extract(), s.gap_geom()})
            row.push_back(fmt_double(v));
        row.push_back(s.dominance() ? "1" : "0");
        t.add_row(std::move(row));
    }
    return t;
}

DesignResult run_design(const ExperimentDesign& d, int parallel, const std::string& out_dir,
                        const std::function<void(const CellResult&)>& on_cell) {
    const std::size_t n = d.cardinality();
    DesignResult res;
    res.cells.resize(n);
    if (!out_dir.empty()) std::filesystem::create_directories(std::filesystem::path(out_dir) / "cells");
    const int workers = std::max(1, std::min<int>(parallel, int(n)));
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            const RunConfig cfg = parse_config(d.cell_json(i));
            CellResult c = run_cell(cfg, d.methods, i, d.full_info_guard, workers > 1 ? 1 : 0);
            c.summary.levels = d.cell_levels(i);
            if (!out_dir.empty()) {
                char name[32];
                std::snprintf(name, sizeof name, "%06zu.csv", i);
                write_text_file((std::filesystem::path(out_dir) / "cells" / name).string(),
                                to_csv(records_table(c.records)));
            }
            std::lock_guard lock(mu);
            res.cells[i] = std::move(c);
            if (on_cell) on_cell(res.cells[i]);
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();

    if (!out_dir.empty()) {
        std::vector<RunRecord> all;
        for (const auto& c : res.cells) all.insert(all.end(), c.records.begin(), c.records.end());
        write_text_file((std::filesystem::path(out_dir) / "records.csv").string(), to_csv(records_table(all)));
        write_text_file((std::filesystem::path(out_dir) / "summary.csv").string(), to_csv(summary_table(d, res)));
    }
    return res;
}

std::string histogram_svg(const std::vector<double>& values, const std::string& title, int bins) {
    std::vector<double> v;
    for (double x : values)
        if (std::isfinite(x)) v.push_back(x);
    const double W = 480, H = 300, pad = 40;
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"300\">\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">", pad);
    svg += buf;
    for (char ch : title) {
        if (ch == '<') svg += "&lt;";
        else if (ch == '&') svg += "&amp;";
        else svg += ch;
    }
    svg += "</text>\n";
    if (!v.empty() && bins > 0) {
        const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
        const double lo = *lo_it, hi = *hi_it, width = hi > lo ? (hi - lo) / bins : 1.0;
        std::vector<int> count(bins, 0);
        for (double x : v) ++count[std::min(bins - 1, int((x - lo) / width))];
        const int top = *std::max_element(count.begin(), count.end());
        const double bw = (W - 2 * pad) / bins;
        for (int k = 0; k < bins; ++k) {
            const double h = (H - 2 * pad) * count[k] / top;
            std::snprintf(buf, sizeof buf,
                          "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"#4878a8\"/>\n",
                          pad + k * bw, H - pad - h, bw * 0.95, h);
            svg += buf;
        }
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%g\" y=\"%g\" font-size=\"11\">%.4g</text>\n"
                      "<text x=\"%g\" y=\"%g\" font-size=\"11\" text-anchor=\"end\">%.4g</text>\n",
                      pad, H - pad + 15, lo, W - pad, H - pad + 15, lo + width * bins);
        svg += buf;
    }
    svg += "</svg>\n";
    return svg;
}

} // namespace qdp::harness
