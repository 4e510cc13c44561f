#include "qdp/harness/config.hpp"

#include "qdp/baselines/geometric.hpp"
#include "qdp/csv.hpp"
#include "qdp/errors.hpp"

#include <cstdio>
#include <set>

namespace qdp::harness {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering offending keys so the error lists all of them.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string prefix, std::vector<std::string>& bad)
        : j_(j), prefix_(std::move(prefix)), bad_(bad) {
        if (!j_.is_object()) bad_.push_back(prefix_.empty() ? "<root>" : prefix_.substr(0, prefix_.size() - 1));
    }

    const json* get(const std::string& key) {
        seen_.insert(key);
        if (!j_.is_object()) return nullptr;
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    template <class T, class Check>
    void read(const std::string& key, T& out, Check ok) {
        const json* v = get(key);
        if (!v) return;
        try {
            T tmp = v->get<T>();
            if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>)
                if (!v->is_number_integer()) throw std::invalid_argument("not an integer");
            if (!ok(tmp)) throw std::invalid_argument("out of range");
            out = tmp;
        } catch (const std::exception&) {
            bad_.push_back(prefix_ + key);
        }
    }
    template <class T>
    void read(const std::string& key, T& out) {
        read(key, out, [](const T&) { return true; });
    }

    void mark_bad(const std::string& key) { bad_.push_back(prefix_ + key); }
    std::string path(const std::string& key) const { return prefix_ + key + "."; }

    void finish() {
        if (!j_.is_object()) return;
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) bad_.push_back(prefix_ + it.key());
    }

private:
    const json& j_;
    std::string prefix_;
    std::vector<std::string>& bad_;
    std::set<std::string> seen_;
};

std::vector<std::pair<int, int>> read_blocks(const json& v) {
    std::vector<std::pair<int, int>> out;
    for (const json& b : v) {
        if (!b.is_array() || b.size() != 2) throw std::invalid_argument("block");
        out.emplace_back(b[0].get<int>(), b[1].get<int>());
    }
    return out;
}

json blocks_json(const std::vector<std::pair<int, int>>& blocks) {
    json a = json::array();
    for (auto [lo, hi] : blocks) a.push_back({lo, hi});
    return a;
}

} // namespace

RunConfig parse_config(const json& j) {
    std::vector<std::string> bad;
    RunConfig c;
    qplex::InstanceParams& p = c.instance;
    p.shape.clear();
    ObjectReader r(j, "", bad);

    int version = -1;
    r.read("schema_version", version);
    if (version != schema_version) bad.push_back("schema_version");

    auto positive = [](int v) { return v >= 1; };
    auto nonneg = [](double v) { return v >= 0.0; };
    r.read("n", p.n, positive);
    r.read("b", p.b, [](int v) { return v >= 0; });
    r.read("T", p.T, positive);
    r.read("prices", p.prices, [](const std::vector<double>& v) { return !v.empty(); });
    r.read("u_avg_max", p.u_avg_max, nonneg);
    r.read("c_W", p.c_W, nonneg);
    r.read("c_T", p.c_T, nonneg);
    r.read("seed", c.seed);

    c.service_label = "Uni";
    p.service = qplex::named_service_pmf("Uni");
    if (const json* s = r.get("service_pmf")) {
        c.service_source = *s;
        try {
            if (s->is_string()) {
                c.service_label = s->get<std::string>();
                p.service = qplex::named_service_pmf(c.service_label);
            } else if (s->is_array()) {
                c.service_label = "custom";
                p.service = Pmf(s->get<std::vector<double>>());
            } else if (s->is_object()) {
                std::vector<std::string> inner;
                ObjectReader g(*s, "service_pmf.", inner);
                double mean = 0.0, tail = 1e-6;
                g.read("geometric_mean", mean, [](double v) { return v > 1.0; });
                g.read("tail", tail, [](double v) { return v > 0.0 && v < 1.0; });
                g.finish();
                if (mean == 0.0) inner.push_back("service_pmf.geometric_mean");
                if (!inner.empty()) {
                    bad.insert(bad.end(), inner.begin(), inner.end());
                } else {
                    char buf[64];
                    std::snprintf(buf, sizeof buf, "Geo(%g)", mean);
                    c.service_label = buf;
                    p.service = baselines::fit_truncated_geometric(mean, tail).pmf;
                }
            } else {
                throw std::invalid_argument("service");
            }
        } catch (const std::exception&) {
            r.mark_bad("service_pmf");
        }
    }

    c.shape_label = "CON";
    if (const json* s = r.get("shape")) {
        c.shape_source = *s;
        try {
            if (s->is_string()) {
                c.shape_label = s->get<std::string>();
                p.shape = qplex::named_shape(c.shape_label, p.T);
            } else {
                c.shape_label = "custom";
                p.shape = s->get<std::vector<double>>();
                qplex::normalize_shape(p.shape);
                if (int(p.shape.size()) != p.T) throw std::invalid_argument("shape length");
            }
        } catch (const std::exception&) {
            r.mark_bad("shape");
        }
    }
    if (p.shape.empty()) p.shape = qplex::named_shape("CON", p.T);

    if (const json* pen = r.get("penalty")) {
        ObjectReader q(*pen, "penalty.", bad);
        q.read("C", p.penalty.C, nonneg);
        q.read("k", p.penalty.k, [](double v) { return v >= 1.0; });
        q.read("alpha", p.penalty.alpha, [](double v) { return v >= 0.0 && v <= 1.0; });
        q.read("zhat", p.penalty.zhat, [](int v) { return v >= -1; });
        q.read("charge_initial", p.penalty.charge_initial);
        q.finish();
    }

    if (const json* t = r.get("train")) {
        ObjectReader q(*t, "train.", bad);
        q.read("eta", c.train.eta, [](double v) { return v > 0.0; });
        q.read("epsilon", c.train.epsilon, nonneg);
        q.read("max_episodes", c.train.max_episodes, positive);
        q.read("adaptive", c.train.adaptive);
        if (const json* s = q.get("sharing")) {
            try {
                if (s->is_string() && *s == "none") c.sharing.kind = SharingSpec::None;
                else if (s->is_string() && *s == "time") c.sharing.kind = SharingSpec::TimeHomogeneous;
                else if (s->is_array()) {
                    c.sharing.kind = SharingSpec::Blocks;
                    c.sharing.blocks = read_blocks(*s);
                } else throw std::invalid_argument("sharing");
            } catch (const std::exception&) {
                q.mark_bad("sharing");
            }
        }
        q.finish();
    }

    if (const json* s = r.get("simulate")) {
        ObjectReader q(*s, "simulate.", bad);
        q.read("reps", c.simulate.reps, [](long v) { return v >= 1; });
        q.finish();
    }

    if (const json* s = r.get("qlearn")) {
        ObjectReader q(*s, "qlearn.", bad);
        q.read("rates", c.qlearn.rates, [](const std::vector<double>& v) { return !v.empty(); });
        q.read("episodes", c.qlearn.episodes, [](long v) { return v >= 1; });
        q.read("eval_every", c.qlearn.eval_every, [](long v) { return v >= 1; });
        q.read("eval_reps", c.qlearn.eval_reps, [](long v) { return v >= 1; });
        q.read("epsilon", c.qlearn.epsilon, [](double v) { return v >= 0.0 && v <= 1.0; });
        q.finish();
    }

    if (const json* s = r.get("exhaustive")) {
        ObjectReader q(*s, "exhaustive.", bad);
        if (const json* b = q.get("blocks")) {
            try {
                c.exhaustive.blocks = read_blocks(*b);
            } catch (const std::exception&) {
                q.mark_bad("blocks");
            }
        }
        q.read("price_indices", c.exhaustive.price_indices);
        q.read("reps", c.exhaustive.reps, [](long v) { return v >= 1; });
        q.read("top_k", c.exhaustive.top_k, [](int v) { return v >= 0; });
        q.read("rerun_reps", c.exhaustive.rerun_reps, [](long v) { return v >= 0; });
        q.finish();
    }
    r.finish();

    if (!bad.empty()) {
        std::string msg = "invalid config keys:";
        for (const auto& k : bad) msg += " " + k;
        throw ConfigError(msg, bad);
    }
    c.qlearn.seed = c.seed;
    // catches price range and similar cross-field problems
    to_spec(c);
    return c;
}

RunConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what(), {"<document>"});
    }
    return parse_config(j);
}

RunConfig load_config(const std::string& path) { return parse_config_text(read_text_file(path)); }

json resolved_json(const RunConfig& c) {
    const auto& p = c.instance;
    json j;
    j["schema_version"] = schema_version;
    j["n"] = p.n;
    j["b"] = p.b;
    j["T"] = p.T;
    j["prices"] = p.prices;
    j["service_pmf"] = c.service_source;
    j["shape"] = c.shape_source;
    j["u_avg_max"] = p.u_avg_max;
    j["c_W"] = p.c_W;
    j["c_T"] = p.c_T;
    j["seed"] = c.seed;
    j["penalty"] = {{"C", p.penalty.C},
                    {"k", p.penalty.k},
                    {"alpha", p.penalty.alpha},
                    {"zhat", p.penalty.zhat},
                    {"charge_initial", p.penalty.charge_initial}};
    json sharing;
    switch (c.sharing.kind) {
    case SharingSpec::None: sharing = "none"; break;
    case SharingSpec::TimeHomogeneous: sharing = "time"; break;
    case SharingSpec::Blocks: sharing = blocks_json(c.sharing.blocks); break;
    }
    j["train"] = {{"eta", c.train.eta},
                  {"epsilon", c.train.epsilon},
                  {"max_episodes", c.train.max_episodes},
                  {"adaptive", c.train.adaptive},
                  {"sharing", sharing}};
    j["simulate"] = {{"reps", c.simulate.reps}};
    j["qlearn"] = {{"rates", c.qlearn.rates},
                   {"episodes", c.qlearn.episodes},
                   {"eval_every", c.qlearn.eval_every},
                   {"eval_reps", c.qlearn.eval_reps},
                   {"epsilon", c.qlearn.epsilon}};
    j["exhaustive"] = {{"blocks", blocks_json(c.exhaustive.blocks)},
                       {"price_indices", c.exhaustive.price_indices},
                       {"reps", c.exhaustive.reps},
                       {"top_k", c.exhaustive.top_k},
                       {"rerun_reps", c.exhaustive.rerun_reps}};
    return j;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const RunConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(resolved_json(c).dump())));
    return buf;
}

qplex::PricingSpec to_spec(const RunConfig& c) { return qplex::build_spec(c.instance); }

PartitionedPolicy initial_policy(const RunConfig& c, const qplex::PricingSpec& spec) {
    PartitionedPolicy p(spec.T, qplex::counter_assignment(spec), spec.counters(), spec.actions());
    std::vector<SharingGroup> groups;
    std::vector<int> all_t(spec.T);
    for (int t = 0; t < spec.T; ++t) all_t[t] = t;
    switch (c.sharing.kind) {
    case SharingSpec::None: return p;
    case SharingSpec::TimeHomogeneous:
        for (int z = 0; z < spec.counters(); ++z) groups.push_back({{z}, all_t});
        break;
    case SharingSpec::Blocks:
        for (auto [lo, hi] : c.sharing.blocks) {
            SharingGroup g{{}, all_t};
            for (int z = lo; z <= hi; ++z) g.experts.push_back(z);
            if (g.experts.empty()) throw ConfigError("empty sharing block", {"train.sharing"});
            groups.push_back(std::move(g));
        }
        break;
    }
    p.set_sharing(std::move(groups));
    return p;
}

} // namespace qdp::harness
