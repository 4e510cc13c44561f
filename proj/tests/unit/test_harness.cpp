#include "support.hpp"

#include "qdp/errors.hpp"
#include "qdp/harness/config.hpp"
#include "qdp/harness/design.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

using namespace qdp;
using namespace qdp::harness;
using nlohmann::json;

namespace {

json small_config() {
    return json{{"schema_version", 1}, {"n", 2}, {"b", 1}, {"T", 5}, {"service_pmf", {0.3, 0.3, 0.4}},
                {"shape", "DEC"},      {"c_W", 0.1}, {"c_T", 1.0}, {"train", {{"eta", 20.0}, {"max_episodes", 400}}}};
}

std::vector<std::string> bad_keys(const json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        auto k = e.keys;
        std::sort(k.begin(), k.end());
        return k;
    }
    return {};
}

} // namespace

TEST_SUITE("config") {
    TEST_CASE("defaults and named inputs") {
        const RunConfig c = parse_config(json{{"schema_version", 1}, {"n", 3}, {"b", 3}, {"T", 50}});
        CHECK(c.instance.service.size() == 20);
        CHECK(c.service_label == "Uni");
        CHECK(c.shape_label == "CON");
        CHECK(c.instance.prices == qplex::default_prices());
        CHECK(c.sharing.kind == SharingSpec::None);
        const auto spec = to_spec(c);
        CHECK(spec.T == 50);
        CHECK(spec.lambda.size() == 50);

        json g = small_config();
        g["service_pmf"] = {{"geometric_mean", 10.5}};
        const RunConfig geo = parse_config(g);
        double m = 0.0;
        for (std::size_t l = 0; l < geo.instance.service.size(); ++l) m += (l + 1) * geo.instance.service[l];
        test::check_close(m, 10.5, 1e-9);
    }

    TEST_CASE("unknown keys and bad values are all reported") {
        json j = small_config();
        j["bogus"] = 1;
        j["penalty"] = {{"C", 1.0}, {"kk", 2}};
        j["train"]["sharing"] = "sideways";
        j["n"] = -1;
        CHECK(bad_keys(j) == std::vector<std::string>{"bogus", "n", "penalty.kk", "train.sharing"});
        json v = small_config();
        v.erase("schema_version");
        CHECK(bad_keys(v) == std::vector<std::string>{"schema_version"});
        json t = small_config();
        t["T"] = 2.5;
        CHECK(bad_keys(t) == std::vector<std::string>{"T"});
        CHECK_THROWS_AS(parse_config_text("{not json"), ConfigError);
        CHECK(bad_keys(small_config()).empty());
    }

    TEST_CASE("hash is stable and sensitive") {
        const RunConfig c = parse_config(small_config());
        CHECK(config_hash(c) == config_hash(parse_config(small_config())));
        CHECK(config_hash(c).size() == 16);
        CHECK(config_hash(parse_config(resolved_json(c))) == config_hash(c));
        CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
        CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);

        std::vector<std::function<void(json&)>> edits{
            [](json& j) { j["n"] = 3; },
            [](json& j) { j["b"] = 2; },
            [](json& j) { j["T"] = 6; },
            [](json& j) { j["c_W"] = 0.2; },
            [](json& j) { j["c_T"] = 0.5; },
            [](json& j) { j["u_avg_max"] = 4.0; },
            [](json& j) { j["seed"] = 2; },
            [](json& j) { j["shape"] = "INC"; },
            [](json& j) { j["service_pmf"] = {0.2, 0.4, 0.4}; },
            [](json& j) { j["prices"] = {0.1, 0.9}; },
            [](json& j) { j["penalty"] = {{"C", 5.0}}; },
            [](json& j) { j["train"]["eta"] = 21.0; },
            [](json& j) { j["train"]["sharing"] = "time"; },
            [](json& j) { j["simulate"] = {{"reps", 7}}; },
            [](json& j) { j["qlearn"] = {{"episodes", 7}}; },
            [](json& j) { j["exhaustive"] = {{"top_k", 1}}; },
        };
        std::vector<std::string> seen{config_hash(c)};
        for (auto& e : edits) {
            json j = small_config();
            e(j);
            const std::string h = config_hash(parse_config(j));
            CHECK(std::find(seen.begin(), seen.end(), h) == seen.end());
            seen.push_back(h);
        }
    }

    TEST_CASE("sharing schemes") {
        json j = small_config();
        j["train"]["sharing"] = json::array({json::array({0, 1}), json::array({2, 3})});
        const RunConfig c = parse_config(j);
        const auto spec = to_spec(c);
        const auto p = initial_policy(c, spec);
        REQUIRE(p.sharing());
        CHECK(p.sharing()->size() == 2);
        j["train"]["sharing"] = json::array({json::array({0, 1})});
        const RunConfig partial = parse_config(j);
        CHECK_THROWS_AS(initial_policy(partial, spec), ConfigError);
        j["train"]["sharing"] = "time";
        CHECK(initial_policy(parse_config(j), spec).sharing()->size() == std::size_t(spec.counters()));
    }
}

TEST_SUITE("design") {
    TEST_CASE("grid enumeration") {
        const json dj{{"schema_version", 1},
                      {"base", small_config()},
                      {"factors", {{"n", {1, 2}}, {"shape", {"DEC", "INC", "CON"}}}},
                      {"methods", {"qdp"}}};
        const ExperimentDesign d = parse_design(dj);
        CHECK(d.cardinality() == 6);
        CHECK(d.cell_json(0)["n"] == 1);
        CHECK(d.cell_json(0)["shape"] == "DEC");
        CHECK(d.cell_json(1)["shape"] == "INC");
        CHECK(d.cell_json(3)["n"] == 2);
        CHECK(d.cell_levels(5) == std::vector<std::string>{"2", "CON"});

        json v = dj;
        v["variants"] = {json{{"c_W", 0.0}}, json{{"c_W", 0.5}, {"shape", "ALT"}}};
        const ExperimentDesign dv = parse_design(v);
        CHECK(dv.cardinality() == 12);
        CHECK(dv.cell_json(6)["c_W"] == 0.5);
        CHECK(dv.cell_json(6)["shape"] == "ALT"); // variants override factors
        CHECK(dv.cell_json(5)["shape"] == "CON");
        CHECK(dv.cell_levels(7)[0] == R"({"c_W":0.5,"shape":"ALT"})");

        json bad = dj;
        bad["factors"]["nope"] = {1};
        CHECK_THROWS_AS(parse_design(bad), ConfigError);
        bad = dj;
        bad["methods"] = {"dance"};
        CHECK_THROWS_AS(parse_design(bad), ConfigError);
        bad = dj;
        bad["extra"] = 0;
        CHECK_THROWS_AS(parse_design(bad), ConfigError);
    }

    TEST_CASE("one cell, all exact methods, dominance and csv round trip") {
        json base = small_config();
        base["simulate"] = {{"reps", 2000}};
        base["qlearn"] = {{"rates", {0.05}}, {"episodes", 2000}, {"eval_every", 1000}, {"eval_reps", 200}};
        const ExperimentDesign d = parse_design(json{
            {"schema_version", 1},
            {"base", base},
            {"methods", {"qdp", "bellman-full", "extract", "bellman-geom", "simulate", "qlearn"}}});
        CHECK(d.cardinality() == 1);
        const auto dir = std::filesystem::temp_directory_path() / "qdp_design_test";
        std::filesystem::remove_all(dir);
        const DesignResult r = run_design(d, 1, dir.string());
        REQUIRE(r.cells.size() == 1);
        const CellSummary& s = r.cells[0].summary;
        for (const auto& rec : r.cells[0].records) CHECK_MESSAGE(rec.status == "ok", rec.message);
        CHECK(s.dominance());
        CHECK(s.v_mdp_exact >= s.v_qdp_exact - 1e-9);
        CHECK(s.v_mdp_exact >= s.v_extract_exact - 1e-9);
        CHECK(std::abs(s.gap_qplex()) < 0.01);
        CHECK(std::isfinite(s.v_qdp_sim));
        CHECK(std::isfinite(s.v_qlearn));

        const CsvTable rec = parse_csv(read_text_file((dir / "records.csv").string()));
        CHECK(rec == records_table(r.cells[0].records));
        const CsvTable sum = parse_csv(read_text_file((dir / "summary.csv").string()));
        CHECK(sum.rows.size() == 1);
        CHECK(sum == summary_table(d, r));
        CHECK(std::filesystem::exists(dir / "cells" / "000000.csv"));
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("failures are recorded and the grid continues; cells are thread-independent") {
        json base = small_config();
        base["penalty"] = {{"C", 0.0}};
        json dj{{"schema_version", 1},
                {"base", base},
                {"factors", {{"penalty", {json{{"C", 0.0}}, json{{"C", 10.0}}}}, {"c_W", {0.0, 0.2}}}},
                {"methods", {"qdp", "bellman-geom", "bellman-full"}}};
        const ExperimentDesign d = parse_design(dj);
        const DesignResult a = run_design(d, 1);
        const DesignResult b = run_design(d, 3);
        CHECK(summary_table(d, a) == summary_table(d, b));
        int unsupported = 0;
        for (const auto& c : a.cells)
            for (const auto& rec : c.records) unsupported += rec.status == "unsupported";
        CHECK(unsupported == 6); // penalized cells: both geometric records and the full-information optimum
        CHECK(std::isnan(a.cells[3].summary.v_mdp_exact));
        CHECK(std::isfinite(a.cells[3].summary.v_qdp_qplex));

        dj["full_info_guard"] = 2.0;
        const DesignResult g = run_design(parse_design(dj), 2);
        CHECK(g.cells[0].records[2].status == "guard");
    }

    TEST_CASE("histogram svg") {
        const std::string svg = histogram_svg({0.0, 0.1, 0.1, std::nan(""), 0.3}, "gap <mdp>", 3);
        CHECK(svg.find("<svg") == 0);
        CHECK(svg.find("&lt;mdp>") != std::string::npos);
        std::size_t rects = 0;
        for (std::size_t p = 0; (p = svg.find("<rect", p)) != std::string::npos; ++p) ++rects;
        CHECK(rects == 3);
    }
}
