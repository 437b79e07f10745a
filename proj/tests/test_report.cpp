#include <doctest.h>

#include <cmath>

#include "qkd/report.hpp"

using namespace qkd;

namespace {

const char* kConfigJson = R"({
  "channel": {"length_km": 100, "p_afterpulse": 0.04, "p_darkcount": 6e-7, "e_misalign": 5e-3},
  "security": {"kappa": 1e-15, "eps_cor": 1e-15},
  "protocol": {"mus": [0.5, 0.1, 1e-6], "p_mu": [0.34, 0.33, 0.33], "p_x": 0.9, "s_x": 1e7},
  "methods": ["M1", "M2", "M3", "M4"],
  "seed": 7,
  "budget": 1000,
  "table": {"k": [3, 4], "s_x": [1e7, 1e8]},
  "output": {"format": "csv"}
})";

}  // namespace

TEST_CASE("config parsing") {
    const auto cfg = parse_config_json(kConfigJson);
    CHECK(cfg.channel.length_km == 100.0);
    CHECK(cfg.security.kappa == 1e-15);
    REQUIRE(cfg.protocol.has_value());
    CHECK(cfg.protocol->raw_key_length == 1e7);
    CHECK(cfg.methods.size() == 4);
    CHECK(cfg.seed == 7);
    CHECK(cfg.table_k == std::vector<int>{3, 4});

    CHECK_THROWS_AS(parse_config_json("{ not json"), ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"methods": ["M9"]})"), ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"methods": []})"), ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"output": {"format": "xml"}})"), ConfigError);
}

TEST_CASE("rate result serialization round-trips") {
    const auto cfg = parse_config_json(kConfigJson);
    const auto& params = *cfg.protocol;
    const auto stats = observe(cfg.channel, params);
    const auto result = evaluate_methods(params, stats, cfg.methods, cfg.security);

    const auto text = rate_result_json(cfg, params, result);
    // all four per-method blocks present
    for (const char* name : {"\"M1\"", "\"M2\"", "\"M3\"", "\"M4\""}) {
        CHECK(text.find(name) != std::string::npos);
    }
    const auto parsed = parse_rate_result_json(text);
    REQUIRE(parsed.per_method.size() == result.per_method.size());
    CHECK(parsed.best_rate == result.best_rate);
    CHECK(parsed.best_method == result.best_method);
    for (std::size_t i = 0; i < parsed.per_method.size(); ++i) {
        const auto& a = parsed.per_method[i];
        const auto& b = result.per_method[i];
        CHECK(a.method == b.method);
        CHECK(a.rate == b.rate);
        CHECK(a.rate_raw == b.rate_raw);
        CHECK(a.bound.e_z1_upper == b.bound.e_z1_upper);
        CHECK(a.bound.diagnostics.delta_y1 == b.bound.diagnostics.delta_y1);
        CHECK(a.bound.diagnostics.delta_e1 == b.bound.diagnostics.delta_e1);
        CHECK(a.e_p == b.e_p);
        CHECK(a.eps_sec == b.eps_sec);
        CHECK(a.ell_final == b.ell_final);
        CHECK(a.iterations == b.iterations);
        CHECK(a.feasible == b.feasible);
    }
}

TEST_CASE("table runs") {
    auto cfg = parse_config_json(kConfigJson);
    cfg.budget = 800;

    SUBCASE("grid emits one row per cell in deterministic order") {
        const auto rows = run_table(cfg);
        REQUIRE(rows.size() == 16);  // 2 k x 2 s_x x 4 methods
        CHECK(rows[0].k == 3);
        CHECK(rows[0].s_x == 1e7);
        CHECK(rows[0].method == Method::M1);
        CHECK(rows[7].s_x == 1e8);
        CHECK(rows[7].method == Method::M4);
        CHECK(rows[8].k == 4);
        CHECK(rows[15].k == 4);
        CHECK(rows[15].method == Method::M4);
        const auto csv = table_csv(rows);
        CHECK(csv.rfind("k,s_x,method,rate,rate_1e5,e_z1,e_p,feasible,p_x,mus,p_mu\n", 0) == 0);
        const auto series = series_csv(rows, Method::M2);
        CHECK(series.rfind("s_x,rate\n" + format_g6(1e7) + "," + format_g6(rows[1].rate) + "\n" +
                               format_g6(1e8) + "," + format_g6(rows[5].rate) + "\n",
                           0) == 0);
    }
    SUBCASE("single cell gives a single row") {
        cfg.table_k = {3};
        cfg.table_s_x = {1e7};
        cfg.methods = {Method::M2};
        CHECK(run_table(cfg).size() == 1);
    }
    SUBCASE("identical seeds give byte-identical CSV") {
        const auto a = table_csv(run_table(cfg));
        const auto b = table_csv(run_table(cfg));
        CHECK(a == b);
    }
    SUBCASE("output does not depend on the worker count") {
        auto serial = cfg;
        serial.threads = 1;
        serial.budget = 400;
        auto parallel = cfg;
        parallel.threads = 4;
        parallel.budget = 400;
        CHECK(table_csv(run_table(serial)) == table_csv(run_table(parallel)));
    }
    SUBCASE("empty grids are configuration errors") {
        auto bad = cfg;
        bad.table_s_x.clear();
        CHECK_THROWS_AS(run_table(bad), ConfigError);
        bad = cfg;
        bad.table_k.clear();
        CHECK_THROWS_AS(run_table(bad), ConfigError);
        bad = cfg;
        bad.methods.clear();
        CHECK_THROWS_AS(run_table(bad), ConfigError);
    }
}

TEST_CASE("optimize outcome carries the best-so-far trace") {
    auto cfg = parse_config_json(kConfigJson);
    cfg.budget = 1200;
    SearchSpace space;
    space.k = 3;
    space.s_x = 1e8;
    cfg.search = space;
    const auto outcome = run_optimize(cfg, Method::M2);
    CHECK(outcome.result.evaluations == 1200);
    CHECK(outcome.result.best_rate > 0.0);
    REQUIRE(!outcome.result.trace.empty());
    CHECK(outcome.result.trace.back().rate == outcome.result.best_rate);
    const auto text = optimize_json(outcome);
    CHECK(text.find("\"trace\"") != std::string::npos);
    CHECK(text.find("\"best_rate\"") != std::string::npos);
}

TEST_CASE("validate fixture suite") {
    const auto summary = run_validate(4000, 1);
    CHECK(summary.all_pass);
    bool saw_expected_fail = false;
    for (const auto& row : summary.rows) {
        if (row.expected_fail) {
            saw_expected_fail = true;
            CHECK(row.pass);  // the expected-fail fixture must indeed fail
        }
    }
    CHECK(saw_expected_fail);
    // verdicts are stable across seeds (statistical margins absorb seed noise)
    const auto other = run_validate(4000, 999);
    REQUIRE(other.rows.size() == summary.rows.size());
    for (std::size_t i = 0; i < other.rows.size(); ++i) {
        CHECK(other.rows[i].pass == summary.rows[i].pass);
    }
    const auto csv = validate_csv(summary);
    CHECK(csv.rfind("fixture,kind,observed,threshold,pass,expected_fail\n", 0) == 0);
}

TEST_CASE("format_g6 pins six significant digits") {
    CHECK(format_g6(1.234567890e-5) == "1.23457e-05");
    CHECK(format_g6(1e7) == "1e+07");
    CHECK(format_g6(0.5) == "0.5");
}
