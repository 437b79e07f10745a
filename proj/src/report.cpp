#include "qkd/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "qkd/rng.hpp"

namespace qkd {

using nlohmann::json;

std::string format_g6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

namespace {

std::vector<Method> parse_methods(const json& j) {
    std::vector<Method> methods;
    for (const auto& item : j) {
        const std::string name = item.get<std::string>();
        if (name == "all") {
            return {Method::M1, Method::M2, Method::M3, Method::M4};
        }
        const auto m = parse_method(name);
        if (!m) throw ConfigError("config: unknown method '" + name + "'");
        methods.push_back(*m);
    }
    if (methods.empty()) throw ConfigError("config: methods list is empty");
    return methods;
}

ChannelModel parse_channel(const json& j) {
    ChannelModel model;
    if (j.contains("length_km")) model.length_km = j.at("length_km").get<double>();
    if (j.contains("p_afterpulse")) model.p_afterpulse = j.at("p_afterpulse").get<double>();
    if (j.contains("p_darkcount")) model.p_darkcount = j.at("p_darkcount").get<double>();
    if (j.contains("e_misalign")) model.e_misalign = j.at("e_misalign").get<double>();
    model.validate();
    return model;
}

ProtocolParams parse_protocol(const json& j, double spacing) {
    ProtocolParams params;
    IntensityOptions opts;
    opts.min_spacing = spacing;
    if (j.contains("relax_spacing")) opts.relax_spacing = j.at("relax_spacing").get<bool>();
    if (j.contains("allow_large_k")) opts.allow_large_k = j.at("allow_large_k").get<bool>();
    params.intensities =
        IntensityVector::validated(j.at("mus").get<std::vector<double>>(), opts);
    params.p_mu = j.at("p_mu").get<std::vector<double>>();
    params.p_basis_x = j.at("p_x").get<double>();
    params.raw_key_length = j.at("s_x").get<double>();
    params.validate();
    return params;
}

SearchSpace parse_search(const json& j, const RunConfig& cfg) {
    SearchSpace space;
    space.k = j.at("k").get<int>();
    if (j.contains("s_x")) space.s_x = j.at("s_x").get<double>();
    space.mu_min = j.value("mu_min", cfg.mu_min);
    space.mu_max = j.value("mu_max", cfg.mu_max);
    space.spacing = j.value("spacing", cfg.spacing);
    space.p_x_min = j.value("p_x_min", space.p_x_min);
    space.p_x_max = j.value("p_x_max", space.p_x_max);
    space.validate();
    return space;
}

json candidate_json(const Candidate& c) {
    return json{{"p_x", c.p_x}, {"mus", c.mus}, {"p_mu", c.p_mu}};
}

json method_rate_json(const MethodRate& r) {
    return json{{"method", method_name(r.method)},
                {"rate", r.rate},
                {"rate_raw", r.rate_raw},
                {"e_z1_upper", r.bound.e_z1_upper},
                {"chi", r.bound.chi},
                {"bound_feasible", r.bound.feasible},
                {"delta_y1", r.bound.diagnostics.delta_y1},
                {"delta_y1e1", r.bound.diagnostics.delta_y1e1},
                {"delta_y1ebar1", r.bound.diagnostics.delta_y1ebar1},
                {"delta_e1", r.bound.diagnostics.delta_e1},
                {"e_p", r.e_p},
                {"gamma_ok", r.gamma_ok},
                {"eps_sec", r.eps_sec},
                {"ell_final", r.ell_final},
                {"iterations", r.iterations},
                {"feasible", r.feasible},
                {"converged", r.converged}};
}

MethodRate method_rate_from_json(const json& j) {
    MethodRate r;
    r.method = *parse_method(j.at("method").get<std::string>());
    r.rate = j.at("rate").get<double>();
    r.rate_raw = j.at("rate_raw").get<double>();
    r.bound.method = r.method;
    r.bound.e_z1_upper = j.at("e_z1_upper").get<double>();
    r.bound.chi = j.at("chi").get<int>();
    r.bound.feasible = j.at("bound_feasible").get<bool>();
    r.bound.diagnostics.delta_y1 = j.at("delta_y1").get<double>();
    r.bound.diagnostics.delta_y1e1 = j.at("delta_y1e1").get<double>();
    r.bound.diagnostics.delta_y1ebar1 = j.at("delta_y1ebar1").get<double>();
    r.bound.diagnostics.delta_e1 = j.at("delta_e1").get<double>();
    r.e_p = j.at("e_p").get<double>();
    r.gamma_ok = j.at("gamma_ok").get<bool>();
    r.eps_sec = j.at("eps_sec").get<double>();
    r.ell_final = j.at("ell_final").get<double>();
    r.iterations = j.at("iterations").get<int>();
    r.feasible = j.at("feasible").get<bool>();
    r.converged = j.at("converged").get<bool>();
    return r;
}

std::string join_semicolon(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ';';
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.9g", v[i]);
        out += buf;
    }
    return out;
}

}  // namespace

RunConfig parse_config_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    RunConfig cfg;
    try {
        if (j.contains("channel")) cfg.channel = parse_channel(j.at("channel"));
        if (j.contains("security")) {
            const auto& s = j.at("security");
            cfg.security.kappa = s.value("kappa", cfg.security.kappa);
            cfg.security.eps_cor = s.value("eps_cor", cfg.security.eps_cor);
        }
        cfg.seed = j.value("seed", cfg.seed);
        cfg.budget = j.value("budget", cfg.budget);
        cfg.strict_feasibility = j.value("strict_feasibility", cfg.strict_feasibility);
        cfg.sampling_noise = j.value("sampling_noise", cfg.sampling_noise);
        cfg.validate_trials = j.value("validate_trials", cfg.validate_trials);
        cfg.mu_min = j.value("mu_min", cfg.mu_min);
        cfg.mu_max = j.value("mu_max", cfg.mu_max);
        cfg.spacing = j.value("spacing", cfg.spacing);
        if (j.contains("methods")) cfg.methods = parse_methods(j.at("methods"));
        if (j.contains("protocol")) cfg.protocol = parse_protocol(j.at("protocol"), cfg.spacing);
        if (j.contains("search")) cfg.search = parse_search(j.at("search"), cfg);
        if (j.contains("table")) {
            const auto& t = j.at("table");
            cfg.table_k = t.at("k").get<std::vector<int>>();
            cfg.table_s_x = t.at("s_x").get<std::vector<double>>();
        }
        if (j.contains("output")) {
            const auto& o = j.at("output");
            cfg.out_path = o.value("path", std::string{});
            const std::string fmt = o.value("format", std::string{"csv"});
            if (fmt == "csv") {
                cfg.format = OutputFormat::Csv;
            } else if (fmt == "json") {
                cfg.format = OutputFormat::Json;
            } else {
                throw ConfigError("config: unknown output format '" + fmt + "'");
            }
            if (o.contains("plot_dir")) cfg.plot_dir = o.at("plot_dir").get<std::string>();
        }
        if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_json(buffer.str());
}

std::string rate_result_json(const RunConfig& cfg, const ProtocolParams& params,
                             const KeyRateResult& result) {
    json per_method = json::array();
    for (const auto& r : result.per_method) per_method.push_back(method_rate_json(r));
    json j{{"channel",
            {{"length_km", cfg.channel.length_km},
             {"p_afterpulse", cfg.channel.p_afterpulse},
             {"p_darkcount", cfg.channel.p_darkcount},
             {"e_misalign", cfg.channel.e_misalign}}},
           {"protocol",
            {{"mus", params.intensities.mus},
             {"p_mu", params.p_mu},
             {"p_x", params.p_basis_x},
             {"s_x", params.raw_key_length}}},
           {"per_method", per_method},
           {"best_rate", result.best_rate},
           {"best_method", method_name(result.best_method)}};
    return j.dump(2) + "\n";
}

KeyRateResult parse_rate_result_json(const std::string& text) {
    const json j = json::parse(text);
    KeyRateResult result;
    for (const auto& item : j.at("per_method")) {
        result.per_method.push_back(method_rate_from_json(item));
    }
    result.best_rate = j.at("best_rate").get<double>();
    result.best_method = *parse_method(j.at("best_method").get<std::string>());
    return result;
}

std::vector<TableRow> run_table(const RunConfig& cfg) {
    if (cfg.table_k.empty()) throw ConfigError("table: empty k list");
    if (cfg.table_s_x.empty()) throw ConfigError("table: empty s_x list");
    if (cfg.methods.empty()) throw ConfigError("table: empty method list");

    struct Cell {
        int k;
        double s_x;
        Method method;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    std::uint64_t index = 0;
    for (int k : cfg.table_k) {
        for (double s_x : cfg.table_s_x) {
            for (Method m : cfg.methods) {
                cells.push_back({k, s_x, m, derive_seed(cfg.seed, index)});
                ++index;
            }
        }
    }

    auto run_cell = [&](const Cell& cell) -> TableRow {
        SearchSpace space;
        space.k = cell.k;
        space.s_x = cell.s_x;
        space.mu_min = cfg.mu_min;
        space.mu_max = cfg.mu_max;
        space.spacing = cfg.spacing;
        AnnealOptions opts;
        opts.budget = cfg.budget;
        opts.seed = cell.seed;
        const auto objective =
            rate_objective(cfg.channel, space, cell.method, cfg.security, cfg.strict_feasibility);
        const auto result = anneal(space, objective, opts);

        TableRow row;
        row.k = cell.k;
        row.s_x = cell.s_x;
        row.method = cell.method;
        row.params = result.best;
        row.rate = result.best_rate;
        if (result.best_rate > 0.0) {
            const auto params = to_params(space, result.best);
            const auto stats = observe(cfg.channel, params);
            const auto full =
                secure_rate(params, stats, cell.method, cfg.security, cfg.strict_feasibility);
            row.e_z1 = full.bound.e_z1_upper;
            row.e_p = full.e_p;
            row.feasible = full.feasible;
            row.eps_sec = full.eps_sec;
        }
        return row;
    };

    // fail fast on configuration problems before spawning workers
    for (int k : cfg.table_k) {
        SearchSpace probe;
        probe.k = k;
        probe.s_x = cfg.table_s_x.front();
        probe.mu_min = cfg.mu_min;
        probe.mu_max = cfg.mu_max;
        probe.spacing = cfg.spacing;
        probe.validate();
    }
    if (cfg.budget < 1) throw ConfigError("table: budget must be >= 1");

    std::vector<TableRow> rows(cells.size());
    const int hardware = static_cast<int>(std::thread::hardware_concurrency());
    const int threads =
        std::max(1, std::min<int>(cfg.threads.value_or(hardware > 0 ? hardware : 1),
                                  static_cast<int>(cells.size())));
    if (threads <= 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) rows[i] = run_cell(cells[i]);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&]() {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= cells.size()) return;
                    try {
                        rows[i] = run_cell(cells[i]);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (!error) error = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (error) std::rethrow_exception(error);
    }
    return rows;
}

std::string table_csv(const std::vector<TableRow>& rows) {
    std::string out = "k,s_x,method,rate,rate_1e5,e_z1,e_p,feasible,p_x,mus,p_mu\n";
    for (const auto& row : rows) {
        out += std::to_string(row.k);
        out += ',';
        out += format_g6(row.s_x);
        out += ',';
        out += method_name(row.method);
        out += ',';
        out += format_g6(row.rate);
        out += ',';
        out += format_g6(row.rate * 1e5);
        out += ',';
        out += format_g6(row.e_z1);
        out += ',';
        out += format_g6(row.e_p);
        out += ',';
        out += row.feasible ? "1" : "0";
        out += ',';
        out += format_g6(row.params.p_x);
        out += ",\"";
        out += join_semicolon(row.params.mus);
        out += "\",\"";
        out += join_semicolon(row.params.p_mu);
        out += "\"\n";
    }
    return out;
}

std::string series_csv(const std::vector<TableRow>& rows, Method method) {
    std::string out = "s_x,rate\n";
    for (const auto& row : rows) {
        if (row.method != method) continue;
        out += format_g6(row.s_x);
        out += ',';
        out += format_g6(row.rate);
        out += '\n';
    }
    return out;
}

OptimizeOutcome run_optimize(const RunConfig& cfg, Method method) {
    if (!cfg.search) throw ConfigError("optimize: missing search space");
    OptimizeOutcome outcome;
    outcome.space = *cfg.search;
    outcome.method = method;
    AnnealOptions opts;
    opts.budget = cfg.budget;
    opts.seed = cfg.seed;
    const auto objective =
        rate_objective(cfg.channel, outcome.space, method, cfg.security, cfg.strict_feasibility);
    outcome.result = anneal(outcome.space, objective, opts);
    return outcome;
}

std::string optimize_json(const OptimizeOutcome& outcome) {
    json trace = json::array();
    for (const auto& point : outcome.result.trace) {
        trace.push_back({{"evaluation", point.evaluation}, {"rate", point.rate}});
    }
    json j{{"method", method_name(outcome.method)},
           {"k", outcome.space.k},
           {"s_x", outcome.space.s_x},
           {"best_rate", outcome.result.best_rate},
           {"best", candidate_json(outcome.result.best)},
           {"evaluations", outcome.result.evaluations},
           {"trace", trace}};
    return j.dump(2) + "\n";
}

ValidateSummary run_validate(int trials, std::uint64_t seed) {
    if (trials < 1) throw ConfigError("validate: trials must be >= 1");
    ValidateSummary summary;
    summary.all_pass = true;
    auto add = [&](ValidateRow row) {
        if (!row.expected_fail && !row.pass) summary.all_pass = false;
        summary.rows.push_back(std::move(row));
    };

    const std::vector<std::pair<std::string, Population>> populations = {
        {"balanced01", {{0.0, 1.0}, {50, 50}}},
        {"skew01", {{0.0, 1.0}, {70, 30}}},
        {"threeval", {{0.0, 1.0, 3.0}, {30, 40, 30}}},
    };
    const int draw_count = 20;
    std::uint64_t stream = 0;

    for (const auto& [name, pop] : populations) {
        for (double eps : {1e-2, 1e-3}) {
            const double w = pop.width();
            const double delta = w * std::sqrt(draw_count * std::log(1.0 / eps) / 2.0);
            const auto check =
                tail_violation_rate(pop, draw_count, delta, trials, derive_seed(seed, stream++));
            const double allowance =
                3.0 * std::sqrt(std::max(check.analytic_bound, 1e-12) / trials);
            ValidateRow row;
            row.fixture = name + "/eps=" + format_g6(eps);
            row.kind = "tail";
            row.observed = check.empirical_rate;
            row.threshold = check.analytic_bound + allowance;
            row.pass = check.empirical_rate <= row.threshold;
            add(row);
        }
        if (pop.values.size() == 2) {
            bool ok = true;
            double worst_gap = -1.0;
            for (int grid = 1; grid <= 10; ++grid) {
                const double delta = pop.width() * draw_count * grid / 20.0;
                const double exact = hypergeom_tail_two_value(pop, draw_count, delta);
                const double bound =
                    std::exp(-2.0 * delta * delta / (draw_count * pop.width() * pop.width()));
                if (exact > bound) ok = false;
                worst_gap = std::max(worst_gap, exact - bound);
            }
            ValidateRow row;
            row.fixture = name;
            row.kind = "exact-tail";
            row.observed = worst_gap;
            row.threshold = 0.0;
            row.pass = ok;
            add(row);
        }
    }

    // exhaustive centering fixtures
    for (const auto& [name, pop, t] :
         std::vector<std::tuple<std::string, Population, int>>{
             {"sum-2val-M6", Population{{0.0, 1.0}, {3, 3}}, 3},
             {"sum-3val-M8", Population{{0.0, 1.0, 3.0}, {3, 3, 2}}, 5},
         }) {
        const auto report = centering_check_sum(pop, t, 0.0);
        ValidateRow row;
        row.fixture = name;
        row.kind = "centering-sum";
        row.observed = report.pass ? 1.0 : 0.0;
        row.threshold = 1.0;
        row.pass = report.pass;
        add(row);
    }
    {
        Population pop{{0.0, 1.0}, {4, 4}};
        const int t = 4;
        const double y = 6.0;
        const double x = std::clamp(centering_x_bound(pop, t, y), 0.0, 1.0);
        const auto report = centering_check_ratio(pop, t, x, y);
        ValidateRow row;
        row.fixture = "ratio-2val-M8";
        row.kind = "centering-ratio";
        row.observed = report.pass ? 1.0 : 0.0;
        row.threshold = 1.0;
        row.pass = report.pass;
        add(row);
    }
    {
        // anchor pushed beyond the admissible range: documented expected-fail
        Population pop{{0.0, 1.0}, {6, 2}};
        const int t = 6;
        const double y = 0.55;
        const auto report = centering_check_ratio(pop, t, 1.0, y);
        ValidateRow row;
        row.fixture = "ratio-anchor-high";
        row.kind = "centering-ratio";
        row.observed = report.pass ? 1.0 : 0.0;
        row.threshold = 0.0;
        row.pass = !report.pass;
        row.expected_fail = true;
        add(row);
    }
    return summary;
}

std::string validate_csv(const ValidateSummary& summary) {
    std::string out = "fixture,kind,observed,threshold,pass,expected_fail\n";
    for (const auto& row : summary.rows) {
        out += row.fixture;
        out += ',';
        out += row.kind;
        out += ',';
        out += format_g6(row.observed);
        out += ',';
        out += format_g6(row.threshold);
        out += ',';
        out += row.pass ? "1" : "0";
        out += ',';
        out += row.expected_fail ? "1" : "0";
        out += '\n';
    }
    return out;
}

}  // namespace qkd
