// Finite-key decoy-state BB84 key-rate engine, command-line front end.
//
// Subcommands:
//   rate      evaluate the secure key rate at fixed protocol parameters
//   optimize  anneal the protocol parameters for one method
//   table     one optimized row per (k, s_x, method)
//   validate  Monte Carlo / exact certification of the concentration bounds
//
// Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence,
// 4 I/O error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qkd/report.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNonConvergence = 3;
constexpr int kExitIo = 4;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> budget;
    std::vector<std::string> methods;
    std::optional<std::string> out_path;
    std::optional<std::string> format;
    bool strict = false;
    std::optional<std::string> plot_dir;
    std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON configuration file");
    cmd->add_option("--seed", flags.seed, "master RNG seed");
    cmd->add_option("--budget", flags.budget, "annealing evaluation budget");
    cmd->add_option("--method", flags.methods, "M1|M2|M3|M4|all (repeatable)");
    cmd->add_option("--out", flags.out_path, "output path (default stdout)");
    cmd->add_option("--format", flags.format, "csv|json");
    cmd->add_flag("--strict-feasibility", flags.strict,
                  "check the centering feasibility conditions strictly");
    cmd->add_option("--plot-dir", flags.plot_dir, "emit per-method (s_x, rate) series files");
    cmd->add_option("--threads", flags.threads, "worker threads for table cells");
}

qkd::RunConfig make_config(const CommonFlags& flags) {
    qkd::RunConfig cfg;
    if (!flags.config_path.empty()) cfg = qkd::load_config(flags.config_path);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.budget) cfg.budget = *flags.budget;
    if (!flags.methods.empty()) {
        std::vector<qkd::Method> methods;
        for (const auto& name : flags.methods) {
            if (name == "all") {
                methods = {qkd::Method::M1, qkd::Method::M2, qkd::Method::M3, qkd::Method::M4};
                break;
            }
            const auto m = qkd::parse_method(name);
            if (!m) throw qkd::ConfigError("unknown method '" + name + "'");
            methods.push_back(*m);
        }
        cfg.methods = methods;
    }
    if (cfg.methods.empty()) throw qkd::ConfigError("no methods selected");
    if (flags.out_path) cfg.out_path = *flags.out_path;
    if (flags.format) {
        if (*flags.format == "csv") {
            cfg.format = qkd::OutputFormat::Csv;
        } else if (*flags.format == "json") {
            cfg.format = qkd::OutputFormat::Json;
        } else {
            throw qkd::ConfigError("unknown format '" + *flags.format + "'");
        }
    }
    if (flags.strict) cfg.strict_feasibility = true;
    if (flags.plot_dir) cfg.plot_dir = flags.plot_dir;
    if (flags.threads) cfg.threads = flags.threads;
    if (cfg.protocol && cfg.protocol->k() > 10) {
        std::cerr << "warning: " << cfg.protocol->k()
                  << " intensities; coefficient precision degrades beyond 10\n";
    }
    return cfg;
}

void write_output(const qkd::RunConfig& cfg, const std::string& text) {
    if (cfg.out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(cfg.out_path, std::ios::binary);
    if (!out) throw std::ios_base::failure("cannot open output path '" + cfg.out_path + "'");
    out << text;
    if (!out) throw std::ios_base::failure("write failed for '" + cfg.out_path + "'");
}

int cmd_rate(const CommonFlags& flags) {
    const auto cfg = make_config(flags);
    if (!cfg.protocol) throw qkd::ConfigError("rate: config must provide a 'protocol' block");
    const auto& params = *cfg.protocol;
    const auto stats = cfg.sampling_noise
                           ? qkd::observe_sampled(cfg.channel, params, cfg.seed)
                           : qkd::observe(cfg.channel, params);
    const auto result =
        qkd::evaluate_methods(params, stats, cfg.methods, cfg.security, cfg.strict_feasibility);
    write_output(cfg, qkd::rate_result_json(cfg, params, result));
    return kExitOk;
}

int cmd_optimize(const CommonFlags& flags) {
    const auto cfg = make_config(flags);
    if (!cfg.search) throw qkd::ConfigError("optimize: config must provide a 'search' block");
    std::string out;
    std::vector<qkd::TableRow> rows;
    for (qkd::Method m : cfg.methods) {
        const auto outcome = qkd::run_optimize(cfg, m);
        if (cfg.format == qkd::OutputFormat::Json) {
            out += qkd::optimize_json(outcome);
        } else {
            qkd::TableRow row;
            row.k = outcome.space.k;
            row.s_x = outcome.space.s_x;
            row.method = m;
            row.rate = outcome.result.best_rate;
            row.params = outcome.result.best;
            if (row.rate > 0.0) {
                const auto params = qkd::to_params(outcome.space, outcome.result.best);
                const auto stats = qkd::observe(cfg.channel, params);
                const auto full = qkd::secure_rate(params, stats, m, cfg.security,
                                                   cfg.strict_feasibility);
                row.e_z1 = full.bound.e_z1_upper;
                row.e_p = full.e_p;
                row.feasible = full.feasible;
                row.eps_sec = full.eps_sec;
            }
            rows.push_back(row);
        }
    }
    if (cfg.format == qkd::OutputFormat::Csv) out = qkd::table_csv(rows);
    write_output(cfg, out);
    return kExitOk;
}

int cmd_table(const CommonFlags& flags) {
    const auto cfg = make_config(flags);
    const auto rows = qkd::run_table(cfg);
    write_output(cfg, qkd::table_csv(rows));
    if (cfg.plot_dir) {
        std::filesystem::create_directories(*cfg.plot_dir);
        for (qkd::Method m : cfg.methods) {
            const auto path =
                std::filesystem::path(*cfg.plot_dir) / ("series_" + qkd::method_name(m) + ".csv");
            std::ofstream out(path, std::ios::binary);
            if (!out) throw std::ios_base::failure("cannot open '" + path.string() + "'");
            out << qkd::series_csv(rows, m);
        }
    }
    return kExitOk;
}

int cmd_validate(const CommonFlags& flags, int trials_override) {
    auto cfg = make_config(flags);
    if (trials_override > 0) cfg.validate_trials = trials_override;
    if (cfg.validate_trials < 1) throw qkd::ConfigError("validate: trials must be >= 1");
    const auto summary = qkd::run_validate(cfg.validate_trials, cfg.seed);
    write_output(cfg, qkd::validate_csv(summary));
    return summary.all_pass ? kExitOk : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite-key decoy-state BB84 key-rate engine"};
    app.require_subcommand(1);

    CommonFlags rate_flags, optimize_flags, table_flags, validate_flags;
    int validate_trials = 0;

    auto* rate = app.add_subcommand("rate", "evaluate the rate at fixed parameters");
    add_common(rate, rate_flags);
    auto* optimize = app.add_subcommand("optimize", "anneal protocol parameters");
    add_common(optimize, optimize_flags);
    auto* table = app.add_subcommand("table", "optimized (k, s_x, method) grid");
    add_common(table, table_flags);
    auto* validate = app.add_subcommand("validate", "certify the concentration bounds");
    add_common(validate, validate_flags);
    validate->add_option("--trials", validate_trials, "Monte Carlo trials per fixture");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (rate->parsed()) return cmd_rate(rate_flags);
        if (optimize->parsed()) return cmd_optimize(optimize_flags);
        if (table->parsed()) return cmd_table(table_flags);
        if (validate->parsed()) return cmd_validate(validate_flags, validate_trials);
    } catch (const qkd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const qkd::NonConvergenceError& e) {
        std::cerr << "non-convergence: " << e.what() << "\n";
        return kExitNonConvergence;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitConfig;
}
