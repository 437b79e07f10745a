#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qkd/keyrate.hpp"
#include "qkd/mcvalidate.hpp"
#include "qkd/optimize.hpp"

namespace qkd {

enum class OutputFormat { Csv, Json };

struct RunConfig {
    ChannelModel channel;
    SecurityBudget security;
    std::optional<ProtocolParams> protocol;      // rate
    std::optional<SearchSpace> search;           // optimize
    std::vector<int> table_k;                    // table
    std::vector<double> table_s_x;
    std::vector<Method> methods = {Method::M1, Method::M2, Method::M3, Method::M4};
    std::uint64_t seed = 1;
    std::uint64_t budget = 200000;
    bool strict_feasibility = false;
    bool sampling_noise = false;
    int validate_trials = 100000;
    std::string out_path;                        // empty: stdout
    OutputFormat format = OutputFormat::Csv;
    std::optional<std::string> plot_dir;
    std::optional<int> threads;                  // table cell parallelism
    // search-template fields reused by `table`
    double mu_min = 1e-6;
    double mu_max = 1.0;
    double spacing = 0.1;
};

RunConfig load_config(const std::string& path);
RunConfig parse_config_json(const std::string& text);

std::string rate_result_json(const RunConfig& cfg, const ProtocolParams& params,
                             const KeyRateResult& result);
KeyRateResult parse_rate_result_json(const std::string& text);

struct TableRow {
    int k = 0;
    double s_x = 0.0;
    Method method = Method::M1;
    double rate = 0.0;
    double e_z1 = 0.5;
    double e_p = 0.5;
    bool feasible = false;
    Candidate params;
    double eps_sec = 0.0;
};

// One optimized row per (k, s_x, method); cells run in parallel, rows are
// emitted in deterministic order.
std::vector<TableRow> run_table(const RunConfig& cfg);

std::string table_csv(const std::vector<TableRow>& rows);
std::string series_csv(const std::vector<TableRow>& rows, Method method);

struct OptimizeOutcome {
    SearchSpace space;
    Method method = Method::M1;
    AnnealResult result;
};

OptimizeOutcome run_optimize(const RunConfig& cfg, Method method);
std::string optimize_json(const OptimizeOutcome& outcome);

struct ValidateRow {
    std::string fixture;
    std::string kind;
    double observed = 0.0;
    double threshold = 0.0;
    bool pass = false;
    bool expected_fail = false;
};

struct ValidateSummary {
    std::vector<ValidateRow> rows;
    bool all_pass = false;  // expected-fail fixtures excluded
};

ValidateSummary run_validate(int trials, std::uint64_t seed);
std::string validate_csv(const ValidateSummary& summary);

// Shared fixed-width numeric formatting (6 significant digits).
std::string format_g6(double v);

}  // namespace qkd
