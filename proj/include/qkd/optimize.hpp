#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "qkd/channel.hpp"
#include "qkd/keyrate.hpp"

namespace qkd {

// Search domain for (p_X, mu_1..mu_{k-1}, p_mu_1..p_mu_k); mu_k is pinned to
// mu_min and the intensity probabilities live on the simplex.
struct SearchSpace {
    int k = 3;
    double s_x = 1e9;
    double mu_min = 1e-6;
    double mu_max = 1.0;
    double spacing = 0.1;
    double p_x_min = 0.01;
    double p_x_max = 0.99;
    double p_mu_min = 1e-4;

    int dimension() const { return 2 * k; }
    void validate() const;
};

struct Candidate {
    double p_x = 0.0;
    std::vector<double> mus;   // length k, descending, mus[k-1] = mu_min
    std::vector<double> p_mu;  // length k, sums to 1
};

std::vector<double> pack(const Candidate& c);

// Clamp to bounds, sort intensities descending, enforce spacing by shifting
// upward from the fixed mu_min (then downward from mu_max if the top overflows),
// renormalize p_mu onto the simplex.
Candidate project(const SearchSpace& space, std::span<const double> raw);

struct AnnealOptions {
    std::uint64_t budget = 200000;
    std::uint64_t seed = 1;
    double cooling = 0.995;           // T_i = T0 * cooling^i
    int restarts = 10;                // fresh Monte Carlo sample every budget/restarts
    int temperature_probes = 100;     // initial probes that set T0
    std::vector<double> initial;      // optional packed initial guess
};

struct TracePoint {
    std::uint64_t evaluation;
    double rate;
};

struct AnnealResult {
    Candidate best;
    double best_rate = 0.0;
    std::uint64_t evaluations = 0;
    std::vector<TracePoint> trace;  // best-so-far improvements
};

using Objective = std::function<double(const Candidate&)>;

// Simulated annealing with Monte Carlo restarts; deterministic given the seed.
AnnealResult anneal(const SearchSpace& space, const Objective& objective,
                    const AnnealOptions& opts);

// Rate objective for one method over the given channel; infeasible or throwing
// evaluations count as rate 0.
Objective rate_objective(const ChannelModel& model, const SearchSpace& space, Method method,
                         const SecurityBudget& budget, bool strict_feasibility = false);

ProtocolParams to_params(const SearchSpace& space, const Candidate& c);

}  // namespace qkd
