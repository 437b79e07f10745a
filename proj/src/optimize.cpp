#include "qkd/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qkd/rng.hpp"

namespace qkd {

void SearchSpace::validate() const {
    if (k < 2) throw ConfigError("SearchSpace: k must be >= 2");
    if (s_x < 1.0) throw ConfigError("SearchSpace: s_x must be >= 1");
    if (!(mu_min >= 0.0) || !(mu_max > mu_min)) throw ConfigError("SearchSpace: bad mu range");
    if (spacing < 0.0) throw ConfigError("SearchSpace: negative spacing");
    if (mu_min + (k - 1) * spacing > mu_max) {
        throw ConfigError("SearchSpace: k * spacing exceeds the intensity range");
    }
    if (!(p_x_min > 0.0 && p_x_max < 1.0 && p_x_min < p_x_max)) {
        throw ConfigError("SearchSpace: bad p_x bounds");
    }
    if (!(p_mu_min > 0.0 && p_mu_min * k < 1.0)) {
        throw ConfigError("SearchSpace: bad intensity probability floor");
    }
}

std::vector<double> pack(const Candidate& c) {
    std::vector<double> v;
    v.reserve(1 + c.mus.size() - 1 + c.p_mu.size());
    v.push_back(c.p_x);
    for (std::size_t i = 0; i + 1 < c.mus.size(); ++i) v.push_back(c.mus[i]);
    for (double p : c.p_mu) v.push_back(p);
    return v;
}

Candidate project(const SearchSpace& space, std::span<const double> raw) {
    space.validate();
    const int k = space.k;
    if (static_cast<int>(raw.size()) != space.dimension()) {
        throw std::invalid_argument("project: wrong vector dimension");
    }
    Candidate c;
    c.p_x = std::clamp(raw[0], space.p_x_min, space.p_x_max);

    c.mus.assign(static_cast<std::size_t>(k), space.mu_min);
    for (int i = 0; i < k - 1; ++i) {
        c.mus[static_cast<std::size_t>(i)] =
            std::clamp(raw[static_cast<std::size_t>(i) + 1], space.mu_min, space.mu_max);
    }
    std::sort(c.mus.begin(), c.mus.end(), std::greater<>());
    c.mus[static_cast<std::size_t>(k) - 1] = space.mu_min;
    for (int i = k - 2; i >= 0; --i) {
        const double floor_i = c.mus[static_cast<std::size_t>(i) + 1] + space.spacing;
        if (c.mus[static_cast<std::size_t>(i)] < floor_i) {
            c.mus[static_cast<std::size_t>(i)] = floor_i;
        }
    }
    if (c.mus[0] > space.mu_max) {
        c.mus[0] = space.mu_max;
        for (int i = 1; i < k - 1; ++i) {
            const double cap = c.mus[static_cast<std::size_t>(i) - 1] - space.spacing;
            if (c.mus[static_cast<std::size_t>(i)] > cap) {
                c.mus[static_cast<std::size_t>(i)] = cap;
            }
        }
    }

    c.p_mu.assign(static_cast<std::size_t>(k), 0.0);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        c.p_mu[static_cast<std::size_t>(i)] =
            std::max(raw[static_cast<std::size_t>(k + i)], space.p_mu_min);
        sum += c.p_mu[static_cast<std::size_t>(i)];
    }
    for (double& p : c.p_mu) p /= sum;
    // renormalization can push an entry below the floor only when others are
    // enormous; re-apply once and rescale the excess mass
    bool floored = false;
    for (double& p : c.p_mu) {
        if (p < space.p_mu_min) {
            p = space.p_mu_min;
            floored = true;
        }
    }
    if (floored) {
        double total = 0.0;
        for (double p : c.p_mu) total += p;
        for (double& p : c.p_mu) p /= total;
    }
    return c;
}

ProtocolParams to_params(const SearchSpace& space, const Candidate& c) {
    IntensityOptions opts;
    opts.min_spacing = space.spacing;
    opts.relax_spacing = space.spacing <= 0.0;
    ProtocolParams params;
    params.intensities = IntensityVector::validated(c.mus, opts);
    params.p_mu = c.p_mu;
    params.p_basis_x = c.p_x;
    params.raw_key_length = space.s_x;
    return params;
}

Objective rate_objective(const ChannelModel& model, const SearchSpace& space, Method method,
                         const SecurityBudget& budget, bool strict_feasibility) {
    return [model, space, method, budget, strict_feasibility](const Candidate& c) -> double {
        try {
            const auto params = to_params(space, c);
            const auto stats = observe(model, params);
            return secure_rate(params, stats, method, budget, strict_feasibility).rate;
        } catch (const NonConvergenceError&) {
            return 0.0;
        } catch (const std::exception&) {
            return 0.0;
        }
    };
}

namespace {

Candidate random_candidate(const SearchSpace& space, Rng& rng) {
    std::vector<double> raw(static_cast<std::size_t>(space.dimension()));
    raw[0] = rng.uniform(space.p_x_min, space.p_x_max);
    for (int i = 0; i < space.k - 1; ++i) {
        raw[static_cast<std::size_t>(i) + 1] = rng.uniform(space.mu_min, space.mu_max);
    }
    for (int i = 0; i < space.k; ++i) {
        raw[static_cast<std::size_t>(space.k + i)] = rng.uniform(0.05, 1.0);
    }
    return project(space, raw);
}

Candidate perturb(const SearchSpace& space, const Candidate& current, Rng& rng, double scale) {
    auto raw = pack(current);
    raw[0] += rng.gaussian() * scale * 0.35 * (space.p_x_max - space.p_x_min);
    for (int i = 0; i < space.k - 1; ++i) {
        raw[static_cast<std::size_t>(i) + 1] +=
            rng.gaussian() * scale * 0.3 * (space.mu_max - space.mu_min);
    }
    for (int i = 0; i < space.k; ++i) {
        raw[static_cast<std::size_t>(space.k + i)] *=
            std::exp(rng.gaussian() * scale * 0.8);
    }
    return project(space, raw);
}

}  // namespace

AnnealResult anneal(const SearchSpace& space, const Objective& objective,
                    const AnnealOptions& opts) {
    space.validate();
    if (opts.budget < 1) throw ConfigError("anneal: budget must be >= 1");
    Rng rng(derive_seed(opts.seed, 0x517e));

    AnnealResult out;
    std::uint64_t evals = 0;
    auto evaluate = [&](const Candidate& c) {
        const double r = objective(c);
        ++evals;
        if (out.trace.empty() || r > out.best_rate) {
            out.best = c;
            out.best_rate = r;
            out.trace.push_back({evals, r});
        }
        return r;
    };

    Candidate current = opts.initial.empty() ? random_candidate(space, rng)
                                             : project(space, opts.initial);
    double current_rate = evaluate(current);
    if (evals >= opts.budget) {
        out.evaluations = evals;
        return out;
    }

    // Temperature from the spread of an initial probe set.
    double lo = current_rate, hi = current_rate;
    const std::uint64_t probe_budget =
        std::min<std::uint64_t>(static_cast<std::uint64_t>(std::max(opts.temperature_probes, 0)),
                                opts.budget - evals);
    for (std::uint64_t i = 0; i < probe_budget; ++i) {
        const auto probe = random_candidate(space, rng);
        const double r = evaluate(probe);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
        if (r > current_rate) {
            current = probe;
            current_rate = r;
        }
    }
    const double t0 = 0.1 * (hi - lo) + 1e-300;
    double temperature = t0;

    const std::uint64_t restart_every =
        std::max<std::uint64_t>(1, opts.budget / static_cast<std::uint64_t>(
                                                     std::max(opts.restarts, 1)));
    std::uint64_t since_restart = 0;

    while (evals < opts.budget) {
        if (since_restart >= restart_every) {
            since_restart = 0;
            // alternate fresh Monte Carlo restarts with re-centering on the best
            if ((evals / restart_every) % 2 == 1) {
                current = random_candidate(space, rng);
                current_rate = evaluate(current);
            } else {
                current = out.best;
                current_rate = out.best_rate;
            }
            if (evals >= opts.budget) break;
        }
        const double scale = std::max(std::sqrt(temperature / t0), 0.02);
        const auto candidate = perturb(space, current, rng, scale);
        const double r = evaluate(candidate);
        const double diff = r - current_rate;
        if (diff >= 0.0 || rng.uniform() < std::exp(diff / temperature)) {
            current = candidate;
            current_rate = r;
        }
        temperature *= opts.cooling;
        ++since_restart;
    }
    out.evaluations = evals;
    return out;
}

}  // namespace qkd
