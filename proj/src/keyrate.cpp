#include "qkd/keyrate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qkd {

double leakage(const ObservedStats& stats, std::span<const double> p_mu) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < stats.q_x.size(); ++i) {
        acc.add(p_mu[i] * stats.q_x[i] * binary_entropy(stats.e_x[i]));
    }
    return acc.value();
}

namespace {

// Everything that depends on the protocol parameters but not on eps_sec.
struct RateContext {
    DecoyCoefficients coeffs;
    double mean_exp_neg_mu = 0.0;
    double mean_mu_exp_neg_mu = 0.0;
    double mean_qx = 0.0;
    double mean_qz = 0.0;
    double lambda_ec = 0.0;
    double y1_x = 0.0;  // clamped decoy lower bounds on Y1 per basis
    double y1_z = 0.0;
    double pulses = 0.0;
};

RateContext make_context(const ProtocolParams& params, const ObservedStats& stats) {
    RateContext ctx;
    ctx.coeffs = decoy_coefficients(params.intensities);
    const auto& p = params.p_mu;
    const auto& mus = params.intensities.mus;
    CompensatedSum mexp, mem;
    for (std::size_t i = 0; i < mus.size(); ++i) {
        mexp.add(p[i] * std::exp(-mus[i]));
        mem.add(p[i] * mus[i] * std::exp(-mus[i]));
    }
    ctx.mean_exp_neg_mu = mexp.value();
    ctx.mean_mu_exp_neg_mu = mem.value();
    ctx.mean_qx = mean(p, stats.q_x);
    ctx.mean_qz = mean(p, stats.q_z);
    ctx.lambda_ec = leakage(stats, p);
    ctx.y1_x = std::max(0.0, dot(ctx.coeffs.a1, stats.q_x));
    ctx.y1_z = std::max(0.0, dot(ctx.coeffs.a1, stats.q_z));
    if (ctx.mean_qx <= 0.0) throw std::domain_error("secure_rate: degenerate channel");
    ctx.pulses = stats.s_x / (params.p_basis_x * params.p_basis_x * ctx.mean_qx);
    return ctx;
}

PhaseError phase_error_ctx(double e_z1, const RateContext& ctx, const ObservedStats& stats,
                           double eps) {
    if (e_z1 >= 0.5) return {0.5, true};
    if (e_z1 <= 0.0) return {0.0, true};  // gamma limit convention at b = 0
    if (ctx.y1_z <= 0.0 || ctx.y1_x <= 0.0 || ctx.mean_qz <= 0.0) return {0.5, true};
    const double c = stats.s_z * ctx.y1_z * ctx.mean_mu_exp_neg_mu / ctx.mean_qz;
    const double d = stats.s_x * ctx.y1_x * ctx.mean_mu_exp_neg_mu / ctx.mean_qx;
    const auto g = gamma_bar(eps, e_z1, c, d);
    return {std::min(0.5, e_z1 + g.value), g.radicand_ok};
}

MethodRate rate_at_eps_ctx(const RateContext& ctx, const ProtocolParams& params,
                           const ObservedStats& stats, Method method,
                           const SecurityBudget& budget, double eps_sec,
                           bool strict_feasibility) {
    const int chi = chi_for(method);
    const double eps_term = eps_sec / chi;

    MethodRate out;
    out.method = method;
    out.eps_sec = eps_sec;
    out.bound = bound_for(method, stats, ctx.coeffs, params.p_mu, eps_term, strict_feasibility);

    const auto pe = phase_error_ctx(out.bound.e_z1_upper, ctx, stats, eps_term);
    out.e_p = pe.e_p;
    out.gamma_ok = pe.gamma_ok;

    const auto b = b_weights(ctx.coeffs, out.e_p, params.p_basis_x, ctx.mean_exp_neg_mu,
                             ctx.mean_mu_exp_neg_mu);
    const double sum_bq = dot(b, stats.q_x);
    WeightSet bw;
    bw.values.resize(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) bw.values[i] = b[i] / params.p_mu[i];

    const double px2 = params.p_basis_x * params.p_basis_x;
    const double log_chi = std::log(chi / eps_sec);
    if (log_chi <= 0.0) {
        out.rate_raw = -1.0;  // eps_sec above chi: outside the meaningful regime
        out.rate = 0.0;
        return out;
    }
    const double pa_term = ctx.mean_qx * std::sqrt(log_chi / (2.0 * stats.s_x)) * bw.width();
    const double overhead = (ctx.mean_qx / stats.s_x) *
                            (6.0 * std::log2(chi / eps_sec) + std::log2(2.0 / budget.eps_cor));
    out.rate_raw = sum_bq - pa_term - px2 * (ctx.lambda_ec + overhead);
    out.rate = std::max(0.0, out.rate_raw);
    return out;
}

}  // namespace

PhaseError phase_error(double e_z1, const ProtocolParams& params, const ObservedStats& stats,
                       const DecoyCoefficients& coeffs, double eps) {
    if (!(e_z1 >= 0.0 && e_z1 <= 0.5)) {
        throw std::domain_error("phase_error: e_z1 outside [0, 1/2]");
    }
    auto ctx = make_context(params, stats);
    ctx.coeffs = coeffs;
    ctx.y1_x = std::max(0.0, dot(coeffs.a1, stats.q_x));
    ctx.y1_z = std::max(0.0, dot(coeffs.a1, stats.q_z));
    return phase_error_ctx(e_z1, ctx, stats, eps);
}

namespace detail {

MethodRate rate_at_eps(const ProtocolParams& params, const ObservedStats& stats, Method method,
                       const SecurityBudget& budget, double eps_sec, bool strict_feasibility) {
    const auto ctx = make_context(params, stats);
    return rate_at_eps_ctx(ctx, params, stats, method, budget, eps_sec, strict_feasibility);
}

}  // namespace detail

MethodRate secure_rate(const ProtocolParams& params, const ObservedStats& stats, Method method,
                       const SecurityBudget& budget, bool strict_feasibility) {
    params.validate();
    const auto ctx = make_context(params, stats);

    // Seed at the R = 1 upper envelope, capped below chi so ln(chi/eps) > 0.
    double eps_sec = std::min(budget.kappa * ctx.pulses, 0.5);
    constexpr int kMaxIterations = 100;
    constexpr double kRelTol = 1e-12;

    MethodRate result;
    for (int it = 1; it <= kMaxIterations; ++it) {
        result = rate_at_eps_ctx(ctx, params, stats, method, budget, eps_sec, strict_feasibility);
        result.iterations = it;
        const double ell = std::max(0.0, result.rate) * ctx.pulses;
        result.ell_final = ell;
        const double target = budget.kappa * ell;
        if (result.rate > 0.0 && std::abs(eps_sec - target) <= kRelTol * eps_sec) {
            result.converged = true;
            result.feasible = result.bound.feasible;
            return result;
        }
        eps_sec = 0.5 * eps_sec + 0.5 * target;
        if (eps_sec < 1e-200) break;  // rate pinned at zero
    }
    if (result.rate_raw > 0.0) {
        std::ostringstream msg;
        msg << "secure_rate: eps_sec fixed point did not converge for " << method_name(method)
            << " (eps_sec=" << eps_sec << ", rate=" << result.rate << ", iterations "
            << result.iterations << ")";
        throw NonConvergenceError(msg.str());
    }
    result.rate = 0.0;
    result.converged = false;
    result.feasible = false;
    return result;
}

KeyRateResult evaluate_methods(const ProtocolParams& params, const ObservedStats& stats,
                               const std::vector<Method>& methods, const SecurityBudget& budget,
                               bool strict_feasibility) {
    if (methods.empty()) throw ConfigError("evaluate_methods: empty method list");
    KeyRateResult out;
    out.per_method.reserve(methods.size());
    for (Method m : methods) {
        out.per_method.push_back(secure_rate(params, stats, m, budget, strict_feasibility));
        const auto& r = out.per_method.back();
        if (r.rate > out.best_rate) {
            out.best_rate = r.rate;
            out.best_method = m;
        }
    }
    return out;
}

}  // namespace qkd
