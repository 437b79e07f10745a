#pragma once

#include <optional>
#include <vector>

#include "qkd/bounds.hpp"
#include "qkd/channel.hpp"

namespace qkd {

struct SecurityBudget {
    double kappa = 1e-15;    // secrecy leakage per final secret bit
    double eps_cor = 1e-15;  // correctness parameter
};

// Lambda_EC = < Q_X H2(E_X) >
double leakage(const ObservedStats& stats, std::span<const double> p_mu);

struct PhaseError {
    double e_p = 0.5;
    bool gamma_ok = true;  // false when the gamma radicand signalled (deviation 0 used)
};

// e_p = min(1/2, e_Z1 + gamma_bar(eps, e_Z1, s_Z Y1 <mu e^-mu>/<Q_Z>,
//                                          s_X Y1 <mu e^-mu>/<Q_X>))
// with Y1 the clamped lower bounds of the decoy combination per basis.
PhaseError phase_error(double e_z1, const ProtocolParams& params, const ObservedStats& stats,
                       const DecoyCoefficients& coeffs, double eps);

struct MethodRate {
    Method method = Method::M1;
    double rate = 0.0;      // clamped at 0
    double rate_raw = 0.0;  // before clamping
    MethodBound bound;
    double e_p = 0.5;
    bool gamma_ok = true;
    double eps_sec = 0.0;
    double ell_final = 0.0;
    int iterations = 0;
    bool feasible = false;
    bool converged = false;
};

// Finite-key secure rate for one method, with eps_sec resolved by the damped
// fixed point eps_sec = kappa * ell_final(R).  Throws NonConvergenceError when
// the iteration stalls on a positive rate.
MethodRate secure_rate(const ProtocolParams& params, const ObservedStats& stats, Method method,
                       const SecurityBudget& budget, bool strict_feasibility = false);

struct KeyRateResult {
    std::vector<MethodRate> per_method;
    double best_rate = 0.0;   // advisory min-over-methods view: the largest rate
    Method best_method = Method::M1;
};

KeyRateResult evaluate_methods(const ProtocolParams& params, const ObservedStats& stats,
                               const std::vector<Method>& methods, const SecurityBudget& budget,
                               bool strict_feasibility = false);

namespace detail {
// Single rate evaluation at a fixed eps_sec (exposed for tests).
MethodRate rate_at_eps(const ProtocolParams& params, const ObservedStats& stats, Method method,
                       const SecurityBudget& budget, double eps_sec, bool strict_feasibility);
}  // namespace detail

}  // namespace qkd
