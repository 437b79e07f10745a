#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qkd/channel.hpp"
#include "qkd/coeffs.hpp"
#include "qkd/numeric.hpp"

namespace qkd {

enum class Method { M1 = 1, M2 = 2, M3 = 3, M4 = 4 };

int chi_for(Method m);
std::string method_name(Method m);
std::optional<Method> parse_method(const std::string& name);

// Finite-size deviation terms entering the e_Z1 bounds.
struct DeviationTerms {
    double delta_y1 = 0.0;       // on sum a1 Q
    double delta_y1e1 = 0.0;     // on sum a2 Q E
    double delta_y1ebar1 = 0.0;  // on sum a1 Q (1-E)
    double delta_e1 = 0.0;       // additive term of methods 3/4
};

struct MethodBound {
    Method method = Method::M1;
    double e_z1_upper = 0.5;
    int chi = 9;
    bool feasible = false;
    DeviationTerms diagnostics;
};

// gamma_bar(a,b,c,d) of the hypergeometric phase-error correction.  A negative
// radicand (log argument < 1) means the zero-deviation tail bound already
// meets the failure budget a; `radicand_ok` reports that condition and `value`
// is then 0.
struct GammaResult {
    double value = 0.0;
    bool radicand_ok = true;
};

GammaResult gamma_bar(double a, double b, double c, double d);

// sqrt(t ln(1/eps) / 2) * Width(w)
double hoeffding_dev(double t, double eps, const WeightSet& w);

DeviationTerms deviation_terms(const ObservedStats& stats, const DecoyCoefficients& coeffs,
                               std::span<const double> p_mu, double eps);

// Remark-3 closed form: sqrt(t) y W / ([y+(t-1)<w>+min][y+(t-1)<w>+max]).
// nullopt when a denominator is nonpositive.
std::optional<double> rhat_approx(double t, double y, double w_mean, const WeightSet& w);

// Centering-sequence configuration for the method-4 integral form.  Groups are
// the distinct weight values in descending order with their (real-valued)
// multiplicities.
struct CenteringConfig {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
    WeightSet value_set;
    std::vector<double> group_weights;  // descending
    std::vector<double> group_counts;   // n^(i), sum = t
};

// k-term closed form of the integral approximation of the Cor.-2 r-hat sum.
// nullopt when the configuration is infeasible (x outside the value range,
// nonpositive denominators, or the base feasibility condition fails).
std::optional<double> rhat_method4(const CenteringConfig& cfg);

MethodBound method1_e1(const ObservedStats& stats, const DecoyCoefficients& coeffs,
                       std::span<const double> p_mu, double eps_z, double eps_ze);
MethodBound method2_e1(const ObservedStats& stats, const DecoyCoefficients& coeffs,
                       std::span<const double> p_mu, double eps_ze, double eps_zebar);
MethodBound method3_e1(const ObservedStats& stats, const DecoyCoefficients& coeffs,
                       std::span<const double> p_mu, double eps_ze, double eps_zebar,
                       bool strict_feasibility = false);
MethodBound method4_e1(const ObservedStats& stats, const DecoyCoefficients& coeffs,
                       std::span<const double> p_mu, double eps_ze, double eps_zebar,
                       bool strict_feasibility = false);

// Dispatch with all per-term failure probabilities equal to eps.
MethodBound bound_for(Method m, const ObservedStats& stats, const DecoyCoefficients& coeffs,
                      std::span<const double> p_mu, double eps, bool strict_feasibility = false);

}  // namespace qkd
