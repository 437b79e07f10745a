#include "qkd/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace qkd {

int chi_for(Method m) { return m == Method::M4 ? 10 : 9; }

std::string method_name(Method m) {
    switch (m) {
        case Method::M1: return "M1";
        case Method::M2: return "M2";
        case Method::M3: return "M3";
        case Method::M4: return "M4";
    }
    return "M?";
}

std::optional<Method> parse_method(const std::string& name) {
    if (name == "M1" || name == "m1" || name == "1") return Method::M1;
    if (name == "M2" || name == "m2" || name == "2") return Method::M2;
    if (name == "M3" || name == "m3" || name == "3") return Method::M3;
    if (name == "M4" || name == "m4" || name == "4") return Method::M4;
    return std::nullopt;
}

GammaResult gamma_bar(double a, double b, double c, double d) {
    if (!(a > 0.0 && a < 1.0)) throw std::domain_error("gamma_bar: a outside (0,1)");
    if (!(b >= 0.0 && b <= 1.0)) throw std::domain_error("gamma_bar: b outside [0,1]");
    if (!(c > 0.0 && d > 0.0)) throw std::domain_error("gamma_bar: c, d must be positive");
    if (b == 0.0 || b == 1.0) return {0.0, true};  // limit convention
    const double variance_scale = (c + d) * (1.0 - b) * b / (c * d);
    const double log_arg = (c + d) / (2.0 * std::numbers::pi * c * d * (1.0 - b) * b * a * a);
    if (log_arg < 1.0) return {0.0, false};
    return {std::sqrt(variance_scale * std::log(log_arg)), true};
}

double hoeffding_dev(double t, double eps, const WeightSet& w) {
    if (t < 1.0) throw std::domain_error("hoeffding_dev: t must be >= 1");
    if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("hoeffding_dev: eps outside (0,1)");
    return std::sqrt(t * std::log(1.0 / eps) / 2.0) * w.width();
}

namespace {

// Sums and widths shared by the four method bounds.
struct ZSums {
    double s1q;    // sum a1 Q
    double s2qe;   // sum a2 Q E
    double s1qe;   // sum a1 Q E
    double s1qeb;  // sum a1 Q (1-E)
    double mean_q;
    double mean_qe;
    double mean_qeb;
    WeightSet w1;  // { a1_n / p_n }
    WeightSet w2;  // { a2_n / p_n }
};

ZSums z_sums(const ObservedStats& stats, const DecoyCoefficients& coeffs,
             std::span<const double> p_mu) {
    const std::size_t k = stats.q_z.size();
    if (coeffs.a1.size() != k || p_mu.size() != k || stats.e_z.size() != k) {
        throw std::invalid_argument("bounds: size mismatch between stats, coeffs and p_mu");
    }
    ZSums z{};
    CompensatedSum s1q, s2qe, s1qe, s1qeb, mq, mqe;
    z.w1.values.resize(k);
    z.w2.values.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        if (!(p_mu[i] > 0.0)) throw std::domain_error("bounds: zero intensity probability");
        const double q = stats.q_z[i];
        const double e = stats.e_z[i];
        s1q.add(coeffs.a1[i] * q);
        s2qe.add(coeffs.a2[i] * q * e);
        s1qe.add(coeffs.a1[i] * q * e);
        s1qeb.add(coeffs.a1[i] * q * (1.0 - e));
        mq.add(p_mu[i] * q);
        mqe.add(p_mu[i] * q * e);
        z.w1.values[i] = coeffs.a1[i] / p_mu[i];
        z.w2.values[i] = coeffs.a2[i] / p_mu[i];
    }
    z.s1q = s1q.value();
    z.s2qe = s2qe.value();
    z.s1qe = s1qe.value();
    z.s1qeb = s1qeb.value();
    z.mean_q = mq.value();
    z.mean_qe = mqe.value();
    z.mean_qeb = z.mean_q - z.mean_qe;
    return z;
}

DeviationTerms deltas(const ZSums& z, double s_z, double eps) {
    if (!(s_z > 0.0)) throw std::domain_error("bounds: s_Z must be positive");
    if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("bounds: eps outside (0,1)");
    const double log_term = std::log(1.0 / eps);
    DeviationTerms d;
    d.delta_y1 = z.mean_q * std::sqrt(log_term / (2.0 * s_z)) * z.w1.width();
    d.delta_y1e1 = std::sqrt(z.mean_q * z.mean_qe * log_term / (2.0 * s_z)) * z.w2.width();
    d.delta_y1ebar1 = std::sqrt(z.mean_q * z.mean_qeb * log_term / (2.0 * s_z)) * z.w1.width();
    return d;
}

double clamp_half(double v) { return std::max(0.0, std::min(0.5, v)); }

MethodBound infeasible(Method m, DeviationTerms d) { return {m, 0.5, chi_for(m), false, d}; }

// Shared ratio of methods 3 and 4: s2qe / (y + s2qe) with y the deviation-
// corrected lower bound on Y1 ebar1.
struct RatioParts {
    double y;
    double ratio;
    bool ok;
};

RatioParts method34_ratio(const ZSums& z, const DeviationTerms& d) {
    RatioParts r{};
    r.y = z.s1qeb - d.delta_y1ebar1;
    const double denom = r.y + z.s2qe;
    if (r.y <= 0.0 || denom <= 0.0) {
        r.ok = false;
        return r;
    }
    r.ratio = z.s2qe / denom;
    r.ok = true;
    return r;
}

// Value set {<Q_Z> a2_n / (p_n s_Z)} with expected group counts of the
// erroneous Z draws, weights descending.  `x_numerator` is the lower bound on
// the drawn total (method 4 subtracts its deviation, method 3 does not).
CenteringConfig centering_config(const ObservedStats& stats, const ZSums& z,
                                 std::span<const double> p_mu, double y, double x_numerator) {
    CenteringConfig cfg;
    cfg.t = stats.s_z_err;
    cfg.y = y;
    cfg.x = x_numerator / stats.s_z_err;
    const std::size_t k = z.w2.values.size();
    std::vector<std::pair<double, double>> group(k);
    cfg.value_set.values.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double scaled = z.mean_q * z.w2.values[i] / stats.s_z;
        const double count =
            z.mean_qe > 0.0 ? stats.s_z_err * p_mu[i] * stats.q_z[i] * stats.e_z[i] / z.mean_qe
                            : 0.0;
        group[i] = {scaled, count};
        cfg.value_set.values[i] = scaled;
    }
    std::sort(group.begin(), group.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    cfg.group_weights.resize(k);
    cfg.group_counts.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        cfg.group_weights[i] = group[i].first;
        cfg.group_counts[i] = group[i].second;
    }
    return cfg;
}

// Cor.-2 feasibility in strict mode.  delta is the stated envelope
// 2 W + (3M - 3m + 2) W^2 / D with the population size identified with t.
// The supremum of the (m-1)-draw partial sum is the descending prefix sum,
// piecewise linear in m, so checking every group boundary covers all m.
bool strict_centering_ok(const CenteringConfig& cfg) {
    const double lo = cfg.value_set.min();
    const double hi = cfg.value_set.max();
    const double w_width = hi - lo;
    if (w_width == 0.0) return true;
    if (cfg.x < lo || cfg.x > hi) return false;
    double total = 0.0;
    for (std::size_t g = 0; g < cfg.group_weights.size(); ++g) {
        total += cfg.group_weights[g] * cfg.group_counts[g];
    }
    if (!(cfg.y + total > w_width)) return false;
    const double t = cfg.t;
    const double big_m = t;
    const auto admissible = [&](double m, double prefix) {
        const double sup_partial = std::max(0.0, prefix);
        const double base = cfg.y + (t - m + 1.0) * cfg.x + sup_partial + lo;
        if (base <= 0.0) return false;
        const double delta_env =
            2.0 * w_width + (3.0 * big_m - 3.0 * m + 2.0) * w_width * w_width / base;
        const double denom = 2.0 * big_m - t - m + 1.0;
        if (denom <= 0.0) return false;
        return cfg.x <= (2.0 * total - sup_partial + cfg.y - delta_env) / denom;
    };
    double m = 1.0;
    double prefix = 0.0;
    if (!admissible(m, prefix)) return false;
    for (std::size_t g = 0; g < cfg.group_weights.size(); ++g) {
        m += cfg.group_counts[g];
        prefix += cfg.group_weights[g] * cfg.group_counts[g];
        if (!admissible(std::min(m, t), prefix)) return false;
    }
    return true;
}

// Antiderivative (in the base A, with B = A + W) of W^2 / (A^2 B^2):
// G(A) = -1/A - 1/B + (2/W) ln(B/A).  For W << A the closed form cancels to
// O((W/A)^2 / A); the series in u = W/A evaluates that difference directly.
double method4_antiderivative(double base, double total_width) {
    const double u = total_width / base;
    if (u >= 0.5) {
        return -1.0 / base - 1.0 / (base + total_width) + (2.0 / total_width) * std::log1p(u);
    }
    double sum = 0.0;
    double term = u * u;
    for (int m = 2; m < 120; ++m) {
        const double coeff = static_cast<double>(m - 1) / static_cast<double>(m + 1);
        const double add = term * coeff * ((m % 2 == 0) ? -1.0 : 1.0);
        sum += add;
        if (std::abs(add) < 1e-19 * std::abs(sum) + 1e-320) break;
        term *= u;
    }
    return sum / base;
}

}  // namespace

DeviationTerms deviation_terms(const ObservedStats& stats, const DecoyCoefficients& coeffs,
                               std::span<const double> p_mu, double eps) {
    return deltas(z_sums(stats, coeffs, p_mu), stats.s_z, eps);
}

std::optional<double> rhat_approx(double t, double y, double w_mean, const WeightSet& w) {
    if (t < 1.0) throw std::domain_error("rhat_approx: t must be >= 1");
    const double lo = y + (t - 1.0) * w_mean + w.min();
    const double hi = y + (t - 1.0) * w_mean + w.max();
    if (lo <= 0.0 || hi <= 0.0) return std::nullopt;
    return std::sqrt(t) * y * w.width() / (lo * hi);
}

std::optional<double> rhat_method4(const CenteringConfig& cfg) {
    const std::size_t groups = cfg.group_weights.size();
    if (groups == 0 || cfg.group_counts.size() != groups) {
        throw std::invalid_argument("rhat_method4: empty or mismatched groups");
    }
    const double lo = cfg.value_set.min();
    const double hi = cfg.value_set.max();
    const double total_width = hi - lo;
    if (total_width == 0.0) return 0.0;
    if (cfg.x < lo || cfg.x > hi) return std::nullopt;  // anchor outside [ess inf, ess sup]
    if (!(cfg.y > 0.0)) return std::nullopt;

    double drawn_sum = 0.0;
    for (std::size_t g = 0; g < groups; ++g) {
        if (cfg.group_counts[g] < 0.0) throw std::invalid_argument("rhat_method4: negative count");
        if (g + 1 < groups && cfg.group_weights[g] < cfg.group_weights[g + 1]) {
            throw std::invalid_argument("rhat_method4: group weights must be descending");
        }
        drawn_sum += cfg.group_counts[g] * cfg.group_weights[g];
    }
    if (!(cfg.y + drawn_sum > total_width)) return std::nullopt;

    double r2 = 0.0;
    double n_before = 0.0;
    double sum_before = 0.0;
    for (std::size_t g = 0; g < groups; ++g) {
        const double n = cfg.group_counts[g];
        if (n <= 0.0) continue;
        const double w = cfg.group_weights[g];
        const double dw = w - cfg.x;
        const double base0 = cfg.y + (cfg.t - n_before) * cfg.x + sum_before + lo;
        const double base1 = base0 + n * dw;
        if (base0 <= 0.0 || base1 <= 0.0) return std::nullopt;
        if (std::abs(n * dw) < 1e-9 * base0) {
            const double mid = base0 + 0.5 * n * dw;
            const double r = cfg.y * total_width / (mid * (mid + total_width));
            r2 += n * r * r;
        } else {
            r2 += cfg.y * cfg.y / dw *
                  (method4_antiderivative(base1, total_width) -
                   method4_antiderivative(base0, total_width));
        }
        n_before += n;
        sum_before += n * w;
    }
    if (!(r2 >= 0.0)) return std::nullopt;
    return std::sqrt(r2);
}

MethodBound method1_e1(const ObservedStats& stats, const DecoyCoefficients& coeffs,
                       std::span<const double> p_mu, double eps_z, double eps_ze) {
    const auto z = z_sums(stats, coeffs, p_mu);
    auto d = deltas(z, stats.s_z, eps_z);
    d.delta_y1e1 = deltas(z, stats.s_z, eps_ze).delta_y1e1;
    const double denom = z.s1q - d.delta_y1;
    if (denom <= 0.0) return infeasible(Method::M1, d);
    const double bound = clamp_half((z.s2qe + d.delta_y1e1) / denom);
    return {Method::M1, bound, chi_for(Method::M1), true, d};
}

MethodBound method2_e1(const ObservedStats& stats, const DecoyCoefficients& coeffs,
                       std::span<const double> p_mu, double eps_ze, double eps_zebar) {
    const auto z = z_sums(stats, coeffs, p_mu);
    auto d = deltas(z, stats.s_z, eps_ze);
    d.delta_y1ebar1 = deltas(z, stats.s_z, eps_zebar).delta_y1ebar1;
    const double denom = z.s1qeb + z.s2qe - d.delta_y1ebar1 + d.delta_y1e1;
    if (denom <= 0.0) return infeasible(Method::M2, d);
    const double bound = clamp_half((z.s2qe + d.delta_y1e1) / denom);
    return {Method::M2, bound, chi_for(Method::M2), true, d};
}

MethodBound method3_e1(const ObservedStats& stats, const DecoyCoefficients& coeffs,
                       std::span<const double> p_mu, double eps_ze, double eps_zebar,
                       bool strict_feasibility) {
    const auto z = z_sums(stats, coeffs, p_mu);
    auto d = deltas(z, stats.s_z, eps_ze);
    d.delta_y1ebar1 = deltas(z, stats.s_z, eps_zebar).delta_y1ebar1;
    const auto rp = method34_ratio(z, d);
    if (!rp.ok) return infeasible(Method::M3, d);

    const double prefactor =
        std::sqrt(z.mean_q * z.mean_qe * std::log(1.0 / eps_ze) / (2.0 * stats.s_z));
    const double middle = (1.0 - z.mean_q / (stats.s_z * z.mean_qe)) * z.s1qe;
    const double tail_scale = z.mean_q * z.mean_q / (stats.s_z * stats.s_z * z.mean_qe);
    const double f_max = rp.y + middle + tail_scale * z.w2.max();
    const double f_min = rp.y + middle + tail_scale * z.w2.min();
    if (f_max <= 0.0 || f_min <= 0.0) return infeasible(Method::M3, d);
    d.delta_e1 = prefactor * rp.y * z.w2.width() / (f_max * f_min);

    if (strict_feasibility && stats.s_z_err > 0.0) {
        const auto cfg = centering_config(stats, z, p_mu, rp.y, z.s1qe);
        if (!strict_centering_ok(cfg)) return infeasible(Method::M3, d);
    }

    const double bound = clamp_half(rp.ratio + d.delta_e1);
    return {Method::M3, bound, chi_for(Method::M3), true, d};
}

MethodBound method4_e1(const ObservedStats& stats, const DecoyCoefficients& coeffs,
                       std::span<const double> p_mu, double eps_ze, double eps_zebar,
                       bool strict_feasibility) {
    const auto z = z_sums(stats, coeffs, p_mu);
    auto d = deltas(z, stats.s_z, eps_ze);
    d.delta_y1ebar1 = deltas(z, stats.s_z, eps_zebar).delta_y1ebar1;
    const auto rp = method34_ratio(z, d);
    if (!rp.ok || stats.s_z_err <= 0.0) return infeasible(Method::M4, d);

    const auto cfg = centering_config(stats, z, p_mu, rp.y, z.s1qe - d.delta_y1e1);
    if (strict_feasibility && !strict_centering_ok(cfg)) return infeasible(Method::M4, d);

    const auto rhat = rhat_method4(cfg);
    if (!rhat) return infeasible(Method::M4, d);
    d.delta_e1 = *rhat * std::sqrt(std::log(1.0 / eps_ze) / 2.0);
    const double bound = clamp_half(rp.ratio + d.delta_e1);
    return {Method::M4, bound, chi_for(Method::M4), true, d};
}

MethodBound bound_for(Method m, const ObservedStats& stats, const DecoyCoefficients& coeffs,
                      std::span<const double> p_mu, double eps, bool strict_feasibility) {
    switch (m) {
        case Method::M1: return method1_e1(stats, coeffs, p_mu, eps, eps);
        case Method::M2: return method2_e1(stats, coeffs, p_mu, eps, eps);
        case Method::M3: return method3_e1(stats, coeffs, p_mu, eps, eps, strict_feasibility);
        case Method::M4: return method4_e1(stats, coeffs, p_mu, eps, eps, strict_feasibility);
    }
    throw std::invalid_argument("bound_for: unknown method");
}

}  // namespace qkd
