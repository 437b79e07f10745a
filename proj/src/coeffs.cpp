#include "qkd/coeffs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qkd {

namespace {

constexpr double kSpacingSlack = 1e-4;

// Signed product of (mu_n - mu_j) over j in idx \ {n}, factors multiplied in
// ascending magnitude.
double node_denominator(const std::vector<double>& mus, const std::vector<int>& idx, int n) {
    std::vector<double> factors;
    factors.reserve(idx.size());
    for (int j : idx) {
        if (j == n) continue;
        const double d = mus[n - 1] - mus[j - 1];
        if (d == 0.0) {
            throw std::domain_error("decoy_coefficients: coincident intensities");
        }
        factors.push_back(d);
    }
    std::sort(factors.begin(), factors.end(),
              [](double a, double b) { return std::abs(a) < std::abs(b); });
    double prod = 1.0;
    for (double f : factors) prod *= f;
    return prod;
}

// Elementary symmetric polynomial e_d of the given values (all nonnegative, so
// the DP has no cancellation).
double esym(std::vector<double> vals, int d) {
    if (d < 0) return 0.0;
    if (d == 0) return 1.0;
    if (d > static_cast<int>(vals.size())) return 0.0;
    std::sort(vals.begin(), vals.end());
    std::vector<double> e(static_cast<std::size_t>(d) + 1, 0.0);
    e[0] = 1.0;
    for (double v : vals) {
        for (int j = std::min<int>(d, static_cast<int>(vals.size())); j >= 1; --j) {
            e[static_cast<std::size_t>(j)] += v * e[static_cast<std::size_t>(j) - 1];
        }
    }
    return e[static_cast<std::size_t>(d)];
}

std::vector<double> values_at(const std::vector<double>& mus, const std::vector<int>& idx,
                              int skip) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (int j : idx) {
        if (j != skip) out.push_back(mus[j - 1]);
    }
    return out;
}

std::vector<int> index_range(int lo, int hi) {
    std::vector<int> idx;
    for (int i = lo; i <= hi; ++i) idx.push_back(i);
    return idx;
}

}  // namespace

IntensityVector IntensityVector::validated(std::vector<double> mus,
                                           const IntensityOptions& opts) {
    const int k = static_cast<int>(mus.size());
    if (k < 2) throw std::invalid_argument("IntensityVector: need k >= 2 intensities");
    if (k > opts.max_k && !opts.allow_large_k) {
        throw std::invalid_argument("IntensityVector: k exceeds the stability cap (use allow_large_k)");
    }
    if (mus.back() < 0.0) throw std::invalid_argument("IntensityVector: intensities must be >= 0");
    for (int i = 0; i + 1 < k; ++i) {
        const double gap = mus[static_cast<std::size_t>(i)] - mus[static_cast<std::size_t>(i) + 1];
        if (gap <= 0.0) {
            throw std::invalid_argument("IntensityVector: intensities must be strictly decreasing");
        }
        if (!opts.relax_spacing && gap < opts.min_spacing - kSpacingSlack) {
            throw std::invalid_argument("IntensityVector: adjacent intensity gap below min spacing");
        }
    }
    return IntensityVector{std::move(mus)};
}

int parity_index(int k) { return (k % 2 == 0) ? 1 : 2; }

std::vector<double> elementary_symmetric_sums(const std::vector<double>& mus, int j0) {
    const int k = static_cast<int>(mus.size());
    if (k < 2) throw std::invalid_argument("elementary_symmetric_sums: need k >= 2");
    if (j0 < 1 || j0 > k) throw std::invalid_argument("elementary_symmetric_sums: j0 out of range");
    const int degree = k - j0 - 1;
    const auto idx = index_range(j0, k);
    std::vector<double> s(static_cast<std::size_t>(k));
    for (int n = 1; n <= k; ++n) {
        s[static_cast<std::size_t>(n) - 1] = esym(values_at(mus, idx, n), degree);
    }
    return s;
}

DecoyCoefficients decoy_coefficients(const IntensityVector& iv) {
    const auto& mus = iv.mus;
    const int k = iv.k();
    if (k < 2) throw std::invalid_argument("decoy_coefficients: need k >= 2");
    const int k0 = parity_index(k);

    const auto idx_a = index_range(k0, k);  // a0 and a2 families
    // The a1 family sums over [3-k0, k]; its products and symmetric sums run
    // over that same index set.  k = 2 has a single a1 node and keeps the
    // degree-0 sum with products over [k0, k].
    const auto idx_b = (k == 2) ? idx_a : index_range(3 - k0, k);
    const int deg_a = static_cast<int>(idx_a.size()) - 2;
    const int deg_b = static_cast<int>(idx_b.size()) - 2;

    DecoyCoefficients out;
    out.k0 = k0;
    out.a0.assign(static_cast<std::size_t>(k), 0.0);
    out.a1.assign(static_cast<std::size_t>(k), 0.0);
    out.a2.assign(static_cast<std::size_t>(k), 0.0);

    for (int n : idx_a) {
        const double den = node_denominator(mus, idx_a, n);
        const double expmu = std::exp(mus[static_cast<std::size_t>(n) - 1]);
        const auto others = values_at(mus, idx_a, n);
        double prod = 1.0;
        for (double v : others) prod *= v;
        out.a0[static_cast<std::size_t>(n) - 1] = -expmu * prod / den;
        out.a2[static_cast<std::size_t>(n) - 1] = expmu * esym(others, deg_a) / den;
    }
    for (int n = 3 - k0; n <= k; ++n) {
        const double den = node_denominator(mus, idx_b, n);
        const double expmu = std::exp(mus[static_cast<std::size_t>(n) - 1]);
        out.a1[static_cast<std::size_t>(n) - 1] =
            -expmu * esym(values_at(mus, idx_b, n), deg_b) / den;
    }
    for (double v : out.a0) {
        if (!std::isfinite(v)) throw std::domain_error("decoy_coefficients: non-finite a0");
    }
    for (double v : out.a1) {
        if (!std::isfinite(v)) throw std::domain_error("decoy_coefficients: non-finite a1");
    }
    for (double v : out.a2) {
        if (!std::isfinite(v)) throw std::domain_error("decoy_coefficients: non-finite a2");
    }
    return out;
}

std::vector<double> b_weights(const DecoyCoefficients& coeffs, double e_p, double p_x,
                              double mean_exp_neg_mu, double mean_mu_exp_neg_mu) {
    if (!(e_p >= 0.0 && e_p <= 0.5)) {
        throw std::domain_error("b_weights: e_p outside [0, 1/2]");
    }
    if (!(p_x > 0.0 && p_x < 1.0)) {
        throw std::domain_error("b_weights: p_x outside (0, 1)");
    }
    const double one_minus_h2 = 1.0 - binary_entropy(e_p);
    const double px2 = p_x * p_x;
    std::vector<double> b(coeffs.a0.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        b[i] = px2 * (mean_exp_neg_mu * coeffs.a0[i] +
                      mean_mu_exp_neg_mu * coeffs.a1[i] * one_minus_h2);
    }
    return b;
}

}  // namespace qkd
