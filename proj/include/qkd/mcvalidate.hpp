#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qkd {

// Finite population: counts[j] objects carry values[j].
struct Population {
    std::vector<double> values;
    std::vector<int> counts;

    int total() const;
    double mean() const;   // population mean
    double width() const;  // max - min over represented values
    void validate() const;
};

// Uniform draw of t values without replacement; deterministic given the seed.
std::vector<double> sample_without_replacement(const Population& pop, int t, std::uint64_t seed);

struct TailCheck {
    double empirical_rate = 0.0;
    double analytic_bound = 1.0;  // exp(-2 delta^2 / (t width^2))
    int violations = 0;
    int trials = 0;
};

// Fraction of trials with sum(draws) - E[sum] >= delta versus the
// centering-sum tail bound.
TailCheck tail_violation_rate(const Population& pop, int t, double delta, int trials,
                              std::uint64_t seed);

// Exact upper-tail probability Pr(sum - E >= delta) for a two-value population.
double hypergeom_tail_two_value(const Population& pop, int t, double delta);

struct CenteringReport {
    bool pass = false;
    int steps_checked = 0;
    int states_checked = 0;
    std::string detail;
};

// Exhaustive check that E[V_m - V_{m-1} | V_{m-1} = v] is non-increasing in v
// for the running-sum functional.  States collapse to value-count compositions,
// so populations up to M <= 40 are tractable.
CenteringReport centering_check_sum(const Population& pop, int t, double tolerance = 0.0);

// Same check for the ratio functional
//   f_m = ((t-m) x + S_m) / (y + (t-m) x + S_m),
// enumerated exhaustively (M <= 12).
CenteringReport centering_check_ratio(const Population& pop, int t, double x, double y,
                                      double tolerance = 1e-12);

// Largest anchor x the sufficient condition admits for the ratio functional
// (with the correction term set to its stated envelope).
double centering_x_bound(const Population& pop, int t, double y);

// Combined report: sum functional, plus the ratio functional at an anchor
// chosen within the admissible range.
CenteringReport centering_check(const Population& pop, int t);

}  // namespace qkd
