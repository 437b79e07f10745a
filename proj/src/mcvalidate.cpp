#include "qkd/mcvalidate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "qkd/numeric.hpp"
#include "qkd/rng.hpp"

namespace qkd {

int Population::total() const { return std::accumulate(counts.begin(), counts.end(), 0); }

double Population::mean() const {
    double num = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) num += values[j] * counts[j];
    return num / total();
}

double Population::width() const {
    double lo = values.front(), hi = values.front();
    for (std::size_t j = 0; j < values.size(); ++j) {
        if (counts[j] <= 0) continue;
        lo = std::min(lo, values[j]);
        hi = std::max(hi, values[j]);
    }
    return hi - lo;
}

void Population::validate() const {
    if (values.empty() || values.size() != counts.size()) {
        throw std::invalid_argument("Population: values/counts mismatch");
    }
    for (int c : counts) {
        if (c < 0) throw std::invalid_argument("Population: negative count");
    }
    if (total() < 1) throw std::invalid_argument("Population: empty population");
    for (std::size_t i = 0; i < values.size(); ++i) {
        for (std::size_t j = i + 1; j < values.size(); ++j) {
            if (values[i] == values[j]) {
                throw std::invalid_argument("Population: duplicate value class");
            }
        }
    }
}

std::vector<double> sample_without_replacement(const Population& pop, int t,
                                               std::uint64_t seed) {
    pop.validate();
    const int m = pop.total();
    if (t > m) throw std::domain_error("sample_without_replacement: t exceeds population size");
    std::vector<int> remaining = pop.counts;
    int left = m;
    Rng rng(seed);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) {
        std::uint64_t pick = rng.below(static_cast<std::uint64_t>(left));
        for (std::size_t j = 0; j < remaining.size(); ++j) {
            if (pick < static_cast<std::uint64_t>(remaining[j])) {
                out.push_back(pop.values[j]);
                --remaining[j];
                --left;
                break;
            }
            pick -= static_cast<std::uint64_t>(remaining[j]);
        }
    }
    return out;
}

TailCheck tail_violation_rate(const Population& pop, int t, double delta, int trials,
                              std::uint64_t seed) {
    pop.validate();
    if (trials < 1) throw std::domain_error("tail_violation_rate: trials must be >= 1");
    if (t < 1 || t > pop.total()) throw std::domain_error("tail_violation_rate: bad draw count");
    const double expectation = t * pop.mean();
    const double w = pop.width();

    TailCheck check;
    check.trials = trials;
    if (w == 0.0) {
        check.analytic_bound = delta > 0.0 ? 0.0 : 1.0;
    } else {
        check.analytic_bound = std::exp(-2.0 * delta * delta / (t * w * w));
    }
    for (int trial = 0; trial < trials; ++trial) {
        const auto draws =
            sample_without_replacement(pop, t, derive_seed(seed, static_cast<std::uint64_t>(trial)));
        double sum = 0.0;
        for (double v : draws) sum += v;
        if (sum - expectation >= delta) ++check.violations;
    }
    check.empirical_rate = static_cast<double>(check.violations) / trials;
    return check;
}

namespace {

double log_choose(int n, int k) {
    if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double choose_weight(const Population& pop, const std::vector<int>& taken) {
    double logw = 0.0;
    for (std::size_t j = 0; j < taken.size(); ++j) {
        logw += log_choose(pop.counts[j], taken[j]);
    }
    return std::exp(logw);
}

// Enumerate compositions of `draws` items over the population classes.
void for_each_composition(const Population& pop, int draws,
                          const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> taken(pop.values.size(), 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t j, int left) {
        if (j + 1 == taken.size()) {
            if (left <= pop.counts[j]) {
                taken[j] = left;
                fn(taken);
            }
            return;
        }
        const int cap = std::min(left, pop.counts[j]);
        for (int take = 0; take <= cap; ++take) {
            taken[j] = take;
            rec(j + 1, left - take);
        }
    };
    rec(0, draws);
}

struct StateStat {
    double weight = 0.0;
    double weighted_increment = 0.0;
};

CenteringReport monotonicity_report(
    const Population& pop, int t,
    const std::function<double(int m, const std::vector<int>& taken, double s)>& conditional,
    double tolerance) {
    CenteringReport report;
    report.pass = true;
    for (int m = 1; m <= t; ++m) {
        std::map<double, StateStat> by_value;
        int states = 0;
        for_each_composition(pop, m - 1, [&](const std::vector<int>& taken) {
            double s = 0.0;
            for (std::size_t j = 0; j < taken.size(); ++j) s += taken[j] * pop.values[j];
            const double w = choose_weight(pop, taken);
            if (w <= 0.0) return;
            const double incr = conditional(m, taken, s);
            auto& st = by_value[s];
            st.weight += w;
            st.weighted_increment += w * incr;
            ++states;
        });
        report.states_checked += states;
        ++report.steps_checked;
        double prev_value = 0.0;
        double prev_expect = 0.0;
        bool have_prev = false;
        for (const auto& [value, st] : by_value) {
            const double expect = st.weighted_increment / st.weight;
            if (have_prev && expect > prev_expect + tolerance) {
                report.pass = false;
                std::ostringstream detail;
                detail << "E[U_" << m << "|v] rises from " << prev_expect << " at v=" << prev_value
                       << " to " << expect << " at v=" << value;
                report.detail = detail.str();
                return report;
            }
            prev_value = value;
            prev_expect = expect;
            have_prev = true;
        }
    }
    return report;
}

}  // namespace

double hypergeom_tail_two_value(const Population& pop, int t, double delta) {
    pop.validate();
    if (pop.values.size() != 2) {
        throw std::invalid_argument("hypergeom_tail_two_value: need exactly two value classes");
    }
    if (t < 1 || t > pop.total()) throw std::domain_error("hypergeom_tail_two_value: bad t");
    const double v0 = pop.values[0];
    const double v1 = pop.values[1];
    const int m0 = pop.counts[0];
    const int m = pop.total();
    const double ex = static_cast<double>(t) * m0 / m;  // E[# draws of value v0]
    const double diff = v0 - v1;
    const double log_total = log_choose(m, t);

    double tail = 0.0;
    const int x_lo = std::max(0, t - (m - m0));
    const int x_hi = std::min(t, m0);
    for (int x = x_lo; x <= x_hi; ++x) {
        // sum - E[sum] = (x - ex) * (v0 - v1)
        const double dev = (x - ex) * diff;
        if (dev >= delta) {
            tail += std::exp(log_choose(m0, x) + log_choose(m - m0, t - x) - log_total);
        }
    }
    return std::min(1.0, tail);
}

CenteringReport centering_check_sum(const Population& pop, int t, double tolerance) {
    pop.validate();
    const int m_total = pop.total();
    if (t < 1 || t > m_total) throw std::domain_error("centering_check_sum: bad t");
    if (m_total > 40) {
        throw std::domain_error("centering_check_sum: population too large for enumeration");
    }
    return monotonicity_report(
        pop, t,
        [&](int m, const std::vector<int>& taken, double) {
            double expect = 0.0;
            for (std::size_t j = 0; j < taken.size(); ++j) {
                expect += static_cast<double>(pop.counts[j] - taken[j]) * pop.values[j];
            }
            return expect / (m_total - m + 1);
        },
        tolerance);
}

CenteringReport centering_check_ratio(const Population& pop, int t, double x, double y,
                                      double tolerance) {
    pop.validate();
    const int m_total = pop.total();
    if (t < 1 || t > m_total) throw std::domain_error("centering_check_ratio: bad t");
    if (m_total > 12) {
        throw std::domain_error("centering_check_ratio: population too large for enumeration");
    }
    if (!(y > 0.0)) throw std::domain_error("centering_check_ratio: y must be positive");

    auto f = [&](int m, double s) {
        const double num = (t - m) * x + s;
        const double den = y + num;
        if (den <= 0.0) throw std::domain_error("centering_check_ratio: nonpositive denominator");
        return num / den;
    };
    return monotonicity_report(
        pop, t,
        [&](int m, const std::vector<int>& taken, double s) {
            const double prev = f(m - 1, s);
            double expect = 0.0;
            for (std::size_t j = 0; j < taken.size(); ++j) {
                const double p =
                    static_cast<double>(pop.counts[j] - taken[j]) / (m_total - m + 1);
                expect += p * (f(m, s + pop.values[j]) - prev);
            }
            return expect;
        },
        tolerance);
}

double centering_x_bound(const Population& pop, int t, double y) {
    pop.validate();
    const int m_total = pop.total();
    if (t < 1 || t > m_total) throw std::domain_error("centering_x_bound: bad t");
    const double w = pop.width();
    double total_value = 0.0;
    for (std::size_t j = 0; j < pop.values.size(); ++j) {
        total_value += pop.values[j] * pop.counts[j];
    }
    // descending-sorted population values for the sup of partial sums
    std::vector<double> sorted;
    for (std::size_t j = 0; j < pop.values.size(); ++j) {
        sorted.insert(sorted.end(), static_cast<std::size_t>(pop.counts[j]), pop.values[j]);
    }
    std::sort(sorted.begin(), sorted.end(), std::greater<>());

    double bound = std::numeric_limits<double>::infinity();
    double partial = 0.0;
    double sup_partial = 0.0;
    for (int m = 1; m <= t; ++m) {
        if (m >= 2) {
            partial += sorted[static_cast<std::size_t>(m) - 2];
            sup_partial = std::max(sup_partial, partial);
        }
        // correction-term envelope with the denominator taken at its floor y
        const double delta_env = 2.0 * w + (3.0 * m_total - 3.0 * m + 2.0) * w * w / y;
        const double denom = 2.0 * m_total - t - m + 1;
        if (denom <= 0.0) continue;
        bound = std::min(bound, (2.0 * total_value - sup_partial + y - delta_env) / denom);
    }
    return bound;
}

CenteringReport centering_check(const Population& pop, int t) {
    auto report = centering_check_sum(pop, t, 0.0);
    if (!report.pass) {
        report.detail = "sum functional: " + report.detail;
        return report;
    }
    // ratio functional at an anchor within the admissible range
    double lo = pop.values.front(), hi = pop.values.front();
    for (double v : pop.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double min_drawn = 0.0;
    {
        std::vector<double> sorted;
        for (std::size_t j = 0; j < pop.values.size(); ++j) {
            sorted.insert(sorted.end(), static_cast<std::size_t>(pop.counts[j]), pop.values[j]);
        }
        std::sort(sorted.begin(), sorted.end());
        for (int i = 0; i < t; ++i) min_drawn += sorted[static_cast<std::size_t>(i)];
    }
    const double y = pop.width() + std::max(0.0, -min_drawn) + 1.0 +
                     std::abs(hi) * t;  // keeps every denominator positive
    const double x = std::clamp(centering_x_bound(pop, t, y), lo, hi);
    auto ratio_report = centering_check_ratio(pop, t, x, y);
    ratio_report.steps_checked += report.steps_checked;
    ratio_report.states_checked += report.states_checked;
    if (!ratio_report.pass) {
        ratio_report.detail = "ratio functional: " + ratio_report.detail;
    }
    return ratio_report;
}

}  // namespace qkd
