#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "qkd/mcvalidate.hpp"
#include "qkd/rng.hpp"

using namespace qkd;

TEST_CASE("sample_without_replacement") {
    const Population pop{{0.0, 1.0, 3.0}, {4, 3, 2}};

    SUBCASE("drawing everything permutes the multiset") {
        auto draws = sample_without_replacement(pop, 9, 42);
        std::sort(draws.begin(), draws.end());
        CHECK(draws == std::vector<double>{0, 0, 0, 0, 1, 1, 1, 3, 3});
    }
    SUBCASE("single-value population gives a constant sequence") {
        const Population single{{2.5}, {6}};
        const auto draws = sample_without_replacement(single, 4, 7);
        for (double v : draws) CHECK(v == 2.5);
    }
    SUBCASE("over-drawing is rejected") {
        CHECK_THROWS_AS(sample_without_replacement(pop, 10, 1), std::domain_error);
    }
    SUBCASE("first-draw frequencies match the population within 3 sigma") {
        const int trials = 100000;
        std::map<double, int> hits;
        for (int i = 0; i < trials; ++i) {
            const auto draws =
                sample_without_replacement(pop, 1, derive_seed(12345, static_cast<std::uint64_t>(i)));
            ++hits[draws[0]];
        }
        const int total = pop.total();
        for (std::size_t j = 0; j < pop.values.size(); ++j) {
            const double p = static_cast<double>(pop.counts[j]) / total;
            const double sigma = std::sqrt(p * (1.0 - p) / trials);
            const double freq = static_cast<double>(hits[pop.values[j]]) / trials;
            CHECK(std::abs(freq - p) <= 3.0 * sigma);
        }
    }
}

TEST_CASE("tail_violation_rate") {
    const Population pop{{0.0, 1.0}, {50, 50}};

    SUBCASE("impossible deviations never occur") {
        const auto check = tail_violation_rate(pop, 20, 21.0, 500, 3);
        CHECK(check.empirical_rate == 0.0);
    }
    SUBCASE("delta 0 has trivial analytic bound 1") {
        const auto check = tail_violation_rate(pop, 20, 0.0, 200, 3);
        CHECK(check.analytic_bound == 1.0);
        CHECK(check.empirical_rate <= 1.0);
    }
    SUBCASE("empirical rate under the bound, cross-checked exactly") {
        const int trials = 100000;
        const auto check = tail_violation_rate(pop, 20, 4.0, trials, 99);
        const double exact = hypergeom_tail_two_value(pop, 20, 4.0);
        CHECK(exact <= check.analytic_bound);
        const double sigma = std::sqrt(exact * (1.0 - exact) / trials);
        CHECK(std::abs(check.empirical_rate - exact) <= 5.0 * sigma + 1e-6);
        CHECK(check.empirical_rate <=
              check.analytic_bound + 3.0 * std::sqrt(check.analytic_bound / trials));
    }
}

TEST_CASE("hypergeom_tail_two_value") {
    SUBCASE("matches exhaustive enumeration on a small population") {
        const Population pop{{0.0, 1.0}, {6, 4}};
        const int t = 4;
        // enumerate all draw subsets exactly via the hypergeometric pmf identity
        auto choose = [](int n, int k) {
            double c = 1.0;
            for (int i = 0; i < k; ++i) c = c * (n - i) / (i + 1);
            return c;
        };
        const double expectation = t * pop.mean();
        for (double delta : {-1.0, 0.0, 0.3, 0.9, 1.7, 2.5}) {
            double ref = 0.0;
            for (int ones = 0; ones <= t; ++ones) {
                const double draws_sum = ones;  // value 1 counts, value 0 does not
                if (draws_sum - expectation >= delta) {
                    ref += choose(4, ones) * choose(6, t - ones) / choose(10, t);
                }
            }
            CHECK(hypergeom_tail_two_value(pop, t, delta) ==
                  doctest::Approx(std::min(1.0, ref)).epsilon(1e-12));
        }
    }
    SUBCASE("never exceeds the centering-sum bound") {
        const Population pop{{0.0, 1.0}, {70, 30}};
        const int t = 25;
        const double w = pop.width();
        for (int g = 0; g <= 12; ++g) {
            const double delta = 0.5 * g;
            const double bound = std::exp(-2.0 * delta * delta / (t * w * w));
            CHECK(hypergeom_tail_two_value(pop, t, delta) <= bound + 1e-12);
        }
    }
}

TEST_CASE("centering_check_sum") {
    SUBCASE("two-value population, M = 6, t = 3") {
        const auto report = centering_check_sum(Population{{0.0, 1.0}, {3, 3}}, 3, 0.0);
        CHECK(report.pass);
        CHECK(report.steps_checked == 3);
    }
    SUBCASE("t = 1 is vacuous") {
        const auto report = centering_check_sum(Population{{0.0, 1.0}, {3, 3}}, 1, 0.0);
        CHECK(report.pass);
    }
    SUBCASE("all two- and three-value populations with M <= 8 pass exactly") {
        for (int m_total = 2; m_total <= 8; ++m_total) {
            for (int m1 = 1; m1 < m_total; ++m1) {
                const Population two{{0.0, 1.0}, {m1, m_total - m1}};
                for (int t = 1; t <= m_total; ++t) {
                    CHECK(centering_check_sum(two, t, 0.0).pass);
                }
                for (int m2 = 1; m1 + m2 < m_total; ++m2) {
                    const Population three{{0.0, 1.0, 3.0}, {m1, m2, m_total - m1 - m2}};
                    for (int t = 1; t <= m_total; ++t) {
                        CHECK(centering_check_sum(three, t, 0.0).pass);
                    }
                }
            }
        }
    }
    SUBCASE("enumeration caps") {
        CHECK_THROWS_AS(centering_check_sum(Population{{0.0, 1.0}, {30, 30}}, 5, 0.0),
                        std::domain_error);
    }
}

TEST_CASE("centering_check_ratio") {
    const Population pop{{0.0, 1.0}, {4, 4}};
    SUBCASE("admissible anchor passes") {
        const double y = 6.0;
        const double x = std::clamp(centering_x_bound(pop, 4, y), 0.0, 1.0);
        const auto report = centering_check_ratio(pop, 4, x, y);
        CHECK(report.pass);
    }
    SUBCASE("anchor beyond the admissible range breaks centering") {
        // expected-fail fixture: x at the essential supremum with small y
        const Population skew{{0.0, 1.0}, {6, 2}};
        const auto report = centering_check_ratio(skew, 6, 1.0, 0.55);
        CHECK_FALSE(report.pass);
    }
    SUBCASE("population cap") {
        CHECK_THROWS_AS(centering_check_ratio(Population{{0.0, 1.0}, {10, 10}}, 5, 0.5, 3.0),
                        std::domain_error);
    }
}

TEST_CASE("centering_check combined wrapper") {
    CHECK(centering_check(Population{{0.0, 1.0}, {3, 3}}, 3).pass);
    CHECK(centering_check(Population{{0.0, 1.0, 3.0}, {4, 3, 2}}, 4).pass);
}
