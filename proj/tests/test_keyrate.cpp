#include <doctest.h>

#include <cmath>

#include "qkd/keyrate.hpp"

using namespace qkd;

namespace {

ProtocolParams fixture_params(double s_x, double p_x = 0.9) {
    ProtocolParams params;
    params.intensities = IntensityVector::validated({0.5, 0.1, 1e-6});
    params.p_mu = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    params.p_basis_x = p_x;
    params.raw_key_length = s_x;
    return params;
}

// Pinned annealer optimum for k = 3, s_X = 1e9 (regression anchor).
ProtocolParams pinned_k3_1e9() {
    ProtocolParams params;
    params.intensities = IntensityVector::validated({0.204, 0.104, 1e-6});
    params.p_mu = {0.617, 0.269, 0.114};
    params.p_basis_x = 0.909;
    params.raw_key_length = 1e9;
    return params;
}

// Infinite-key rate of the base expression at the method's algebraic e1 ratio.
double asymptotic_rate(const ProtocolParams& params, const ObservedStats& stats, Method method) {
    const auto coeffs = decoy_coefficients(params.intensities);
    double s1q = 0, s2qe = 0, s1qeb = 0, mexp = 0, mem = 0;
    for (std::size_t i = 0; i < params.p_mu.size(); ++i) {
        s1q += coeffs.a1[i] * stats.q_z[i];
        s2qe += coeffs.a2[i] * stats.q_z[i] * stats.e_z[i];
        s1qeb += coeffs.a1[i] * stats.q_z[i] * (1.0 - stats.e_z[i]);
        mexp += params.p_mu[i] * std::exp(-params.intensities.mus[i]);
        mem += params.p_mu[i] * params.intensities.mus[i] * std::exp(-params.intensities.mus[i]);
    }
    const double e1 = method == Method::M1 ? s2qe / s1q : s2qe / (s1qeb + s2qe);
    const auto b = b_weights(coeffs, e1, params.p_basis_x, mexp, mem);
    double sum_bq = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) sum_bq += b[i] * stats.q_x[i];
    const double px2 = params.p_basis_x * params.p_basis_x;
    return sum_bq - px2 * leakage(stats, params.p_mu);
}

}  // namespace

TEST_CASE("binary entropy") {
    CHECK(binary_entropy(0.5) == 1.0);
    CHECK(binary_entropy(0.0) == 0.0);
    CHECK(binary_entropy(1.0) == 0.0);
    CHECK(binary_entropy(0.11) == doctest::Approx(0.49991595816452799564).epsilon(1e-13));
    CHECK_THROWS_AS(binary_entropy(-0.1), std::domain_error);
    CHECK_THROWS_AS(binary_entropy(1.1), std::domain_error);
}

TEST_CASE("leakage") {
    const auto params = fixture_params(1e7);
    auto stats = observe(ChannelModel{}, params);
    SUBCASE("error-free channel leaks nothing") {
        for (auto& e : stats.e_x) e = 0.0;
        CHECK(leakage(stats, params.p_mu) == 0.0);
    }
    SUBCASE("maximally noisy channel leaks the mean gain") {
        for (auto& e : stats.e_x) e = 0.5;
        CHECK(leakage(stats, params.p_mu) ==
              doctest::Approx(mean(params.p_mu, stats.q_x)).epsilon(1e-13));
    }
    SUBCASE("fixture regression") {
        CHECK(leakage(stats, params.p_mu) == doctest::Approx(7.598119117969e-05).epsilon(1e-9));
    }
}

TEST_CASE("phase error") {
    const auto params = fixture_params(1e7);
    const auto stats = observe(ChannelModel{}, params);
    const auto coeffs = decoy_coefficients(params.intensities);

    SUBCASE("clamps at one half") {
        CHECK(phase_error(0.5, params, stats, coeffs, 1e-10).e_p == 0.5);
    }
    SUBCASE("huge samples collapse the correction") {
        const auto big = fixture_params(1e16);
        const auto big_stats = observe(ChannelModel{}, big);
        const auto pe = phase_error(0.08, big, big_stats, coeffs, 1e-3);
        CHECK(pe.e_p == doctest::Approx(0.08).epsilon(1e-6));
    }
    SUBCASE("fixture regression") {
        const auto pe = phase_error(0.13, params, stats, coeffs, 1e-10);
        CHECK(pe.gamma_ok);
        CHECK(pe.e_p > 0.13);
        CHECK(pe.e_p == doctest::Approx(0.137173827891).epsilon(1e-8));
    }
    CHECK_THROWS_AS(phase_error(0.6, params, stats, coeffs, 1e-10), std::domain_error);
}

TEST_CASE("secure rate matches the asymptotic expression at huge s_X") {
    auto params = pinned_k3_1e9();
    params.raw_key_length = 1e32;
    const auto stats = observe(ChannelModel{}, params);
    const SecurityBudget budget;
    for (Method m : {Method::M1, Method::M2, Method::M3, Method::M4}) {
        const auto finite = detail::rate_at_eps(params, stats, m, budget, 1e-9, false);
        const double reference = asymptotic_rate(params, stats, m);
        CHECK(finite.rate == doctest::Approx(reference).epsilon(1e-12));
    }
}

TEST_CASE("secure rate fixed point") {
    const auto params = pinned_k3_1e9();
    const auto stats = observe(ChannelModel{}, params);
    const SecurityBudget budget;

    SUBCASE("per-method regression values at the pinned optimum") {
        const auto r1 = secure_rate(params, stats, Method::M1, budget);
        const auto r2 = secure_rate(params, stats, Method::M2, budget);
        const auto r3 = secure_rate(params, stats, Method::M3, budget);
        const auto r4 = secure_rate(params, stats, Method::M4, budget);
        CHECK(r1.rate == doctest::Approx(1.52966607e-5).epsilon(1e-6));
        CHECK(r2.rate == doctest::Approx(1.57554908e-5).epsilon(1e-6));
        CHECK(r3.rate == doctest::Approx(1.57167400e-5).epsilon(1e-6));
        CHECK(r4.rate == doctest::Approx(1.58374899e-5).epsilon(1e-6));
        for (const auto* r : {&r1, &r2, &r3, &r4}) {
            CHECK(r->converged);
            CHECK(r->feasible);
            // fixed-point residual at convergence
            CHECK(std::abs(r->eps_sec - budget.kappa * r->ell_final) <= 1e-12 * r->eps_sec);
        }
    }
    SUBCASE("rate non-decreasing in s_X for every method") {
        for (Method m : {Method::M1, Method::M2, Method::M3, Method::M4}) {
            double prev = -1.0;
            for (double exponent = 5.0; exponent <= 11.0; exponent += 1.0) {
                auto p = pinned_k3_1e9();
                p.raw_key_length = std::pow(10.0, exponent);
                const auto st = observe(ChannelModel{}, p);
                const auto r = secure_rate(p, st, m, budget);
                CHECK(r.rate >= prev - 1e-15);
                prev = r.rate;
            }
        }
    }
    SUBCASE("strict feasibility mode runs and never helps the adversary") {
        for (Method m : {Method::M3, Method::M4}) {
            const auto lenient = secure_rate(params, stats, m, budget, false);
            const auto strict = secure_rate(params, stats, m, budget, true);
            CHECK(strict.rate <= lenient.rate + 1e-15);
            CHECK(strict.bound.e_z1_upper >= lenient.bound.e_z1_upper - 1e-15);
        }
    }
    SUBCASE("unclamped rate never exceeds the asymptotic expression") {
        const double reference = asymptotic_rate(params, stats, Method::M2);
        for (double exponent = 5.0; exponent <= 13.0; exponent += 2.0) {
            auto p = pinned_k3_1e9();
            p.raw_key_length = std::pow(10.0, exponent);
            const auto st = observe(ChannelModel{}, p);
            const auto r = secure_rate(p, st, Method::M2, budget);
            CHECK(r.rate_raw <= reference + 1e-15);
        }
    }
    SUBCASE("dead channel reports zero, not an error") {
        ChannelModel long_fiber;
        long_fiber.length_km = 400.0;
        auto p = fixture_params(1e6);
        const auto st = observe(long_fiber, p);
        const auto r = secure_rate(p, st, Method::M2, budget);
        CHECK(r.rate == 0.0);
        CHECK_FALSE(r.feasible);
    }
}

TEST_CASE("two-intensity protocols evaluate without error") {
    ProtocolParams params;
    params.intensities = IntensityVector::validated({0.5, 0.1});
    params.p_mu = {0.7, 0.3};
    params.p_basis_x = 0.9;
    params.raw_key_length = 1e9;
    const auto stats = observe(ChannelModel{}, params);
    CHECK_NOTHROW(secure_rate(params, stats, Method::M1, SecurityBudget{}));
}

TEST_CASE("evaluate_methods") {
    const auto params = pinned_k3_1e9();
    const auto stats = observe(ChannelModel{}, params);
    const SecurityBudget budget;
    const auto all = evaluate_methods(
        params, stats, {Method::M1, Method::M2, Method::M3, Method::M4}, budget);
    CHECK(all.per_method.size() == 4);
    CHECK(all.best_rate >= all.per_method[0].rate);
    CHECK_THROWS_AS(evaluate_methods(params, stats, {}, budget), ConfigError);
}
