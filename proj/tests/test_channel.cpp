#include <doctest.h>

#include <cmath>

#include "qkd/channel.hpp"

using namespace qkd;

namespace {

ProtocolParams fixture_params(double p_x = 0.9, double s_x = 1e7) {
    ProtocolParams params;
    params.intensities = IntensityVector::validated({0.5, 0.1, 1e-6});
    params.p_mu = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    params.p_basis_x = p_x;
    params.raw_key_length = s_x;
    return params;
}

}  // namespace

TEST_CASE("transmittance") {
    CHECK(transmittance(0.0).channel == 1.0);
    CHECK(transmittance(0.0).system == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(transmittance(100.0).channel == doctest::Approx(0.01).epsilon(1e-14));
    CHECK(transmittance(100.0).system == doctest::Approx(0.001).epsilon(1e-14));
    CHECK(transmittance(50.0).channel == doctest::Approx(0.1).epsilon(1e-14));
    CHECK_THROWS_AS(transmittance(-1.0), std::domain_error);
}

TEST_CASE("gain and error") {
    const ChannelModel model;  // 100 km reference defaults

    SUBCASE("vacuum pulses click on dark counts with error 1/2") {
        const auto ge = gain_and_error(model, 0.0);
        CHECK(ge.gain ==
              doctest::Approx((1.0 + model.p_afterpulse) * 2.0 * model.p_darkcount).epsilon(1e-12));
        CHECK(ge.error_rate == doctest::Approx(0.5).epsilon(1e-12));  // exact in the expm1 form
    }
    SUBCASE("frozen values at the reference parameters") {
        const auto ge5 = gain_and_error(model, 0.5);
        CHECK(ge5.gain == doctest::Approx(0.00052111739781993260739).epsilon(1e-13));
        CHECK(ge5.error_rate == doctest::Approx(0.068236241209681592471).epsilon(1e-13));
        const auto ge1 = gain_and_error(model, 0.1);
        CHECK(ge1.gain == doctest::Approx(0.00010524267537956879209).epsilon(1e-13));
        CHECK(ge1.error_rate == doctest::Approx(0.07241737640259439979).epsilon(1e-13));
    }
    SUBCASE("noiseless detector gives zero error for bright pulses") {
        ChannelModel clean;
        clean.p_afterpulse = 0.0;
        clean.p_darkcount = 0.0;
        clean.e_misalign = 0.0;
        CHECK(gain_and_error(clean, 0.3).error_rate == 0.0);
        CHECK_THROWS_AS(gain_and_error(clean, 0.0), std::domain_error);
    }
    SUBCASE("gain is strictly increasing and error stays in (0, 1/2]") {
        double prev_gain = -1.0;
        for (int i = 0; i <= 100; ++i) {
            const auto ge = gain_and_error(model, 0.01 * i);
            CHECK(ge.gain > prev_gain);
            CHECK(ge.error_rate > 0.0);
            CHECK(ge.error_rate <= 0.5);
            prev_gain = ge.gain;
        }
    }
    CHECK_THROWS_AS(gain_and_error(model, -0.1), std::domain_error);
}

TEST_CASE("derive counts") {
    SUBCASE("symmetric bases give s_Z = s_X") {
        auto params = fixture_params(0.5, 12345.0);
        const std::vector<double> q{3e-4, 1e-4, 1e-6};
        const std::vector<double> e{0.05, 0.06, 0.5};
        const auto counts = derive_counts(params, q, q, e);
        CHECK(counts.s_z == doctest::Approx(12345.0).epsilon(1e-12));
    }
    SUBCASE("error-free channel puts everything in the clean bucket") {
        auto params = fixture_params();
        const std::vector<double> q{3e-4, 1e-4, 1e-6};
        const std::vector<double> zero{0.0, 0.0, 0.0};
        const auto counts = derive_counts(params, q, q, zero);
        CHECK(counts.s_z_err == 0.0);
        CHECK(counts.s_z_ok == counts.s_z);
    }
    SUBCASE("frozen fixture counts") {
        const auto params = fixture_params();
        const auto stats = observe(ChannelModel{}, params);
        CHECK(stats.s_z == doctest::Approx(123456.79012345679).epsilon(1e-12));
        CHECK(stats.s_z_err == doctest::Approx(8616.78131636518577).epsilon(1e-11));
        CHECK(stats.s_z_ok == doctest::Approx(114840.008807091604).epsilon(1e-11));
        CHECK(stats.s_z_err + stats.s_z_ok == doctest::Approx(stats.s_z).epsilon(1e-12));
    }
    SUBCASE("homogeneous of degree one in s_X") {
        const auto a = observe(ChannelModel{}, fixture_params(0.9, 1e6));
        const auto b = observe(ChannelModel{}, fixture_params(0.9, 7e6));
        CHECK(b.s_z == doctest::Approx(7.0 * a.s_z).epsilon(1e-12));
        CHECK(b.s_z_err == doctest::Approx(7.0 * a.s_z_err).epsilon(1e-12));
    }
    SUBCASE("degenerate channel") {
        auto params = fixture_params();
        const std::vector<double> zero{0.0, 0.0, 0.0};
        const std::vector<double> e{0.1, 0.1, 0.1};
        CHECK_THROWS_AS(derive_counts(params, zero, zero, e), std::domain_error);
    }
}

TEST_CASE("observe with sampling noise stays close to the model at large s_X") {
    const auto params = fixture_params(0.9, 1e9);
    const ChannelModel model;
    const auto clean = observe(model, params);
    const auto noisy = observe_sampled(model, params, 99);
    for (int i = 0; i < 3; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        CHECK(noisy.q_x[ii] == doctest::Approx(clean.q_x[ii]).epsilon(2e-2));
        CHECK(noisy.e_z[ii] == doctest::Approx(clean.e_z[ii]).epsilon(2e-1));
    }
    // identical seed reproduces the draw
    const auto again = observe_sampled(model, params, 99);
    CHECK(again.q_x == noisy.q_x);
    CHECK(again.e_z == noisy.e_z);
}
