#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qkd/coeffs.hpp"

namespace qkd {

// 100 km fiber model: afterpulsing, dark counts, optical misalignment.
struct ChannelModel {
    double length_km = 100.0;
    double p_afterpulse = 4e-2;
    double p_darkcount = 6e-7;
    double e_misalign = 5e-3;

    void validate() const;
};

struct Transmittance {
    double channel;  // eta_ch = 10^(-0.2 L / 10)
    double system;   // eta_sys = 0.1 eta_ch
};

Transmittance transmittance(double length_km);

struct GainError {
    double gain;        // Q
    double error_rate;  // E
};

// d_mu = 1 - (1 - 2 p_dc) e^(-eta_sys mu); Q = (1 + p_ap) d_mu;
// Q E = p_dc + e_mis (1 - e^(-eta_ch mu)) + p_ap d_mu / 2.
GainError gain_and_error(const ChannelModel& model, double mu);

struct ProtocolParams {
    IntensityVector intensities;
    std::vector<double> p_mu;  // intensity probabilities, sum to 1
    double p_basis_x = 0.0;    // probability of choosing the X basis
    double raw_key_length = 0.0;  // s_X, X-basis sifted detections

    int k() const { return intensities.k(); }
    void validate() const;
};

// Per-basis per-intensity observations plus derived sample counts.  Counts are
// kept as reals throughout.
struct ObservedStats {
    std::vector<double> q_x, e_x;  // X-basis gains / error rates
    std::vector<double> q_z, e_z;  // Z-basis gains / error rates
    double s_x = 0.0;              // raw key length
    double s_z = 0.0;              // Z-basis detections
    double s_z_err = 0.0;          // erroneous Z detections
    double s_z_ok = 0.0;           // error-free Z detections
};

struct Counts {
    double s_z;
    double s_z_err;
    double s_z_ok;
};

// s_Z = (1-p_X)^2 s_X <Q_Z> / (p_X^2 <Q_X>); the error split follows the
// observed error gains.
Counts derive_counts(const ProtocolParams& params, std::span<const double> q_x,
                     std::span<const double> q_z, std::span<const double> e_z);

// Noiseless statistics: observed gains/errors equal the model values.
ObservedStats observe(const ChannelModel& model, const ProtocolParams& params);

// Demonstration-only variant with binomial sampling noise on detections and
// errors (gaussian approximation for large counts).
ObservedStats observe_sampled(const ChannelModel& model, const ProtocolParams& params,
                              std::uint64_t seed);

}  // namespace qkd
