#include "qkd/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "qkd/rng.hpp"

namespace qkd {

void ChannelModel::validate() const {
    if (length_km < 0.0) throw std::domain_error("ChannelModel: negative fiber length");
    for (double p : {p_afterpulse, p_darkcount, e_misalign}) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::domain_error("ChannelModel: probability outside [0,1]");
        }
    }
}

Transmittance transmittance(double length_km) {
    if (length_km < 0.0) throw std::domain_error("transmittance: negative fiber length");
    const double eta_ch = std::pow(10.0, -0.2 * length_km / 10.0);
    return {eta_ch, 0.1 * eta_ch};
}

GainError gain_and_error(const ChannelModel& model, double mu) {
    if (mu < 0.0) throw std::domain_error("gain_and_error: negative intensity");
    const auto eta = transmittance(model.length_km);
    // d = 1 - (1 - 2 p_dc) e^(-eta_sys mu), in the cancellation-free expm1 form
    const double d = -std::expm1(-eta.system * mu) +
                     2.0 * model.p_darkcount * std::exp(-eta.system * mu);
    const double gain = (1.0 + model.p_afterpulse) * d;
    if (gain <= 0.0) {
        throw std::domain_error("gain_and_error: zero gain, error rate undefined");
    }
    const double gain_times_error = model.p_darkcount -
                                    model.e_misalign * std::expm1(-eta.channel * mu) +
                                    model.p_afterpulse * d / 2.0;
    return {gain, gain_times_error / gain};
}

void ProtocolParams::validate() const {
    const int n = k();
    if (static_cast<int>(p_mu.size()) != n) {
        throw std::invalid_argument("ProtocolParams: p_mu size mismatch");
    }
    double sum = 0.0;
    for (double p : p_mu) {
        if (!(p > 0.0 && p < 1.0)) {
            throw std::invalid_argument("ProtocolParams: intensity probabilities must lie in (0,1)");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("ProtocolParams: intensity probabilities must sum to 1");
    }
    if (!(p_basis_x > 0.0 && p_basis_x < 1.0)) {
        throw std::invalid_argument("ProtocolParams: p_basis_x outside (0,1)");
    }
    if (raw_key_length < 1.0) {
        throw std::invalid_argument("ProtocolParams: raw key length must be >= 1");
    }
}

Counts derive_counts(const ProtocolParams& params, std::span<const double> q_x,
                     std::span<const double> q_z, std::span<const double> e_z) {
    const auto& p = params.p_mu;
    const double mean_qx = mean(p, q_x);
    const double mean_qz = mean(p, q_z);
    if (mean_qx <= 0.0) throw std::domain_error("derive_counts: degenerate channel, <Q_X> = 0");
    std::vector<double> qe(q_z.size());
    for (std::size_t i = 0; i < qe.size(); ++i) qe[i] = q_z[i] * e_z[i];
    const double mean_qze = mean(p, qe);

    const double px = params.p_basis_x;
    const double pz = 1.0 - px;
    const double s_z = (pz * pz) * params.raw_key_length * mean_qz / (px * px * mean_qx);
    const double s_z_err = s_z * mean_qze / mean_qz;
    return {s_z, s_z_err, s_z - s_z_err};
}

ObservedStats observe(const ChannelModel& model, const ProtocolParams& params) {
    model.validate();
    params.validate();
    const int k = params.k();
    ObservedStats st;
    st.q_x.resize(static_cast<std::size_t>(k));
    st.e_x.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const auto ge = gain_and_error(model, params.intensities.mus[static_cast<std::size_t>(i)]);
        st.q_x[static_cast<std::size_t>(i)] = ge.gain;
        st.e_x[static_cast<std::size_t>(i)] = ge.error_rate;
    }
    st.q_z = st.q_x;  // basis-independent channel
    st.e_z = st.e_x;
    st.s_x = params.raw_key_length;
    const auto counts = derive_counts(params, st.q_x, st.q_z, st.e_z);
    st.s_z = counts.s_z;
    st.s_z_err = counts.s_z_err;
    st.s_z_ok = counts.s_z_ok;
    return st;
}

namespace {

// Binomial sample by gaussian approximation above a count threshold, exact
// inversion below it.  Demo-quality only.
double sample_binomial(Rng& rng, double n, double p) {
    if (n <= 0.0 || p <= 0.0) return 0.0;
    if (p >= 1.0) return n;
    const double mean_count = n * p;
    const double var = n * p * (1.0 - p);
    if (mean_count > 1e4) {
        const double x = mean_count + std::sqrt(var) * rng.gaussian();
        return std::min(n, std::max(0.0, x));
    }
    const int ni = static_cast<int>(std::llround(n));
    int hits = 0;
    for (int i = 0; i < ni; ++i) {
        if (rng.uniform() < p) ++hits;
    }
    return hits;
}

}  // namespace

ObservedStats observe_sampled(const ChannelModel& model, const ProtocolParams& params,
                              std::uint64_t seed) {
    auto st = observe(model, params);
    const int k = params.k();
    const double px = params.p_basis_x;
    const double mean_qx = mean(params.p_mu, st.q_x);
    const double pulses = params.raw_key_length / (px * px * mean_qx);
    Rng rng(derive_seed(seed, 0xc4a27));
    for (int basis = 0; basis < 2; ++basis) {
        const double pb = basis == 0 ? px : 1.0 - px;
        auto& q = basis == 0 ? st.q_x : st.q_z;
        auto& e = basis == 0 ? st.e_x : st.e_z;
        for (int i = 0; i < k; ++i) {
            const double sent = pulses * pb * pb * params.p_mu[static_cast<std::size_t>(i)];
            const double det = sample_binomial(rng, sent, q[static_cast<std::size_t>(i)]);
            const double err = sample_binomial(rng, det, e[static_cast<std::size_t>(i)]);
            if (sent > 0.0 && det > 0.0) {
                q[static_cast<std::size_t>(i)] = det / sent;
                e[static_cast<std::size_t>(i)] = err / det;
            }
        }
    }
    const auto counts = derive_counts(params, st.q_x, st.q_z, st.e_z);
    st.s_z = counts.s_z;
    st.s_z_err = counts.s_z_err;
    st.s_z_ok = counts.s_z_ok;
    return st;
}

}  // namespace qkd
