#pragma once

#include <vector>

#include "qkd/numeric.hpp"

namespace qkd {

struct IntensityOptions {
    double min_spacing = 0.1;   // adjacent gap floor, numerical-stability guard
    bool relax_spacing = false;
    int max_k = 10;
    bool allow_large_k = false;
};

// Ordered photon intensities mu_1 > mu_2 > ... > mu_k >= 0, k >= 2.
struct IntensityVector {
    std::vector<double> mus;

    int k() const { return static_cast<int>(mus.size()); }

    static IntensityVector validated(std::vector<double> mus,
                                     const IntensityOptions& opts = {});
};

// k0 = 1 for even k, 2 for odd k.
int parity_index(int k);

// S_n for n = 1..k: the elementary symmetric polynomial of degree k - j0 - 1
// in the intensities with index in [j0, k] \ {n}.  Degree 0 gives the empty
// product 1.  j0 = parity_index(k) serves the a0/a2 family; the a1 family uses
// j0 = 3 - parity_index(k).
std::vector<double> elementary_symmetric_sums(const std::vector<double>& mus, int j0);

struct DecoyCoefficients {
    std::vector<double> a0;
    std::vector<double> a1;
    std::vector<double> a2;
    int k0 = 0;

    int k() const { return static_cast<int>(a0.size()); }
};

// Closed-form decoy linear-combination coefficients:
//   sum_n a0_n Q_mu_n       <= Y_0
//   sum_n a1_n Q_mu_n       <= Y_1
//   sum_n a1_n Q_mu_n E_n   <= Y_1 e_1 <= sum_n a2_n Q_mu_n E_n
//   sum_n a1_n Q_mu_n Ebar_n <= Y_1 (1 - e_1)
// a0/a2 run over n in [k0, k]; a1 over n in [3-k0, k]; entries outside the
// range are exact zeros.  Products and symmetric sums for the a1 family run
// over the a1 index range itself (for k >= 3), which is what makes the Y_1
// combination a valid one-sided estimator; see README for the k = 2 special
// case.
DecoyCoefficients decoy_coefficients(const IntensityVector& mus);

// b_n = p_x^2 { <e^-mu> a0_n + <mu e^-mu> a1_n [1 - H2(e_p)] }
std::vector<double> b_weights(const DecoyCoefficients& coeffs, double e_p, double p_x,
                              double mean_exp_neg_mu, double mean_mu_exp_neg_mu);

}  // namespace qkd
