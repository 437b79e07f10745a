#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace qkd {

// Neumaier-compensated accumulator. The decoy linear combinations cancel
// heavily (terms alternate in sign and exceed the result by orders of
// magnitude), so plain summation loses digits we later divide by.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
    CompensatedSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < a.size(); ++i) acc.add(a[i] * b[i]);
    return acc.value();
}

// H_2(x) = -x log2 x - (1-x) log2 (1-x), with H_2(0) = H_2(1) = 0.
inline double binary_entropy(double x) {
    if (!(x >= 0.0 && x <= 1.0)) {
        throw std::domain_error("binary_entropy: argument outside [0,1]");
    }
    if (x == 0.0 || x == 1.0) return 0.0;
    return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

// Bounded value set; width = max - min (ess sup minus ess inf for a finite set).
struct WeightSet {
    std::vector<double> values;

    double min() const {
        require_nonempty();
        return *std::min_element(values.begin(), values.end());
    }
    double max() const {
        require_nonempty();
        return *std::max_element(values.begin(), values.end());
    }
    double width() const { return max() - min(); }

private:
    void require_nonempty() const {
        if (values.empty()) throw std::domain_error("WeightSet: empty value set");
    }
};

inline double width(const WeightSet& w) { return w.width(); }

inline double mean(std::span<const double> p, std::span<const double> v) {
    return dot(p, v);
}

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace qkd
