#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace dynlab {

// Welford accumulator; variance is the sample variance (denominator n-1).
struct RunningStats {
    size_t n = 0;
    double mean = 0;
    double m2 = 0;
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();

    void add(double x) {
        ++n;
        double d1 = x - mean;
        mean += d1 / static_cast<double>(n);
        m2 += d1 * (x - mean);
        if (x < min) min = x;
        if (x > max) max = x;
    }

    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double stderr_mean() const { return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

struct ConfidenceInterval {
    double estimate = 0;
    double lo = 0;
    double hi = 0;
    double stderr_mean = 0;

    bool contains(double x) const { return lo <= x && x <= hi; }
    bool strictly_below(double x) const { return hi < x; }
    bool strictly_above(double x) const { return lo > x; }
};

// 95% normal-approximation CI for the mean
inline ConfidenceInterval ci95(const RunningStats& s) {
    double se = s.stderr_mean();
    return {s.mean, s.mean - 1.959963984540054 * se, s.mean + 1.959963984540054 * se, se};
}

inline ConfidenceInterval ci95(const std::vector<double>& xs) {
    RunningStats s;
    for (double x : xs) s.add(x);
    return ci95(s);
}

} // namespace dynlab
