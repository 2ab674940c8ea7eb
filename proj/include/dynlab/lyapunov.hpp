#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "dynlab/linalg.hpp"
#include "dynlab/rng.hpp"

// Benettin/QR tangent propagation. A system is any callable
//   Vec step(const Vec& z, Mat& D)
// returning the image point and writing the derivative of the step.

namespace dynlab {

using TangentSystem = std::function<Vec(const Vec&, Mat&)>;

// orbit segment + propagated frame + per-step log-norm ledger
struct TangentPropagation {
    std::vector<Vec> orbit_samples; // decimated
    Mat frame;                      // current orthonormal frame (columns)
    std::vector<double> ledger_sums; // accumulated log norms per column
    int steps = 0;
    bool degenerate = false;

    double volume_growth() const {
        double s = 0;
        for (double v : ledger_sums) s += v;
        return s;
    }
};

struct LyapunovReport {
    std::vector<double> exponents;                 // per step, sorted descending
    std::vector<std::vector<double>> traces;       // running estimates, decimated
    int n_steps = 0;
    uint64_t seed = 0;
    bool degenerate = false;
    double exponent_sum() const {
        double s = 0;
        for (double e : exponents) s += e;
        return s;
    }
};

// Top-k exponents by QR-reorthonormalized tangent propagation. The initial
// frame is seeded deterministically; rank loss aborts with the degenerate flag.
inline LyapunovReport lyapunov_spectrum(const TangentSystem& sys, Vec z0, int n_steps,
                                        int k_vectors, uint64_t seed) {
    if (n_steps < 1000) throw std::invalid_argument("lyapunov_spectrum: n_steps >= 1e3");
    int m = static_cast<int>(z0.size());
    if (k_vectors > m) throw std::invalid_argument("lyapunov_spectrum: k_vectors <= dim");
    Rng rng(seed);
    Mat Q(m, k_vectors);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k_vectors; ++j) Q(i, j) = rng.uniform(-1.0, 1.0);
    mgs_lognorms(Q); // orthonormalize the start frame

    LyapunovReport rep;
    rep.n_steps = n_steps;
    rep.seed = seed;
    std::vector<double> sums(k_vectors, 0.0);
    int trace_stride = std::max(1, n_steps / 200);
    rep.traces.assign(k_vectors, {});

    Vec z = std::move(z0);
    Mat D;
    for (int s = 1; s <= n_steps; ++s) {
        z = sys(z, D);
        Q = matmul(D, Q);
        auto logs = mgs_lognorms(Q);
        for (int j = 0; j < k_vectors; ++j) {
            if (!std::isfinite(logs[j])) {
                rep.degenerate = true;
                rep.exponents.assign(k_vectors, 0.0);
                return rep;
            }
            sums[j] += logs[j];
        }
        if (s % trace_stride == 0)
            for (int j = 0; j < k_vectors; ++j) rep.traces[j].push_back(sums[j] / s);
    }
    rep.exponents.resize(k_vectors);
    for (int j = 0; j < k_vectors; ++j) rep.exponents[j] = sums[j] / n_steps;
    std::sort(rep.exponents.rbegin(), rep.exponents.rend());
    return rep;
}

// Same propagation, exposed as the raw ledger (used by the splitting estimator
// and by tests that audit volume growth).
inline TangentPropagation propagate_tangent(const TangentSystem& sys, Vec z0, int n_steps,
                                            int k_vectors, uint64_t seed, int sample_stride = 0) {
    int m = static_cast<int>(z0.size());
    Rng rng(seed);
    TangentPropagation tp;
    tp.frame = Mat(m, k_vectors);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k_vectors; ++j) tp.frame(i, j) = rng.uniform(-1.0, 1.0);
    mgs_lognorms(tp.frame);
    tp.ledger_sums.assign(k_vectors, 0.0);

    Vec z = std::move(z0);
    Mat D;
    for (int s = 1; s <= n_steps; ++s) {
        z = sys(z, D);
        tp.frame = matmul(D, tp.frame);
        auto logs = mgs_lognorms(tp.frame);
        for (int j = 0; j < k_vectors; ++j) {
            if (!std::isfinite(logs[j])) {
                tp.degenerate = true;
                return tp;
            }
            tp.ledger_sums[j] += logs[j];
        }
        if (sample_stride > 0 && s % sample_stride == 0) tp.orbit_samples.push_back(z);
        tp.steps = s;
    }
    return tp;
}

} // namespace dynlab
