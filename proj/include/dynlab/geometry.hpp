#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dynlab/linalg.hpp"
#include "dynlab/toral.hpp"

// Points of the suspension manifold N = D^2 x L, the gluing normalization,
// and affine cylindrical charts aligned to the invariant bundles.
//
// Ambient layout of a point of N, for dimension m: coordinates
//   [0,1]   disk (x1, x2), x1^2 + x2^2 <= 1
//   [2..m-2] fiber y in T^{m-3}, each coordinate in [0,1)
//   [m-1]   suspension time tau in [0,1)
// All norms are taken in the product Euclidean metric.

namespace dynlab {

struct DiskPoint {
    double x1 = 0, x2 = 0;
    double norm() const { return std::hypot(x1, x2); }
};

struct TorusPoint {
    Vec y;
};

struct SuspensionPoint {
    DiskPoint x;
    TorusPoint fiber;
    double tau = 0;

    int dim() const { return static_cast<int>(fiber.y.size()) + 3; }

    Vec ambient() const {
        Vec v;
        v.reserve(fiber.y.size() + 3);
        v.push_back(x.x1);
        v.push_back(x.x2);
        for (double yi : fiber.y) v.push_back(yi);
        v.push_back(tau);
        return v;
    }

    static SuspensionPoint from_ambient(const Vec& v) {
        SuspensionPoint z;
        z.x = {v[0], v[1]};
        z.fiber.y.assign(v.begin() + 2, v.end() - 1);
        z.tau = v.back();
        return z;
    }
};

// Applies the mapping-torus gluing (y, 1) ~ (Ay, 0) until tau lands in [0,1).
// Negative overflow applies A^{-1}. Identity when tau is already normalized.
inline std::pair<TorusPoint, double> normalize_suspension(TorusPoint y, double tau,
                                                          const ToralAutomorphism& A) {
    if (!std::isfinite(tau)) throw std::invalid_argument("normalize_suspension: tau not finite");
    while (tau >= 1.0) {
        tau -= 1.0;
        y.y = A.apply(y.y);
    }
    while (tau < 0.0) {
        tau += 1.0;
        y.y = A.apply_inv(y.y);
    }
    for (double& v : y.y) v = mod1(v);
    return {std::move(y), tau};
}

// gluing count for a tau that ran past [0,1): how many times A acts
inline int gluing_count(double tau_unwrapped) { return static_cast<int>(std::floor(tau_unwrapped)); }

struct CylCoords {
    double rho = 0;
    double theta = 0;
    Vec zeta;
};

// Affine local chart at a base point: rows of P are the orthonormal frame
// (axis_u, axis_c, zeta_1, ..., zeta_{m-2}) in ambient coordinates. Valid in a
// ball of radius kChartExtent around the base, which for gamma0 < 0.1 stays
// inside one fundamental domain of the suspension.
struct CylChart {
    Vec base;     // ambient, tau component in (0.2, 0.8) by construction
    Mat P;        // m x m, rows = frame
    int m = 0, d = 0;
    double gamma0 = 0;

    static constexpr double kChartExtent = 0.2;

    Vec axis_u() const { return row(0); }
    Vec axis_c() const { return row(1); }
    Vec zeta_axis(int i) const { return row(2 + i); }

    Vec row(int i) const {
        Vec v(m);
        for (int j = 0; j < m; ++j) v[j] = P(i, j);
        return v;
    }

    // displacement with fiber coordinates wrapped to the nearest representative
    Vec displacement(const Vec& z) const {
        Vec dv(m);
        dv[0] = z[0] - base[0];
        dv[1] = z[1] - base[1];
        for (int i = 2; i < m - 1; ++i) dv[i] = wrap_centered(z[i] - base[i]);
        dv[m - 1] = z[m - 1] - base[m - 1];
        return dv;
    }

    std::optional<CylCoords> to_cylindrical(const Vec& z) const {
        Vec dv = displacement(z);
        if (std::fabs(dv[m - 1]) > kChartExtent || norm2(dv) > kChartExtent * 2) return std::nullopt;
        Vec c = matvec(P, dv);
        CylCoords out;
        out.rho = std::hypot(c[0], c[1]);
        out.theta = out.rho < 1e-300 ? 0.0 : std::atan2(c[1], c[0]); // theta := 0 on the axis
        if (out.theta < 0) out.theta += 2.0 * M_PI;
        out.zeta.assign(c.begin() + 2, c.end());
        return out;
    }

    Vec from_cylindrical(const CylCoords& c) const {
        Vec coords(m);
        coords[0] = c.rho * std::cos(c.theta);
        coords[1] = c.rho * std::sin(c.theta);
        for (int i = 0; i < m - 2; ++i) coords[2 + i] = c.zeta[i];
        Vec z = base;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) z[j] += P(i, j) * coords[i];
        for (int i = 2; i < m - 1; ++i) z[i] = mod1(z[i]);
        return z;
    }

    bool in_delta(const Vec& z) const {
        auto c = to_cylindrical(z);
        return c && c->rho <= gamma0 && norm2(c->zeta) <= gamma0;
    }
};

// Finite-horizon splitting data at a point. Dimension bookkeeping follows the
// pointwise partially hyperbolic convention: dim Es = m'+1, dim Ec = 1,
// dim Eu = m - m' - 2 with m' = floor((m-3)/2).
struct SplittingEstimate {
    Mat Es, Ec, Eu; // columns = basis vectors
    double lambda = 0, lambda_p = 1, mu_p = 1, mu = 0;
    bool rates_consistent = true;  // lambda < lambda_p <= 1 <= mu_p < mu
    bool disk_neutral = true;      // surrogate: disk directions carry no hyperbolicity
    std::string note;

    static int dim_es(int m) { return (m - 3) / 2 + 1; }
    static int dim_ec(int) { return 1; }
    static int dim_eu(int m) { return m - (m - 3) / 2 - 2; }
};

// Chart construction: axis_c parallel to the flow vector at the base, axis_u
// parallel to the lifted unstable eigendirection of the last Brin block, the
// zeta axes completed by Gram-Schmidt over the remaining coordinate directions.
inline CylChart cyl_chart_at(const Vec& z0, double gamma0, const ToralAutomorphism& A,
                             const Vec& flow_at_z0) {
    int m = static_cast<int>(z0.size());
    if (!(gamma0 > 0.0 && gamma0 < 0.1))
        throw std::invalid_argument("cyl_chart_at: gamma0 must lie in (0, 0.1)");
    double xnorm = norm2(flow_at_z0);
    if (xnorm < 1e-12)
        throw std::invalid_argument("cyl_chart_at: flow vector vanishes (boundary point)");

    CylChart chart;
    chart.base = z0;
    chart.m = m;
    chart.d = A.d;
    chart.gamma0 = gamma0;
    chart.P = Mat(m, m);

    Vec eu(m, 0.0);
    Vec eu_fiber = A.unstable_dir();
    for (int i = 0; i < A.d; ++i) eu[2 + i] = eu_fiber[i];

    Vec ec = (1.0 / xnorm) * flow_at_z0;

    std::vector<Vec> frame = {eu, ec};
    // candidate completions, in a fixed order: disk, fiber eigendirections, tau
    std::vector<Vec> cands;
    for (int j : {0, 1}) {
        Vec e(m, 0.0);
        e[j] = 1.0;
        cands.push_back(e);
    }
    for (const auto& b : A.blocks) {
        for (int w = static_cast<int>(b.eigenvalues.size()) - 1; w >= 0; --w) {
            Vec e(m, 0.0);
            Vec dir = A.embed(b, w);
            for (int i = 0; i < A.d; ++i) e[2 + i] = dir[i];
            cands.push_back(e);
        }
    }
    {
        Vec e(m, 0.0);
        e[m - 1] = 1.0;
        cands.push_back(e);
    }
    for (auto& cand : cands) {
        if (static_cast<int>(frame.size()) == m) break;
        Vec v = cand;
        for (const auto& f : frame) axpy(-dot(f, v), f, v);
        double n = norm2(v);
        if (n > 1e-8) frame.push_back((1.0 / n) * v);
    }
    if (static_cast<int>(frame.size()) != m) throw std::runtime_error("chart frame incomplete");
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) chart.P(i, j) = frame[i][j];
    return chart;
}

} // namespace dynlab
