#pragma once

#include <cmath>
#include <limits>

#include "dynlab/flatness.hpp"
#include "dynlab/linalg.hpp"

// The divergence-free disk field V = (dH/dx2, -dH/dx1) from a stream function
//   H(x) = c_H * W(|x|^2) * (x1^2 - x2^2 + x1 x2),
// where W is a smooth collar, identically 1 for |x|^2 <= R_V^2 and flat to all
// orders at the boundary. H is a first integral of V, so orbits ride level
// curves; the collar keeps V boundary-flat, which the flatness suite verifies.

namespace dynlab {

struct StreamFunction {
    double c_h = 0.05;       // overall amplitude; 0 freezes the disk factor
    double r_v2 = 0.0;       // collar onset in |x|^2 (0: graded over the whole disk)
    SmoothBridge collar{7.5};

    double w(double s) const { return s <= r_v2 ? 1.0 : collar.value((1.0 - s) / (1.0 - r_v2)); }
    double wp(double s) const {
        return s <= r_v2 ? 0.0 : collar.deriv((1.0 - s) / (1.0 - r_v2)) / (-(1.0 - r_v2));
    }
    double wpp(double s) const {
        double den = 1.0 - r_v2;
        return s <= r_v2 ? 0.0 : collar.deriv2((1.0 - s) / den) / (den * den);
    }

    double value(const Vec& x) const {
        double s = x[0] * x[0] + x[1] * x[1];
        return c_h * w(s) * quad(x);
    }

    Vec gradient(const Vec& x) const {
        double s = x[0] * x[0] + x[1] * x[1];
        double q = quad(x);
        double W = w(s), Wp = wp(s);
        return {c_h * (Wp * 2.0 * x[0] * q + W * q1(x)), c_h * (Wp * 2.0 * x[1] * q + W * q2(x))};
    }

    // Hessian of H
    Mat hessian(const Vec& x) const {
        double s = x[0] * x[0] + x[1] * x[1];
        double q = quad(x);
        double W = w(s), Wp = wp(s), Wpp = wpp(s);
        double gq[2] = {q1(x), q2(x)};
        double hq[2][2] = {{2.0, 1.0}, {1.0, -2.0}};
        Mat H(2, 2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                double t = Wpp * 4.0 * x[i] * x[j] * q;
                t += 2.0 * Wp * ((i == j ? 1.0 : 0.0) * q + x[i] * gq[j] + x[j] * gq[i]);
                t += W * hq[i][j];
                H(i, j) = c_h * t;
            }
        return H;
    }

    static double quad(const Vec& x) { return x[0] * x[0] - x[1] * x[1] + x[0] * x[1]; }
    static double q1(const Vec& x) { return 2.0 * x[0] + x[1]; }
    static double q2(const Vec& x) { return -2.0 * x[1] + x[0]; }
};

struct DiskFlowField {
    StreamFunction stream;

    Vec value(const Vec& x) const {
        Vec g = stream.gradient(x);
        return {g[1], -g[0]};
    }

    // DV, the 2x2 derivative of the field
    Mat deriv(const Vec& x) const {
        Mat H = stream.hessian(x);
        Mat D(2, 2);
        D(0, 0) = H(1, 0);
        D(0, 1) = H(1, 1);
        D(1, 0) = -H(0, 0);
        D(1, 1) = -H(0, 1);
        return D;
    }

    double divergence(const Vec& x) const {
        Mat D = deriv(x);
        return D(0, 0) + D(1, 1);
    }

    // log |V(x)|, stable inside the boundary collar where |V| underflows:
    // grad H = c_H W(s) [ (d log W/ds) 2x q + grad q ], s = |x|^2
    double log_speed(const Vec& x) const {
        double s = x[0] * x[0] + x[1] * x[1];
        if (s >= 1.0 || stream.c_h == 0.0) return -std::numeric_limits<double>::infinity();
        double u = (1.0 - s) / (1.0 - stream.r_v2);
        double log_w = stream.collar.log_value(std::min(u, 1.0));
        double dlogw_ds = u >= 1.0 ? 0.0 : -stream.collar.dlog(u) / (1.0 - stream.r_v2);
        double q = StreamFunction::quad(x);
        double g1 = dlogw_ds * 2.0 * x[0] * q + StreamFunction::q1(x);
        double g2 = dlogw_ds * 2.0 * x[1] * q + StreamFunction::q2(x);
        return std::log(stream.c_h) + log_w + 0.5 * std::log(g1 * g1 + g2 * g2);
    }
};

} // namespace dynlab
