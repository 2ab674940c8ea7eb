#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "dynlab/disk_flow.hpp"
#include "dynlab/fd.hpp"
#include "dynlab/flatness.hpp"
#include "dynlab/geometry.hpp"
#include "dynlab/toral.hpp"

// The suspension vector field X(x,y,tau) = (V(x), 0, alpha(x)) on N = D^2 x L,
// its volume-preserving flow with joint variational propagation, and the exact
// tube stepper used by the return-map machinery when the disk factor is frozen.

namespace dynlab {

struct SuspensionField {
    int m = 5;
    ToralAutomorphism A;
    DiskFlowField V;
    AlphaBump alpha;

    Vec eval(const Vec& z) const {
        Vec out(m, 0.0);
        Vec x = {z[0], z[1]};
        Vec v = V.value(x);
        out[0] = v[0];
        out[1] = v[1];
        out[m - 1] = alpha(x);
        return out;
    }

    // DX: disk block DV, tau row = grad alpha, fiber rows zero
    Mat deriv(const Vec& z) const {
        Mat D(m, m);
        Vec x = {z[0], z[1]};
        Mat dv = V.deriv(x);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) D(i, j) = dv(i, j);
        Vec ga = alpha.grad(x);
        D(m - 1, 0) = ga[0];
        D(m - 1, 1) = ga[1];
        return D;
    }
};

// Builds X = (V, 0, alpha). The collar decays must be compatible: V has to
// vanish strictly faster than alpha toward the boundary, otherwise the ratio
// alpha^{-1} V would not tend to zero there.
inline SuspensionField field_X(int m, const DiskFlowField& V, const AlphaBump& alpha) {
    double v_rate = V.stream.collar.eps * (1.0 - V.stream.r_v2) / 2.0;
    double a_rate = alpha.bridge.eps * (1.0 - alpha.u_inner);
    if (v_rate <= a_rate)
        throw std::invalid_argument("field_X: incompatible collars, alpha^-1 V would not vanish");
    SuspensionField X;
    X.m = m;
    X.A = make_brin_automorphism(m);
    X.V = V;
    X.alpha = alpha;
    return X;
}

struct FlowOpts {
    double h = 1e-3;
    bool with_jacobian = true;
    int audit_stride = 0;       // 0 disables the step-doubling audit
    double audit_budget = 1e-8; // per-step local error bound when auditing
};

struct FlowResult {
    Vec z;
    Mat J;
    int gluings = 0;
};

namespace flow_detail {

inline void rhs(const SuspensionField& X, const Vec& z, const Mat* J, Vec& dz, Mat* dJ) {
    dz = X.eval(z);
    if (J) {
        Mat D = X.deriv(z);
        *dJ = matmul(D, *J);
    }
}

inline void rk4_step(const SuspensionField& X, double h, Vec& z, Mat* J) {
    Vec k1, k2, k3, k4;
    Mat K1, K2, K3, K4;
    Mat* pK1 = J ? &K1 : nullptr;
    rhs(X, z, J, k1, pK1);

    Vec z2 = z;
    axpy(h / 2, k1, z2);
    Mat J2;
    if (J) {
        J2 = *J;
        for (size_t i = 0; i < J2.a.size(); ++i) J2.a[i] += h / 2 * K1.a[i];
    }
    rhs(X, z2, J ? &J2 : nullptr, k2, J ? &K2 : nullptr);

    Vec z3 = z;
    axpy(h / 2, k2, z3);
    Mat J3;
    if (J) {
        J3 = *J;
        for (size_t i = 0; i < J3.a.size(); ++i) J3.a[i] += h / 2 * K2.a[i];
    }
    rhs(X, z3, J ? &J3 : nullptr, k3, J ? &K3 : nullptr);

    Vec z4 = z;
    axpy(h, k3, z4);
    Mat J4;
    if (J) {
        J4 = *J;
        for (size_t i = 0; i < J4.a.size(); ++i) J4.a[i] += h * K3.a[i];
    }
    rhs(X, z4, J ? &J4 : nullptr, k4, J ? &K4 : nullptr);

    for (size_t i = 0; i < z.size(); ++i)
        z[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    if (J)
        for (size_t i = 0; i < J->a.size(); ++i)
            J->a[i] += h / 6 * (K1.a[i] + 2 * K2.a[i] + 2 * K3.a[i] + K4.a[i]);
}

} // namespace flow_detail

// Time-t map of the flow of X with the variational equation integrated jointly
// (classical fixed-step RK4). tau runs unwrapped during integration; the
// mapping-torus gluing is applied once at the end, with the exact block-A
// derivative on the fiber factor. t may be negative for internal backward use;
// the public contract is t in (0, 1].
inline FlowResult flow_map(const SuspensionField& X, double t, Vec z, const FlowOpts& opts = {}) {
    if (t == 0.0 || std::fabs(t) > 1.0) throw std::invalid_argument("flow_map: need 0 < |t| <= 1");
    int n = static_cast<int>(std::ceil(std::fabs(t) / opts.h - 1e-12));
    double hs = t / n;
    FlowResult res;
    res.z = std::move(z);
    res.J = opts.with_jacobian ? Mat::identity(X.m) : Mat();
    Mat* J = opts.with_jacobian ? &res.J : nullptr;
    for (int s = 0; s < n; ++s) {
        if (opts.audit_stride > 0 && s % opts.audit_stride == 0) {
            Vec zfull = res.z, zhalf = res.z;
            flow_detail::rk4_step(X, hs, zfull, nullptr);
            flow_detail::rk4_step(X, hs / 2, zhalf, nullptr);
            flow_detail::rk4_step(X, hs / 2, zhalf, nullptr);
            if (norm2(zfull - zhalf) > opts.audit_budget)
                throw std::runtime_error("flow_map: step rejected, local error over budget");
        }
        flow_detail::rk4_step(X, hs, res.z, J);
    }
    if (res.z[0] * res.z[0] + res.z[1] * res.z[1] > 1.0 + 1e-12)
        throw std::runtime_error("flow_map: disk invariant violated");
    // post-step gluing
    int k = gluing_count(res.z[X.m - 1]);
    res.gluings = k;
    if (k != 0) {
        Vec y(res.z.begin() + 2, res.z.end() - 1);
        for (int i = 0; i < std::abs(k); ++i) y = k > 0 ? X.A.apply(y) : X.A.apply_inv(y);
        for (int i = 0; i < X.A.d; ++i) res.z[2 + i] = y[i];
        res.z[X.m - 1] -= k;
        if (J) {
            // left-multiply by diag(I2, A^k, 1)
            for (int step = 0; step < std::abs(k); ++step) {
                Mat nj = *J;
                for (int c = 0; c < X.m; ++c) {
                    for (int r = 0; r < X.A.d; ++r) {
                        double s = 0;
                        for (int q = 0; q < X.A.d; ++q)
                            s += (k > 0 ? X.A.M(r, q) : X.A.Minv(r, q)) * (*J)(2 + q, c);
                        nj(2 + r, c) = s;
                    }
                }
                *J = nj;
            }
        }
    }
    for (int i = 0; i < X.A.d; ++i) res.z[2 + i] = mod1(res.z[2 + i]);
    return res;
}

// Exact stepper for the frozen-disk configuration (V == 0): the disk point
// never moves, tau advances linearly at speed alpha(x), and the fiber factor
// is the automorphism applied once per unit of tau. Bit-exact and O(d^2) per
// step, which is what makes desk-scale return statistics feasible.
struct TubeStepper {
    const SuspensionField* X = nullptr;
    double t = 1.0;

    TubeStepper(const SuspensionField& field, double t_step) : X(&field), t(t_step) {
        if (field.V.stream.c_h != 0.0)
            throw std::invalid_argument("TubeStepper: requires the frozen disk factor (c_H = 0)");
    }

    // advances z by the time-t flow; returns the gluing count of the step
    int step(Vec& z, int dir = +1) const {
        int m = X->m;
        double speed = X->alpha({z[0], z[1]});
        double tau = z[m - 1] + dir * t * speed;
        int k;
        if (dir > 0 && t * speed == 1.0) {
            k = 1; // exact: tau returns to itself
        } else if (dir < 0 && t * speed == 1.0) {
            k = -1;
        } else {
            k = gluing_count(tau);
            z[m - 1] = tau - k;
        }
        if (k != 0) {
            Vec y(z.begin() + 2, z.end() - 1);
            for (int i = 0; i < std::abs(k); ++i) y = k > 0 ? X->A.apply(y) : X->A.apply_inv(y);
            for (int i = 0; i < X->A.d; ++i) z[2 + i] = y[i];
        }
        return k;
    }
};

// ---------------------------------------------------------------------------
// C^r distance to the identity on a finite grid
// ---------------------------------------------------------------------------
struct CrGrid {
    std::vector<Vec> points;
    std::vector<bool> periodic; // per ambient coordinate
    double h = 1e-3;
};

// max over the grid and all multi-indices of order <= r of the finite-difference
// partials of (map - id), plus the order-0 sup
inline double cr_distance_to_identity(const std::function<Vec(const Vec&)>& map, int r,
                                      const CrGrid& grid) {
    if (r > 3) throw std::invalid_argument("cr_distance: r <= 3 (finite-difference depth)");
    if (grid.points.size() < 8) throw std::invalid_argument("cr_distance: grid too coarse");
    int m = static_cast<int>(grid.points.front().size());
    double worst = 0;
    for (int comp = 0; comp < m; ++comp) {
        bool per = comp < static_cast<int>(grid.periodic.size()) && grid.periodic[comp];
        ScalarField g = [&, comp, per](const Vec& x) {
            double dv = map(x)[comp] - x[comp];
            return per ? wrap_centered(dv) : dv;
        };
        for (const auto& x : grid.points) {
            worst = std::max(worst, std::fabs(g(x)));
            for (int n = 1; n <= r; ++n)
                for (const auto& mi : multi_indices(m, n))
                    worst = std::max(worst, std::fabs(fd_partial(g, x, mi, grid.h)));
        }
    }
    return worst;
}

} // namespace dynlab
