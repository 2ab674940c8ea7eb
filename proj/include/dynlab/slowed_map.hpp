#pragma once

#include <cmath>
#include <stdexcept>

#include "dynlab/flatness.hpp"
#include "dynlab/linalg.hpp"
#include "dynlab/toral.hpp"

// Slowed toral automorphism on T^2: the nonuniform-hyperbolicity testbed.
// Outside a disk of radius r0 about the fixed point the map is the linear
// automorphism [[2,1],[1,1]]. Inside, it is the time-1 map of the Hamiltonian
// flow of H = log(lambda) * s1 * s2 * g(r^2 / r0^2) in eigen-coordinates,
// where g is a smooth monotone profile with g(0) = 0 and g == 1 for r >= r0.
// The stream form keeps the map exactly area preserving; the derivative at the
// fixed point is the identity, so the exponent there is 0.

namespace dynlab {

struct SlowedToralMap {
    double r0 = 0.06;
    SmoothBridge g{0.7};
    double ode_h = 1.0 / 256.0;

    SlowedToralMap() { init(); }
    explicit SlowedToralMap(double radius, double bridge_eps = 0.7) : r0(radius), g{bridge_eps} {
        if (!(r0 > 0.0 && r0 < 0.073))
            throw std::invalid_argument("SlowedToralMap: need 0 < r0 < 0.073 so the slow region"
                                        " stays inside one fundamental domain");
        init();
    }

    // y in T^2 -> image point; D receives the 2x2 derivative in torus coordinates
    Vec step(const Vec& y, Mat* D = nullptr) const {
        Vec yh = {wrap_centered(y[0]), wrap_centered(y[1])};
        double r = norm2(yh);
        if (r >= lambda_ * r0) {
            if (D) *D = A_;
            return {mod1(2.0 * y[0] + y[1]), mod1(y[0] + y[1])};
        }
        // eigen-coordinates s = E^T yh
        Vec s = {eu_[0] * yh[0] + eu_[1] * yh[1], es_[0] * yh[0] + es_[1] * yh[1]};
        Mat J = Mat::identity(2);
        int n = static_cast<int>(std::round(1.0 / ode_h));
        for (int i = 0; i < n; ++i) rk4(s, J, ode_h);
        Vec out = {eu_[0] * s[0] + es_[0] * s[1], eu_[1] * s[0] + es_[1] * s[1]};
        out[0] = mod1(out[0] + (y[0] - yh[0]));
        out[1] = mod1(out[1] + (y[1] - yh[1]));
        if (D) {
            // E J E^T
            Mat EJ(2, 2);
            EJ(0, 0) = eu_[0] * J(0, 0) + es_[0] * J(1, 0);
            EJ(0, 1) = eu_[0] * J(0, 1) + es_[0] * J(1, 1);
            EJ(1, 0) = eu_[1] * J(0, 0) + es_[1] * J(1, 0);
            EJ(1, 1) = eu_[1] * J(0, 1) + es_[1] * J(1, 1);
            Mat R(2, 2);
            R(0, 0) = EJ(0, 0) * eu_[0] + EJ(0, 1) * es_[0];
            R(0, 1) = EJ(0, 0) * eu_[1] + EJ(0, 1) * es_[1];
            R(1, 0) = EJ(1, 0) * eu_[0] + EJ(1, 1) * es_[0];
            R(1, 1) = EJ(1, 0) * eu_[1] + EJ(1, 1) * es_[1];
            *D = R;
        }
        return out;
    }

    double lambda() const { return lambda_; }

  private:
    Mat A_{2, 2};
    double lambda_ = 0, logl_ = 0;
    Vec eu_, es_;

    void init() {
        A_(0, 0) = 2;
        A_(0, 1) = 1;
        A_(1, 0) = 1;
        A_(1, 1) = 1;
        lambda_ = (3.0 + std::sqrt(5.0)) / 2.0;
        logl_ = std::log(lambda_);
        double phi = (1.0 + std::sqrt(5.0)) / 2.0;
        double nu = std::sqrt(phi * phi + 1.0);
        eu_ = {phi / nu, 1.0 / nu};
        es_ = {1.0 / nu, -phi / nu};
    }

    // Hamiltonian field in eigen-coordinates
    void field(const Vec& s, Vec& f, Mat& Df) const {
        double u = (s[0] * s[0] + s[1] * s[1]) / (r0 * r0);
        double gv = g.value(u), gp = g.deriv(u), gpp = g.deriv2(u);
        double iu = 2.0 / (r0 * r0); // d u / d s_i = iu * s_i
        f = {logl_ * s[0] * (gv + gp * iu * s[1] * s[1]),
             -logl_ * s[1] * (gv + gp * iu * s[0] * s[0])};
        double du1 = iu * s[0], du2 = iu * s[1];
        Df = Mat(2, 2);
        Df(0, 0) = logl_ * (gv + gp * iu * s[1] * s[1] + s[0] * du1 * (gp + gpp * iu * s[1] * s[1]));
        Df(0, 1) = logl_ * s[0] * (gp * iu * 2.0 * s[1] + du2 * (gp + gpp * iu * s[1] * s[1]));
        Df(1, 0) = -logl_ * s[1] * (gp * iu * 2.0 * s[0] + du1 * (gp + gpp * iu * s[0] * s[0]));
        Df(1, 1) = -logl_ * (gv + gp * iu * s[0] * s[0] + s[1] * du2 * (gp + gpp * iu * s[0] * s[0]));
    }

    void rk4(Vec& s, Mat& J, double h) const {
        Vec k1, k2, k3, k4;
        Mat D;
        auto jmul = [&](const Mat& Dm, const Mat& Jm) { return matmul(Dm, Jm); };
        field(s, k1, D);
        Mat K1 = jmul(D, J);
        Vec s2 = s;
        axpy(h / 2, k1, s2);
        Mat J2 = J;
        for (size_t i = 0; i < J2.a.size(); ++i) J2.a[i] += h / 2 * K1.a[i];
        field(s2, k2, D);
        Mat K2 = jmul(D, J2);
        Vec s3 = s;
        axpy(h / 2, k2, s3);
        Mat J3 = J;
        for (size_t i = 0; i < J3.a.size(); ++i) J3.a[i] += h / 2 * K2.a[i];
        field(s3, k3, D);
        Mat K3 = jmul(D, J3);
        Vec s4 = s;
        axpy(h, k3, s4);
        Mat J4 = J;
        for (size_t i = 0; i < J4.a.size(); ++i) J4.a[i] += h * K3.a[i];
        field(s4, k4, D);
        Mat K4 = jmul(D, J4);
        for (int i = 0; i < 2; ++i) s[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        for (size_t i = 0; i < J.a.size(); ++i)
            J.a[i] += h / 6 * (K1.a[i] + 2 * K2.a[i] + 2 * K3.a[i] + K4.a[i]);
    }
};

inline Vec slowed_step(const SlowedToralMap& map, const Vec& y, Mat* D = nullptr) {
    return map.step(y, D);
}

} // namespace dynlab
