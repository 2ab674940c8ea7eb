#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dynlab/disk_flow.hpp"
#include "dynlab/fd.hpp"
#include "dynlab/lyapunov.hpp"
#include "dynlab/slowed_map.hpp"
#include "dynlab/suspension.hpp"

using namespace dynlab;

static SuspensionField test_field(int m, double c_h) {
    DiskFlowField V;
    V.stream.c_h = c_h;
    V.stream.r_v2 = 0.25;
    V.stream.collar = SmoothBridge{7.5};
    V.stream.r_v2 = 0.0;
    return field_X(m, V, bump_alpha(0.25));
}

TEST_CASE("stream field: analytic gradient/hessian against finite differences") {
    StreamFunction H;
    H.c_h = 0.07;
    ScalarField h = [&](const Vec& x) { return H.value(x); };
    Rng rng(3);
    for (int i = 0; i < 30; ++i) {
        Vec x = {rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9)};
        if (norm2(x) > 0.97) continue;
        Vec g = H.gradient(x);
        CHECK(g[0] == doctest::Approx(fd_partial(h, x, {1, 0}, 1e-4)).epsilon(1e-6));
        CHECK(g[1] == doctest::Approx(fd_partial(h, x, {0, 1}, 1e-4)).epsilon(1e-6));
        Mat hess = H.hessian(x);
        CHECK(hess(0, 1) == doctest::Approx(fd_partial(h, x, {1, 1}, 1e-4)).epsilon(1e-4));
        CHECK(hess(0, 0) == doctest::Approx(fd_partial(h, x, {2, 0}, 1e-4)).epsilon(1e-4));
    }
}

TEST_CASE("disk field is exactly divergence free and rides level curves") {
    DiskFlowField V;
    V.stream.c_h = 0.05;
    Rng rng(9);
    for (int i = 0; i < 100; ++i) {
        Vec x = {rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9)};
        CHECK(std::fabs(V.divergence(x)) <= 1e-12);
        // V is orthogonal to grad H: H is a first integral
        Vec g = V.stream.gradient(x);
        Vec v = V.value(x);
        CHECK(std::fabs(g[0] * v[0] + g[1] * v[1]) <= 1e-14);
    }
}

TEST_CASE("field_X: structure, boundary, collar compatibility") {
    auto X = test_field(5, 0.05);
    Vec z = {0.15, 0.1, 0.3, 0.7, 0.4};
    Vec f = X.eval(z);
    CHECK(f[2] == 0.0); // no fiber component
    CHECK(f[3] == 0.0);
    CHECK(f[4] == 1.0); // alpha = 1 inside the core
    Vec zb = {1.0, 0.0, 0.3, 0.7, 0.4};
    Vec fb = X.eval(zb);
    CHECK(norm2(fb) == 0.0); // boundary flatness: X vanishes entirely

    // numerical divergence at random interior points
    Rng rng(12);
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        Vec p = {rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(), rng.uniform(),
                 rng.uniform(0.1, 0.9)};
        double div = 0;
        for (int c = 0; c < 5; ++c) {
            ScalarField fc = [&, c](const Vec& q) { return X.eval(q)[c]; };
            std::vector<int> mi(5, 0);
            mi[c] = 1;
            div += fd_partial(fc, p, mi, 1e-5);
        }
        worst = std::max(worst, std::fabs(div));
    }
    CHECK(worst <= 1e-8);

    // incompatible collar decays are rejected
    DiskFlowField weak;
    weak.stream.c_h = 0.05;
    weak.stream.collar = SmoothBridge{0.3}; // slower than alpha's decay
    CHECK_THROWS(field_X(5, weak, bump_alpha(0.5, 0.5)));
}

TEST_CASE("flow_map: generator consistency at small t") {
    auto X = test_field(5, 0.05);
    Vec z = {0.3, -0.2, 0.25, 0.66, 0.41};
    double t = 1e-4;
    FlowOpts opts;
    opts.h = 1e-5;
    auto fr = flow_map(X, t, z, opts);
    Vec lin = z;
    axpy(t, X.eval(z), lin);
    CHECK(norm2(fr.z - lin) <= 10 * t * t);
}

TEST_CASE("flow_map: volume contract and center isometry") {
    auto X = test_field(5, 0.01);
    Rng rng(77);
    FlowOpts opts;
    opts.h = 1e-3;
    for (int i = 0; i < 40; ++i) {
        Vec z = {rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(), rng.uniform(),
                 rng.uniform(0.05, 0.95)};
        auto fr = flow_map(X, 1.0, z, opts);
        CHECK(std::fabs(det(fr.J) - 1.0) <= 10 * std::pow(opts.h, 4));
        Vec push = matvec(fr.J, X.eval(z));
        Vec there = X.eval(fr.z);
        CHECK(norm2(push - there) / norm2(X.eval(z)) <= 1e-6);
    }
}

TEST_CASE("flow_map: tau overflow applies the gluing exactly") {
    auto X = test_field(5, 0.0);
    Vec z = {0.1, 0.0, 0.31, 0.77, 0.65};
    FlowOpts opts;
    opts.h = 1e-3;
    auto fr = flow_map(X, 1.0, z, opts); // alpha = 1: tau += 1 and one gluing
    CHECK(fr.gluings == 1);
    CHECK(fr.z[4] == doctest::Approx(0.65).epsilon(1e-12));
    Vec ay = X.A.apply({0.31, 0.77});
    CHECK(fr.z[2] == doctest::Approx(ay[0]).epsilon(1e-12));
    CHECK(fr.z[3] == doctest::Approx(ay[1]).epsilon(1e-12));
    // fiber block of the Jacobian equals A
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c)
            CHECK(fr.J(2 + r, 2 + c) == doctest::Approx(X.A.M(r, c)).epsilon(1e-12));
}

TEST_CASE("flow_map: composition consistency and backward inversion") {
    auto X = test_field(5, 0.05);
    FlowOpts opts;
    opts.h = 1e-3;
    opts.with_jacobian = false;
    Vec z = {0.25, 0.15, 0.4, 0.9, 0.3};
    Vec a = flow_map(X, 0.4, z, opts).z;
    Vec b = flow_map(X, 0.6, a, opts).z;
    Vec c = flow_map(X, 1.0, z, opts).z;
    Vec d = b - c;
    for (int k = 2; k < 4; ++k) d[k] = wrap_centered(d[k]);
    CHECK(norm2(d) <= 1e-8);

    Vec back = flow_map(X, -0.4, a, opts).z;
    Vec e = back - z;
    for (int k = 2; k < 4; ++k) e[k] = wrap_centered(e[k]);
    CHECK(norm2(e) <= 1e-9);
}

TEST_CASE("flow_map rejects bad arguments and over-budget steps") {
    auto X = test_field(5, 0.05);
    CHECK_THROWS(flow_map(X, 0.0, Vec(5, 0.1)));
    CHECK_THROWS(flow_map(X, 1.5, Vec(5, 0.1)));
    FlowOpts strict;
    strict.h = 0.2; // coarse step with an unmeetable audit budget
    strict.audit_stride = 1;
    strict.audit_budget = 1e-18;
    Vec z = {0.3, -0.2, 0.25, 0.66, 0.41};
    CHECK_THROWS(flow_map(X, 1.0, z, strict));
}

TEST_CASE("tube stepper agrees with the integrator when the disk is frozen") {
    auto X = test_field(5, 0.0);
    TubeStepper stepper(X, 1.0);
    FlowOpts opts;
    opts.h = 1e-3;
    opts.with_jacobian = false;
    Rng rng(4);
    for (int i = 0; i < 20; ++i) {
        Vec z = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(), rng.uniform(),
                 rng.uniform(0.1, 0.9)};
        Vec a = z, b = z;
        stepper.step(a);
        b = flow_map(X, 1.0, b, opts).z;
        CHECK(norm2(a - b) <= 1e-11);
    }
    CHECK_THROWS(TubeStepper(test_field(5, 0.05), 1.0));
}

TEST_CASE("tube stepper inverts itself") {
    auto X = test_field(5, 0.0);
    TubeStepper stepper(X, 1.0);
    Vec z = {0.1, 0.2, 0.123, 0.456, 0.789};
    Vec w = z;
    for (int i = 0; i < 50; ++i) stepper.step(w, +1);
    for (int i = 0; i < 50; ++i) stepper.step(w, -1);
    Vec d = w - z;
    for (int k = 2; k < 4; ++k) d[k] = wrap_centered(d[k]);
    CHECK(norm2(d) <= 1e-9);
}

TEST_CASE("cr distance: identity, translation, small-time flow") {
    CrGrid grid;
    grid.periodic = {false, true, true};
    Rng rng(8);
    for (int i = 0; i < 20; ++i) grid.points.push_back({rng.uniform(-0.5, 0.5), rng.uniform(), rng.uniform()});

    auto ident = [](const Vec& x) { return x; };
    CHECK(cr_distance_to_identity(ident, 2, grid) <= 1e-9);

    double delta = 0.037;
    auto trans = [&](const Vec& x) {
        Vec y = x;
        y[1] = mod1(y[1] + delta);
        return y;
    };
    double dist = cr_distance_to_identity(trans, 2, grid);
    CHECK(dist == doctest::Approx(delta).epsilon(1e-6));

    // flow for small t: distance bounded by t sup|X| (1 + O(t))
    auto X = test_field(5, 0.05);
    CrGrid g5;
    g5.periodic = {false, false, true, true, false};
    for (int i = 0; i < 12; ++i)
        g5.points.push_back({rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(),
                             rng.uniform(), rng.uniform(0.2, 0.8)});
    double t = 1e-2;
    FlowOpts opts;
    opts.h = 1e-3;
    opts.with_jacobian = false;
    auto phi = [&](const Vec& z) { return flow_map(X, t, z, opts).z; };
    double dphi = cr_distance_to_identity(phi, 1, g5);
    // oracle bound: t * sup |X|_{C^1} (values and first partials of the field)
    double supx = 0;
    Rng r2(19);
    for (int i = 0; i < 500; ++i) {
        Vec z = {r2.uniform(-1, 1), r2.uniform(-1, 1), r2.uniform(), r2.uniform(), r2.uniform()};
        if (z[0] * z[0] + z[1] * z[1] > 0.96) continue;
        supx = std::max(supx, norm_inf(X.eval(z)));
        Mat D = X.deriv(z);
        for (double v : D.a) supx = std::max(supx, std::fabs(v));
    }
    CHECK(dphi <= t * supx * (1.0 + 10 * t) + 1e-6);
    CHECK_THROWS(cr_distance_to_identity(ident, 4, grid));
}

TEST_CASE("slowed map: fixed point, linear region, area preservation") {
    SlowedToralMap map;
    Mat D;
    Vec img = map.step({0.0, 0.0}, &D);
    CHECK(img[0] == 0.0);
    CHECK(img[1] == 0.0);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(D(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));

    Vec far = {0.4, 0.7};
    Vec lin = map.step(far, &D);
    CHECK(lin[0] == doctest::Approx(mod1(2 * 0.4 + 0.7)).epsilon(1e-12));
    CHECK(lin[1] == doctest::Approx(mod1(0.4 + 0.7)).epsilon(1e-12));
    CHECK(D(0, 0) == 2.0);

    Rng rng(31);
    for (int i = 0; i < 200; ++i) {
        Vec y = {rng.uniform(), rng.uniform()};
        map.step(y, &D);
        CHECK(std::fabs(det(D) - 1.0) <= 1e-8); // Hamiltonian slow-down: area exact up to RK4
    }
}

TEST_CASE("benettin: identity map has zero exponents") {
    TangentSystem sys = [](const Vec& z, Mat& D) {
        D = Mat::identity(static_cast<int>(z.size()));
        return z;
    };
    auto rep = lyapunov_spectrum(sys, {0.2, 0.7}, 2000, 2, 5);
    CHECK(rep.exponents[0] == 0.0);
    CHECK(rep.exponents[1] == 0.0);
}

TEST_CASE("benettin on the automorphism matches the eigenvalue oracle") {
    auto A = make_brin_automorphism(5);
    TangentSystem sys = [&](const Vec& y, Mat& D) {
        D = A.M;
        return A.apply(y);
    };
    auto rep = lyapunov_spectrum(sys, {0.37, 0.81}, 20000, 2, 99);
    double expect = std::log((3.0 + std::sqrt(5.0)) / 2.0);
    CHECK(rep.exponents[0] == doctest::Approx(expect).epsilon(1e-4));
    CHECK(rep.exponents[1] == doctest::Approx(-expect).epsilon(1e-4));
    CHECK(std::fabs(rep.exponent_sum()) <= 1e-10);
}

TEST_CASE("tangent propagation ledger tracks volume growth") {
    auto A = make_brin_automorphism(5);
    TangentSystem sys = [&](const Vec& y, Mat& D) {
        D = A.M;
        return A.apply(y);
    };
    auto tp = propagate_tangent(sys, {0.1, 0.6}, 5000, 2, 3);
    CHECK_FALSE(tp.degenerate);
    CHECK(std::fabs(tp.volume_growth()) <= 1e-8); // det 1 per step
}

TEST_CASE("suspension spectrum: one zero exponent along the flow, fiber pair symmetric") {
    auto X = test_field(5, 0.0);
    FlowOpts opts;
    opts.h = 0.01;
    TangentSystem sys = [&](const Vec& z, Mat& D) {
        auto fr = flow_map(X, 1.0, z, opts);
        D = fr.J;
        return fr.z;
    };
    Vec z0 = {0.2, 0.1, 0.33, 0.71, 0.4};
    auto rep = lyapunov_spectrum(sys, z0, 1500, 5, 17);
    double le = std::log((3.0 + std::sqrt(5.0)) / 2.0);
    CHECK(rep.exponents[0] == doctest::Approx(le).epsilon(1e-3));
    CHECK(rep.exponents[4] == doctest::Approx(-le).epsilon(1e-3));
    for (int i = 1; i <= 3; ++i) CHECK(std::fabs(rep.exponents[i]) <= 1e-3);
    CHECK(std::fabs(rep.exponent_sum()) <= 1e-3);
}
