#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dynlab/geometry.hpp"
#include "dynlab/rng.hpp"
#include "dynlab/toral.hpp"

using namespace dynlab;

TEST_CASE("brin automorphism block layout and determinants") {
    for (int m : {5, 6, 7, 8, 9}) {
        auto A = make_brin_automorphism(m);
        CHECK(A.d == m - 3);
        CHECK(det(A.M) == doctest::Approx(1.0).epsilon(1e-9));
        Mat I = matmul(A.M, A.Minv);
        for (int i = 0; i < A.d; ++i)
            for (int j = 0; j < A.d; ++j)
                CHECK(I(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
    }
    CHECK_THROWS(make_brin_automorphism(4));
}

TEST_CASE("2x2 eigenvalues from the characteristic polynomial x^2 - 3x + 1") {
    auto A = make_brin_automorphism(5);
    double s5 = std::sqrt(5.0);
    CHECK(A.eta() == doctest::Approx((3.0 + s5) / 2.0).epsilon(1e-14));
    const auto& blk = A.last_block();
    for (double ev : blk.eigenvalues) {
        CHECK(ev * ev - 3.0 * ev + 1.0 == doctest::Approx(0.0).epsilon(1e-12));
    }
    // eigenvector check: A e_u = eta e_u
    Vec eu = A.unstable_dir();
    Vec img = A.push(eu);
    for (int i = 0; i < 2; ++i) CHECK(img[i] == doctest::Approx(A.eta() * eu[i]).epsilon(1e-12));
}

TEST_CASE("3x3 block: det 1 (cofactor oracle), two moduli above one, eta consistency") {
    auto A = make_brin_automorphism(6);
    const auto& blk = A.last_block();
    REQUIRE(blk.size == 3);
    // cofactor expansion of [[2,1,1],[1,1,1],[0,1,2]]
    double d = 2.0 * (1 * 2 - 1 * 1) - 1.0 * (1 * 2 - 1 * 0) + 1.0 * (1 * 1 - 1 * 0);
    CHECK(d == doctest::Approx(1.0));
    int above = 0;
    double prod = 1;
    for (double ev : blk.eigenvalues) {
        if (std::fabs(ev) > 1.0) ++above;
        prod *= ev;
        CHECK(std::fabs(std::fabs(ev) - 1.0) > 1e-9);
    }
    CHECK(above == 2);
    CHECK(prod == doctest::Approx(1.0).epsilon(1e-10)); // product of moduli = det
    CHECK(A.eta() > 1.0);
    CHECK(A.eta() == doctest::Approx(3.2469796037174672).epsilon(1e-12));
    for (int w = 0; w < 3; ++w) {
        Vec v = blk.eigenvectors[w];
        // block-local eigen equation
        double B[3][3] = {{2, 1, 1}, {1, 1, 1}, {0, 1, 2}};
        for (int i = 0; i < 3; ++i) {
            double r = 0;
            for (int j = 0; j < 3; ++j) r += B[i][j] * v[j];
            CHECK(r == doctest::Approx(blk.eigenvalues[w] * v[i]).epsilon(1e-9));
        }
    }
}

TEST_CASE("toral apply fixes the origin and matches the matrix") {
    auto A = make_brin_automorphism(5);
    Vec zero = {0.0, 0.0};
    auto img = toral_apply(A, zero);
    CHECK(img[0] == 0.0);
    CHECK(img[1] == 0.0);
    Vec y = {0.3, 0.8};
    auto z = toral_apply(A, y);
    CHECK(z[0] == doctest::Approx(mod1(2 * 0.3 + 0.8)));
    CHECK(z[1] == doctest::Approx(mod1(0.3 + 0.8)));
}

TEST_CASE("normalize_suspension: identity, single gluing, repeated gluing oracle") {
    auto A = make_brin_automorphism(5);
    TorusPoint y{{0.21, 0.58}};

    auto [y1, t1] = normalize_suspension(y, 0.5, A);
    CHECK(t1 == 0.5);
    CHECK(y1.y[0] == y.y[0]);
    CHECK(y1.y[1] == y.y[1]);

    auto [y2, t2] = normalize_suspension(y, 1.0, A);
    CHECK(t2 == 0.0);
    Vec ay = A.apply(y.y);
    CHECK(y2.y[0] == doctest::Approx(ay[0]).epsilon(1e-15));
    CHECK(y2.y[1] == doctest::Approx(ay[1]).epsilon(1e-15));

    // (y, 2.25): oracle is two sequential single-step normalizations
    auto [ya, ta] = normalize_suspension(y, 2.25, A);
    auto [yb1, tb1] = normalize_suspension(y, 1.25, A); // one step down: (Ay, 0.25) path
    auto [yb2, tb2] = normalize_suspension(yb1, tb1 + 1.0, A);
    CHECK(ta == doctest::Approx(0.25));
    CHECK(tb2 == doctest::Approx(0.25));
    for (int i = 0; i < 2; ++i) CHECK(ya.y[i] == doctest::Approx(yb2.y[i]).epsilon(1e-12));

    // negative overflow applies the inverse
    auto [yc, tc] = normalize_suspension(y2, -1.0 + t2, A);
    CHECK(tc == doctest::Approx(0.0));
    for (int i = 0; i < 2; ++i) CHECK(yc.y[i] == doctest::Approx(y.y[i]).epsilon(1e-12));

    CHECK_THROWS(normalize_suspension(y, std::nan(""), A));
}

TEST_CASE("normalize_suspension is idempotent on outputs") {
    auto A = make_brin_automorphism(7);
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        TorusPoint y{{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()}};
        double tau = rng.uniform(-3.0, 3.0);
        auto [y1, t1] = normalize_suspension(y, tau, A);
        auto [y2, t2] = normalize_suspension(y1, t1, A);
        CHECK(t2 == t1);
        for (size_t j = 0; j < y1.y.size(); ++j) CHECK(y2.y[j] == y1.y[j]);
    }
}

static Vec frozen_flow_vector(int m) {
    Vec x(m, 0.0);
    x[m - 1] = 1.0; // X = (0, 0, alpha) with alpha = 1 in the core
    return x;
}

TEST_CASE("chart construction: orthonormal frame aligned to the bundles") {
    auto A = make_brin_automorphism(5);
    Vec z0 = {0.1, -0.05, 0.37, 0.62, 0.5};
    auto chart = cyl_chart_at(z0, 0.05, A, frozen_flow_vector(5));
    // orthonormal rows
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            double dot = 0;
            for (int k = 0; k < 5; ++k) dot += chart.P(i, k) * chart.P(j, k);
            CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
        }
    // axis_u carries the fiber unstable direction, axis_c the flow direction
    Vec eu = A.unstable_dir();
    CHECK(chart.axis_u()[2] == doctest::Approx(eu[0]).epsilon(1e-12));
    CHECK(chart.axis_u()[3] == doctest::Approx(eu[1]).epsilon(1e-12));
    CHECK(chart.axis_c()[4] == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS(cyl_chart_at(z0, 0.2, A, frozen_flow_vector(5)));
    CHECK_THROWS(cyl_chart_at(z0, 0.05, A, Vec(5, 0.0))); // boundary point: X = 0
}

TEST_CASE("pure-axis displacements give the textbook cylindrical coordinates") {
    auto A = make_brin_automorphism(5);
    Vec z0 = {0.1, -0.05, 0.37, 0.62, 0.5};
    auto chart = cyl_chart_at(z0, 0.05, A, frozen_flow_vector(5));

    auto at_base = chart.to_cylindrical(z0);
    REQUIRE(at_base);
    CHECK(at_base->rho == 0.0);
    CHECK(at_base->theta == 0.0);
    CHECK(norm2(at_base->zeta) == 0.0);

    Vec zu = z0;
    axpy(0.03, chart.axis_u(), zu);
    for (int i = 2; i < 4; ++i) zu[i] = mod1(zu[i]);
    auto cu = chart.to_cylindrical(zu);
    REQUIRE(cu);
    CHECK(cu->rho == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(cu->theta == doctest::Approx(0.0).epsilon(1e-12));

    Vec zc = z0;
    axpy(0.03, chart.axis_c(), zc);
    auto cc = chart.to_cylindrical(zc);
    REQUIRE(cc);
    CHECK(cc->rho == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(cc->theta == doctest::Approx(M_PI / 2).epsilon(1e-12));
}

TEST_CASE("chart round trip to 1e-12 on random samples") {
    auto A = make_brin_automorphism(7);
    Vec z0 = {0.15, 0.1, 0.3, 0.7, 0.11, 0.94, 0.45};
    auto chart = cyl_chart_at(z0, 0.08, A, frozen_flow_vector(7));
    Rng rng(23);
    for (int i = 0; i < 200; ++i) {
        CylCoords c;
        c.rho = 0.08 * std::sqrt(rng.uniform());
        c.theta = rng.uniform(0.0, 2 * M_PI);
        auto ball = rng.unit_ball(5);
        c.zeta.assign(ball.begin(), ball.end());
        for (auto& v : c.zeta) v *= 0.08;
        Vec z = chart.from_cylindrical(c);
        auto back = chart.to_cylindrical(z);
        REQUIRE(back);
        CHECK(back->rho == doctest::Approx(c.rho).epsilon(1e-12));
        if (c.rho > 1e-6) {
            double dth = std::fabs(back->theta - c.theta);
            dth = std::min(dth, 2 * M_PI - dth);
            CHECK(dth <= 1e-10);
        }
        for (size_t j = 0; j < c.zeta.size(); ++j)
            CHECK(back->zeta[j] == doctest::Approx(c.zeta[j]).epsilon(1e-10));
    }
}

TEST_CASE("out-of-chart input is rejected") {
    auto A = make_brin_automorphism(5);
    Vec z0 = {0.0, 0.0, 0.5, 0.5, 0.5};
    auto chart = cyl_chart_at(z0, 0.05, A, frozen_flow_vector(5));
    Vec far = {0.0, 0.0, 0.5, 0.5, 0.95}; // tau displacement beyond the chart extent
    CHECK_FALSE(chart.to_cylindrical(far).has_value());
}

TEST_CASE("splitting dimension bookkeeping") {
    for (int m : {5, 6, 7, 8, 9}) {
        int mp = (m - 3) / 2;
        CHECK(SplittingEstimate::dim_es(m) == mp + 1);
        CHECK(SplittingEstimate::dim_ec(m) == 1);
        CHECK(SplittingEstimate::dim_eu(m) == m - mp - 2);
        CHECK(SplittingEstimate::dim_es(m) + SplittingEstimate::dim_ec(m) +
                  SplittingEstimate::dim_eu(m) ==
              m);
    }
}
