#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dynlab/ergodic.hpp"
#include "dynlab/fd.hpp"
#include "dynlab/slicing.hpp"

using namespace dynlab;

TEST_CASE("slab boundaries: dyadic formula, single slab, monotone to one") {
    auto a5 = slab_boundaries(5);
    CHECK(a5[0] == -1.0);
    CHECK(a5[1] == 0.0);
    CHECK(a5[2] == 0.5);
    CHECK(a5[3] == 0.75);
    CHECK(a5[4] == 0.875);
    CHECK(a5[5] == 1.0);
    for (size_t i = 1; i < a5.size(); ++i) CHECK(a5[i] > a5[i - 1]);

    auto a1 = slab_boundaries(1);
    CHECK(a1.size() == 2);
    CHECK(a1[0] == -1.0);
    CHECK(a1[1] == 1.0);
    CHECK_THROWS(slab_boundaries(0));
}

TEST_CASE("pi_k: endpoints, slab-exact scale, exact round trip") {
    auto s = SliceSpec::make(3, 5);
    Vec bottom(5, 0.0);
    bottom[4] = -1.0;
    CHECK(pi_k(s, 1, bottom)[4] == doctest::Approx(-1.0).epsilon(1e-15));
    Vec top(5, 0.0);
    top[4] = 1.0;
    CHECK(pi_k(s, 2, top)[4] == doctest::Approx(0.5).epsilon(1e-15)); // image slab [0, 1/2]
    Rng rng(3);
    for (int k = 1; k <= 3; ++k)
        for (int i = 0; i < 50; ++i) {
            Vec x(5);
            for (auto& v : x) v = rng.uniform(-1.0, 1.0);
            Vec y = pi_k_inverse(s, k, pi_k(s, k, x));
            for (int j = 0; j < 5; ++j) CHECK(y[j] == doctest::Approx(x[j]).epsilon(1e-15));
        }
    CHECK_THROWS(pi_k(s, 0, bottom));
    CHECK_THROWS(pi_k(s, 4, bottom));
}

TEST_CASE("epsilon budget: formula, conjugated norm, vanishing supremum") {
    auto b1 = epsilon_budget(1, 0.1, 1, 1.0);
    CHECK(b1.eps_k == doctest::Approx(0.025).epsilon(1e-15)); // 0.1 * 4^-1
    CHECK(b1.r_k == 1);
    double eps = 0.7, c = 3.0;
    int r = 2;
    double sup = 0, prev = 1e300;
    for (int k = 1; k <= 5; ++k) {
        auto b = epsilon_budget(k, eps, r, c);
        double expect = eps / c * std::pow(2.0, -static_cast<double>(k) * k * r);
        CHECK(b.conjugated_norm == doctest::Approx(expect).epsilon(1e-14));
        CHECK(b.conjugated_norm < prev); // schedule decays to zero
        prev = b.conjugated_norm;
        sup = std::max(sup, b.conjugated_norm);
    }
    CHECK(sup <= eps / c);
    CHECK_THROWS(epsilon_budget(1, -0.1, 1, 1.0));
}

TEST_CASE("block map: inverse and unit Jacobian determinant") {
    auto s = SliceSpec::make(3, 5);
    BlockMap f(s);
    Rng rng(17);
    for (int i = 0; i < 60; ++i) {
        Vec x(5);
        for (auto& v : x) v = rng.uniform(-0.98, 0.98);
        Vec y = f.apply(x);
        Vec back = f.apply(y, -1);
        for (int j = 0; j < 5; ++j) CHECK(back[j] == doctest::Approx(x[j]).epsilon(1e-6));
        // cube preserved
        CHECK(norm_inf(y) <= 1.0 + 1e-12);
        // volume: finite-difference Jacobian determinant
        Mat J(5, 5);
        for (int r = 0; r < 5; ++r) {
            ScalarField fc = [&, r](const Vec& q) { return f.apply(q)[r]; };
            for (int c = 0; c < 5; ++c) {
                std::vector<int> mi(5, 0);
                mi[c] = 1;
                J(r, c) = fd_partial(fc, x, mi, 1e-5);
            }
        }
        CHECK(std::fabs(det(J) - 1.0) <= 1e-5);
    }
}

TEST_CASE("identity blocks produce the identity sliced map") {
    auto s = SliceSpec::make(3, 5);
    s.amp = 0.0;
    SlicedMap F(s);
    Rng rng(23);
    for (int i = 0; i < 40; ++i) {
        Vec x(5);
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);
        Vec y = F.apply(x);
        for (int j = 0; j < 5; ++j) CHECK(y[j] == x[j]);
    }
}

TEST_CASE("block flatness verification calibrates a family and passes") {
    auto s = SliceSpec::make(3, 5);
    FlatnessGrid grid{80, 5};
    auto rep = verify_slice_flatness(s, 2, grid);
    CHECK(s.family_c > 0);
    CHECK(rep.all_pass);
    // the calibrated family meets the precondition of the builder
    auto F = build_sliced_map(s, true, 2, grid);
    (void)F;
}

TEST_CASE("orbits stay in their slab and slab indicators are invariant observables") {
    auto s = SliceSpec::make(3, 5);
    SlicedMap F(s);
    Rng rng(29);
    MapStep step = [&](const Vec& x) { return F.apply(x); };
    for (int seed = 0; seed < 12; ++seed) {
        Vec x(5);
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);
        int slab0 = s.slab_of(x[4]);
        double lo = s.a[slab0 - 1], hi = s.a[slab0];
        Vec z = x;
        double excursion = 0;
        for (int n = 0; n < 3000; ++n) {
            z = F.apply(z);
            excursion = std::max(excursion, std::max(lo - z[4], z[4] - hi));
        }
        CHECK(excursion <= 1e-9);
        // indicator of the starting slab averages to one along the orbit
        Observable ind = [&](const Vec& p) {
            return (p[4] >= lo && p[4] <= hi) ? 1.0 : 0.0;
        };
        CHECK(birkhoff_average(step, ind, x, 2000) == 1.0);
    }
}

TEST_CASE("assembled map passes flatness against the base family when blocks pass scaled ones") {
    auto s = SliceSpec::make(3, 5);
    FlatnessGrid grid{80, 5, 1e-13}; // integrated-map evaluation noise
    auto rep = verify_slice_flatness(s, 2, grid);
    REQUIRE(rep.all_pass);
    SlicedMap F(s);
    auto base = make_admissible_geometric(s.family_c, s.family_p, Domain::Cube, 5);
    bool pass = true;
    for (int comp = 0; comp < 5; ++comp) {
        ScalarField f = [&, comp](const Vec& x) {
            Vec q = x;
            bool outside = false;
            for (double v : q)
                if (std::fabs(v) > 1.0) outside = true;
            if (outside) return 0.0; // flat extension beyond the cube
            return F.apply(q)[comp] - x[comp];
        };
        auto r = is_rho_flat(f, base, 2, grid);
        pass = pass && r.pass;
    }
    CHECK(pass);
}

TEST_CASE("conjugation norm inequality holds on a derivative grid for k = 1..3") {
    auto s = SliceSpec::make(3, 5);
    SlicedMap F(s);
    for (int k = 1; k <= 3; ++k) {
        auto chk = conjugation_norm_check(F, k, 1, 25, 1234 + k);
        CHECK(chk.holds);
        CHECK(chk.lhs > 0);
    }
}
