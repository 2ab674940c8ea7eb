#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dynlab/fd.hpp"
#include "dynlab/linalg.hpp"
#include "dynlab/rng.hpp"
#include "dynlab/stats.hpp"

using namespace dynlab;

TEST_CASE("determinant and solve on small systems") {
    Mat A(3, 3);
    double vals[9] = {2, 1, 1, 1, 1, 1, 0, 1, 2};
    for (int i = 0; i < 9; ++i) A.a[i] = vals[i];
    CHECK(det(A) == doctest::Approx(1.0).epsilon(1e-12));

    Vec b = {1.0, 2.0, 3.0};
    Vec x = solve(A, b);
    Vec r = matvec(A, x);
    for (int i = 0; i < 3; ++i) CHECK(r[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("modified Gram-Schmidt produces an orthonormal frame and the log ledger") {
    Rng rng(7);
    Mat Q(4, 3);
    for (auto& v : Q.a) v = rng.uniform(-1, 1);
    auto logs = mgs_lognorms(Q);
    CHECK(logs.size() == 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double dot = 0;
            for (int r = 0; r < 4; ++r) dot += Q(r, i) * Q(r, j);
            CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
        }
}

TEST_CASE("rng determinism and substream independence") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng base(42);
    Rng s1 = base.substream("alpha", 0);
    Rng s2 = base.substream("alpha", 1);
    Rng s3 = base.substream("beta", 0);
    CHECK(s1.next_u64() != s2.next_u64());
    CHECK(s1.next_u64() != s3.next_u64());
    // substreams are derived, not consuming: repeated derivation matches
    Rng s1b = base.substream("alpha", 0);
    Rng s1c = base.substream("alpha", 0);
    CHECK(s1b.next_u64() == s1c.next_u64());
}

TEST_CASE("uniform moments sanity") {
    Rng rng(11);
    RunningStats st;
    for (int i = 0; i < 200000; ++i) st.add(rng.uniform());
    CHECK(st.mean == doctest::Approx(0.5).epsilon(0.01));
    CHECK(st.variance() == doctest::Approx(1.0 / 12).epsilon(0.02));
    auto ci = ci95(st);
    CHECK(ci.contains(0.5));
}

TEST_CASE("finite differences reproduce known partials") {
    // f(x,y) = sin(x) * exp(y):  d3f/dx2dy = -sin(x) exp(y)
    ScalarField f = [](const Vec& v) { return std::sin(v[0]) * std::exp(v[1]); };
    Vec x = {0.4, -0.3};
    CHECK(fd_partial(f, x, {1, 0}, 1e-3) ==
          doctest::Approx(std::cos(0.4) * std::exp(-0.3)).epsilon(1e-9));
    CHECK(fd_partial(f, x, {2, 1}, 1e-3) ==
          doctest::Approx(-std::sin(0.4) * std::exp(-0.3)).epsilon(1e-6));
    CHECK(fd_partial(f, x, {0, 3}, 2e-3) ==
          doctest::Approx(std::sin(0.4) * std::exp(-0.3)).epsilon(1e-5));
    CHECK(fd_partial(f, x, {1, 1}, 1e-3) ==
          doctest::Approx(std::cos(0.4) * std::exp(-0.3)).epsilon(1e-8));
}

TEST_CASE("multi index enumeration counts") {
    CHECK(multi_indices(3, 0).size() == 1);
    CHECK(multi_indices(3, 2).size() == 6);   // C(4,2)
    CHECK(multi_indices(5, 3).size() == 35);  // C(7,4)
    for (const auto& mi : multi_indices(4, 3)) {
        int s = 0;
        for (int v : mi) s += v;
        CHECK(s == 3);
    }
}
