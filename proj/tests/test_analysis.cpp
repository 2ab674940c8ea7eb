#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dynlab/cocycle.hpp"
#include "dynlab/ergodic.hpp"
#include "dynlab/perturbation.hpp"

using namespace dynlab;

static SuspensionField frozen_field(int m = 5) {
    DiskFlowField V;
    V.stream.c_h = 0.0;
    V.stream.collar = SmoothBridge{7.5};
    V.stream.r_v2 = 0.0;
    return field_X(m, V, bump_alpha(0.25));
}

static DeltaSearchResult shared_delta(const SuspensionField& X) {
    DeltaSearchParams params;
    params.n_candidates = 150;
    params.oracle_samples = 500;
    params.seed = 2024;
    return find_delta_t(X, 1.0, compute_Nt(X.A.eta(), 1.0), params);
}

TEST_CASE("kac: toral window ratio near one, censoring rare") {
    auto A = make_brin_automorphism(5);
    auto rep = kac_toral_window(A, {0.37, 0.62}, 0.05, 1500, 100000, 99);
    CHECK(rep.kac_ratio > 0.9);
    CHECK(rep.kac_ratio < 1.1);
    CHECK(rep.censored_fraction < 0.01);
}

TEST_CASE("kac: irrational rotation with arc 0.1 returns in about 10 steps") {
    auto rep = kac_circle_rotation(0.6180339887498949, 0.1, 2000, 10000, 7);
    CHECK(rep.mean_return == doctest::Approx(10.0).epsilon(0.05));
    CHECK(rep.censored_fraction == 0.0);
}

TEST_CASE("censored returns are flagged when the iteration cap is tiny") {
    auto A = make_brin_automorphism(5);
    auto member = [](const Vec& y) { return y[0] < 0.001 && y[1] < 0.001; };
    MapStep step = [&](const Vec& y) { return A.apply(y); };
    auto r = first_return_map(step, member, {0.5, 0.5}, 10);
    CHECK(r.censored);
}

TEST_CASE("return engine: eta(z) is the exact gluing power, return times match h_sigma") {
    auto X = frozen_field();
    auto d = shared_delta(X);
    REQUIRE(d.found);
    TubeReturnEngine engine(X, d.chart, 1.0, 1.0);
    auto samples = sample_delta_stratified(d.chart, 60, 11);
    int n_t = compute_Nt(X.A.eta(), 1.0);
    for (const auto& z : samples.points) {
        auto rec = engine.first_return(z, +1);
        REQUIRE_FALSE(rec.censored);
        CHECK(rec.steps > n_t); // the disjointness window forbids early returns
        CHECK(rec.gluings == rec.steps); // t = 1 tube: one gluing per step, eta(z) = eta^steps
        // backward returns respect the two-sided disjointness window too
        auto back = engine.first_return(rec.point, -1);
        REQUIRE_FALSE(back.censored);
        CHECK(back.steps > n_t);
        CHECK(-back.gluings == back.steps);
        CHECK(d.chart.in_delta(back.point));
        // perturbed and unperturbed first-return times coincide: iterate
        // h_sigma = phi_sigma o phi^t literally and count the re-entry step
        Vec w = z;
        TubeStepper stepper(X, 1.0);
        long steps_sigma = 0;
        for (long it = 1; it <= 100000; ++it) {
            stepper.step(w);
            bool entered = d.chart.in_delta(w);
            w = engine.twist(w, 0.4); // identity off Delta
            if (entered) {
                steps_sigma = it;
                break;
            }
        }
        CHECK(steps_sigma == rec.steps);
    }
}

TEST_CASE("sigma = 0 cocycle: identity blocks, beta 0, log eta = K log eta1") {
    auto X = frozen_field();
    auto d = shared_delta(X);
    REQUIRE(d.found);
    TubeReturnEngine engine(X, d.chart, 1.0, 1.0);
    auto samples = sample_delta_stratified(d.chart, 40, 13);
    for (const auto& z : samples.points) {
        auto r = engine.log_eta_sigma(z, 0.0);
        REQUIRE_FALSE(r.censored);
        CHECK(r.log_eta == doctest::Approx(r.steps * engine.log_eta_unit()).epsilon(1e-12));
        CHECK(r.beta == 0.0);
    }
}

TEST_CASE("invariance equation residual below 1e-6 on accepted samples") {
    auto X = frozen_field();
    auto d = shared_delta(X);
    REQUIRE(d.found);
    TubeReturnEngine engine(X, d.chart, 1.0, 1.0);
    auto samples = sample_delta_stratified(d.chart, 30, 17);
    for (const auto& z : samples.points) {
        double res = engine.invariance_residual(z, 0.35);
        REQUIRE(res >= 0);
        CHECK(res <= 1e-6);
    }
}

TEST_CASE("return cocycle entries: sigma-0 form and flagged residuals") {
    auto X = frozen_field();
    auto d = shared_delta(X);
    REQUIRE(d.found);
    TubeReturnEngine engine(X, d.chart, 1.0, 1.0);
    auto samples = sample_delta_stratified(d.chart, 20, 23);
    for (const auto& z : samples.points) {
        auto e0 = return_cocycle(engine, z, 0.0);
        REQUIRE_FALSE(e0.flagged);
        CHECK(e0.blocks.a == 1.0);
        CHECK(e0.blocks.d == 1.0);
        CHECK(e0.blocks.b == 0.0);
        CHECK(e0.blocks.c == 0.0);
        CHECK(e0.beta == 0.0);
        CHECK(e0.log_eta_sigma == e0.log_eta0);
        auto es = return_cocycle(engine, z, 0.4);
        REQUIRE_FALSE(es.flagged); // residual within 1e-6 on accepted samples
        CHECK(es.return_steps == e0.return_steps);
        CHECK(es.blocks.a * es.blocks.d - es.blocks.b * es.blocks.c ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("even dimension: delta search and return cocycle on the 3x3 fiber block") {
    DiskFlowField V;
    V.stream.c_h = 0.0;
    V.stream.collar = SmoothBridge{7.5};
    V.stream.r_v2 = 0.0;
    auto X = field_X(6, V, bump_alpha(0.25));
    double eta = X.A.eta();
    CHECK(eta == doctest::Approx(3.2469796037174672).epsilon(1e-12));
    int n_t = compute_Nt(eta, 1.0);
    CHECK(n_t == 4); // 3.247^4 = 111 > 100
    DeltaSearchParams params;
    params.gamma_range = {0.012, 0.009};
    params.n_candidates = 400;
    params.oracle_samples = 400;
    params.seed = 77;
    auto d = find_delta_t(X, 1.0, n_t, params);
    REQUIRE(d.found);
    CHECK(d.chart.gamma0 < 0.1);
    CHECK(d.margin_min > 0);
    {
        TubeReturnEngine engine(X, d.chart, 1.0, 1.0, 1000000);
        auto samples = sample_delta_stratified(d.chart, 6, 3);
        for (const auto& z : samples.points) {
            auto rec = engine.first_return(z, +1);
            if (rec.censored) continue;
            CHECK(rec.steps > n_t);
            CHECK(rec.gluings == rec.steps); // t = 1 tube: eta(z) = eta^steps, 3x3 block too
            auto e = return_cocycle(engine, z, 0.3);
            if (!e.flagged) CHECK(e.residual <= 1e-6);
        }
    }
}

TEST_CASE("benettin on the 3x3 block matches its eigenvalue moduli") {
    auto A = make_brin_automorphism(6); // fiber T^3, the even-dimension block
    TangentSystem sys = [&](const Vec& y, Mat& D) {
        D = A.M;
        return A.apply(y);
    };
    auto rep = lyapunov_spectrum(sys, {0.21, 0.55, 0.83}, 20000, 3, 7);
    const auto& blk = A.last_block();
    for (int i = 0; i < 3; ++i)
        CHECK(rep.exponents[i] == doctest::Approx(std::log(blk.eigenvalues[i])).epsilon(1e-3));
}

TEST_CASE("estimate_L_sigma: deterministic, positive at 0, flat when the bump vanishes") {
    auto X = frozen_field();
    auto d = shared_delta(X);
    REQUIRE(d.found);
    TubeReturnEngine engine(X, d.chart, 1.0, 1.0);
    auto a = estimate_L_sigma(engine, 0.0, 1500, 555);
    auto b = estimate_L_sigma(engine, 0.0, 1500, 555);
    REQUIRE(a.valid);
    CHECK(a.value == b.value); // bit-for-bit determinism
    CHECK(a.se == b.se);
    CHECK(a.value > 0); // eta > 1 along every return
    CHECK(a.censored_fraction == 0.0);

    // psi~ replaced by 0: L_sigma identically L_0
    TubeReturnEngine zero_amp(X, d.chart, 1.0, 0.0);
    auto l0 = estimate_L_sigma(zero_amp, 0.0, 800, 777);
    for (double sg : {0.2, 0.5, 0.9}) {
        auto ls = estimate_L_sigma(zero_amp, sg, 800, 777);
        CHECK(ls.value == l0.value);
    }
}

TEST_CASE("sigma scan (reduced size): derivative signs and the quadrature route") {
    auto X = frozen_field();
    auto d = shared_delta(X);
    REQUIRE(d.found);
    TubeReturnEngine engine(X, d.chart, 1.0, 1.0);
    auto scan = sigma_scan(engine, 0.5, 2500, 31337);
    CHECK(scan.censored_fraction <= 0.01);
    CHECK(scan.d1_contains_zero);
    CHECK(scan.d2_below_zero);
    CHECK(std::fabs(scan.quad.theta_integral) <= 1e-12);
    // J1 quadrature agrees with its exact theta-reduction
    CHECK(scan.quad.j1 == doctest::Approx(scan.quad.j1_exact).epsilon(0.02));
    CHECK(scan.quad.bound_holds);
    CHECK(scan.l_zero > 0);
}

TEST_CASE("central exponent: exactly zero at sigma 0") {
    auto X = frozen_field();
    auto d = shared_delta(X);
    REQUIRE(d.found);
    TubeReturnEngine engine(X, d.chart, 1.0, 1.0);
    auto rep = central_exponent(engine, 0.0, 10, 5000, 2222);
    CHECK(rep.tube_average.estimate == 0.0);
    CHECK(rep.integral.estimate == 0.0);
    CHECK_FALSE(rep.bundle_flagged);
}

TEST_CASE("2d det identity: u- and c-exponents sum to the orbit average of log det") {
    auto X = frozen_field();
    auto d = shared_delta(X);
    REQUIRE(d.found);
    TubeReturnEngine engine(X, d.chart, 1.0, 1.0);
    double sigma = 0.3;
    // propagate the 2x2 cocycle with QR along one tube orbit
    Rng rng(5);
    Vec z = d.chart.base;
    z[0] += 0.3 * d.chart.gamma0;
    int T = 4000;
    TubeStepper stepper(X, 1.0);
    double lu = 0, lc = 0, ldet = 0;
    double q00 = 1, q01 = 0, q10 = 0, q11 = 1; // 2-frame columns
    for (int n = 0; n < T; ++n) {
        int k = stepper.step(z);
        double e = std::exp(std::fabs(k) * engine.log_eta_unit());
        double a = e, b = 0, c = 0, dd = 1; // diag block off Delta
        if (d.chart.in_delta(z)) {
            auto cc = d.chart.to_cylindrical(z);
            auto bl = twist_blocks(engine.spec().with_sigma(sigma), cc->rho, cc->theta,
                                   norm2(cc->zeta));
            // full step block: twist after the diagonal part
            double na = bl.a * e, nb = bl.b, nc = bl.c * e, nd = bl.d;
            a = na;
            b = nb;
            c = nc;
            dd = nd;
            z = engine.twist(z, sigma);
        }
        ldet += std::log(std::fabs(a * dd - b * c));
        double w00 = a * q00 + b * q10, w10 = c * q00 + dd * q10;
        double w01 = a * q01 + b * q11, w11 = c * q01 + dd * q11;
        double n0 = std::hypot(w00, w10);
        lu += std::log(n0);
        w00 /= n0;
        w10 /= n0;
        double proj = w01 * w00 + w11 * w10;
        w01 -= proj * w00;
        w11 -= proj * w10;
        double n1 = std::hypot(w01, w11);
        lc += std::log(n1);
        q00 = w00;
        q10 = w10;
        q01 = w01 / n1;
        q11 = w11 / n1;
    }
    CHECK(lu + lc == doctest::Approx(ldet).epsilon(1e-10));
    (void)rng;
}

TEST_CASE("birkhoff: constant observable, toral coordinate average") {
    auto A = make_brin_automorphism(5);
    MapStep step = [&](const Vec& y) { return A.apply(y); };
    Observable one = [](const Vec&) { return 1.0; };
    CHECK(birkhoff_average(step, one, {0.3, 0.4}, 500) == 1.0);
    Observable coord = [](const Vec& y) { return y[0]; };
    RunningStats st;
    Rng rng(17);
    for (int s = 0; s < 40; ++s)
        st.add(birkhoff_average(step, coord, {rng.uniform(), rng.uniform()}, 20000));
    CHECK(st.mean == doctest::Approx(0.5).epsilon(0.02));
    CHECK(st.max - st.min < 0.05); // single ergodic component: averages agree
}

TEST_CASE("detect_components: synthetic three-cluster data resolves, uniform does not split") {
    Rng rng(88);
    std::vector<Vec> pts;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 40; ++i) pts.push_back({1.0 * c + 0.05 * rng.uniform(-1.0, 1.0)});
    auto part = detect_components_from_vectors(pts, 0.01, 55);
    CHECK(part.n_clusters == 3);
    CHECK(part.resolved);
    CHECK(part.min_between > part.threshold);

    std::vector<Vec> uni;
    for (int i = 0; i < 120; ++i) uni.push_back({rng.uniform()});
    auto pu = detect_components_from_vectors(uni, 0.01, 55);
    CHECK(pu.n_clusters == 1); // no spurious components by construction
    CHECK_FALSE(pu.resolved);
}

TEST_CASE("detect_components over orbits: constant observable gives one cluster") {
    auto A = make_brin_automorphism(5);
    MapStep step = [&](const Vec& y) { return A.apply(y); };
    std::vector<Observable> obs = {[](const Vec&) { return 1.0; }};
    auto sampler = [](Rng& r) { return Vec{r.uniform(), r.uniform()}; };
    auto part = detect_components(step, obs, 40, 200, sampler, 0.01, 9);
    CHECK(part.n_clusters == 1);
}

TEST_CASE("default observables: ergodic automorphism stays one component") {
    auto A = make_brin_automorphism(5);
    MapStep step = [&](const Vec& y) { return A.apply(y); };
    auto obs = default_observables(2, 31);
    CHECK(obs.size() == 3); // two coordinates plus one random smooth observable
    auto sampler = [](Rng& r) { return Vec{r.uniform(), r.uniform()}; };
    auto part = detect_components(step, obs, 40, 4000, sampler, 0.01, 11);
    CHECK(part.n_clusters == 1);
}

TEST_CASE("splitting estimate: fiber alignment, central neutrality, rate brackets") {
    auto X = frozen_field();
    Vec z = {0.2, 0.1, 0.33, 0.71, 0.4};
    auto est = estimate_splitting(X, z, 1.0, 50, 77);
    // Ec is the flow direction exactly
    Vec flow = X.eval(z);
    double fn = norm2(flow);
    for (int i = 0; i < 5; ++i) CHECK(est.Ec(i, 0) == doctest::Approx(flow[i] / fn).epsilon(1e-12));
    // the top forward vector aligns with the lifted unstable eigendirection
    Vec eu = X.A.unstable_dir();
    double align = std::fabs(est.Eu(2, 0) * eu[0] + est.Eu(3, 0) * eu[1]);
    CHECK(align == doctest::Approx(1.0).epsilon(1e-3));
    // rates bracket 1 and the central rates pin 1 within 1e-6
    CHECK(est.lambda < 1.0);
    CHECK(est.mu > 1.0);
    CHECK(est.lambda_p == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(est.mu_p == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(est.rates_consistent);
    CHECK(est.disk_neutral);

    auto short_est = estimate_splitting(X, z, 1.0, 10, 77);
    CHECK(short_est.note.find("horizon") != std::string::npos);
}

TEST_CASE("flow-case first return refines the entry time by bisection") {
    auto X = frozen_field();
    auto d = shared_delta(X);
    REQUIRE(d.found);
    auto samples = sample_delta_stratified(d.chart, 4, 3);
    auto fr = first_return_flow(X, d.chart, samples.points[0], 0.5, 40000);
    if (!fr.censored) {
        CHECK(fr.time > 0);
        // entry time refined within the final step
        CHECK(fr.time <= fr.steps * 0.5);
        CHECK(fr.time >= (fr.steps - 1) * 0.5);
    }
}
