#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynlab/flatness.hpp"
#include "dynlab/geometry.hpp"
#include "dynlab/rng.hpp"
#include "dynlab/suspension.hpp"

// The perturbation cylinder Delta_t, the N_t rule, the gentle twist phi_sigma,
// and the composed map h_{t,sigma} = phi_sigma o phi^t.

namespace dynlab {

// minimal positive integer N with eta^{tN} > 100
inline int compute_Nt(double eta, double t) {
    if (!(eta > 1.0) || !(t > 0.0 && t <= 1.0))
        throw std::invalid_argument("compute_Nt: eta > 1, t in (0,1]");
    int n = static_cast<int>(std::ceil(std::log(100.0) / (t * std::log(eta))));
    n = std::max(n, 1);
    while (std::pow(eta, t * n) <= 100.0) ++n;
    while (n > 1 && std::pow(eta, t * (n - 1)) > 100.0) --n;
    return n;
}

struct PerturbationSpec {
    CylChart chart;
    double sigma = 0.0; // nominal range [0,1]; negative values mirror the twist
    PsiProfile psi;
    Psi1Profile psi1;

    static PerturbationSpec make(const CylChart& chart, double sigma, double psi_amp = 1.0) {
        PerturbationSpec s;
        s.chart = chart;
        s.sigma = sigma;
        s.psi = PsiProfile{chart.gamma0, psi_amp};
        s.psi1 = Psi1Profile{chart.gamma0, SmoothBridge{1.0}};
        return s;
    }

    PerturbationSpec with_sigma(double sg) const {
        PerturbationSpec s = *this;
        s.sigma = sg;
        return s;
    }
};

// 2x2 restriction of d(phi_sigma) to the (xi_u, xi_c) chart plane.
struct TwistBlocks {
    double a = 1, b = 0, c = 0, d = 1;
};

inline TwistBlocks twist_blocks(const PerturbationSpec& s, double rho, double theta,
                                double zeta_norm) {
    double p1 = s.psi1.value(zeta_norm);
    double ang = s.sigma * s.psi.value(rho) * p1;
    double shear = s.sigma * rho * s.psi.deriv(rho) * p1;
    double tp = theta + ang;
    TwistBlocks m;
    m.a = std::cos(ang) - shear * std::sin(tp) * std::cos(theta);
    m.b = -std::sin(ang) - shear * std::sin(tp) * std::sin(theta);
    m.c = std::sin(ang) + shear * std::cos(tp) * std::cos(theta);
    m.d = std::cos(ang) + shear * std::cos(tp) * std::sin(theta);
    return m;
}

// closed-form sigma-derivatives of the blocks at sigma = 0 (quadrature route)
struct TwistBlockDerivs {
    double ap, bp, cp, dp;
    double dpp;
};

inline TwistBlockDerivs twist_block_derivs0(const PerturbationSpec& s, double rho, double theta,
                                            double zeta_norm) {
    double p1 = s.psi1.value(zeta_norm);
    double psit = s.psi.value(rho) * p1;         // psi~
    double psit_r = rho * s.psi.deriv(rho) * p1; // rho d psi~/d rho
    double sn = std::sin(theta), cs = std::cos(theta);
    TwistBlockDerivs d;
    d.ap = -psit_r * sn * cs;
    d.bp = -psit - psit_r * sn * sn;
    d.cp = psit + psit_r * cs * cs;
    d.dp = psit_r * sn * cs;
    d.dpp = -psit * psit - 2.0 * psit * psit_r * sn * sn;
    return d;
}

// phi_sigma in ambient coordinates: identity off Delta; in chart coordinates
// (rho, theta, zeta) -> (rho, theta + sigma psi(rho) psi1(|zeta|), zeta).
inline Vec phi_sigma(const PerturbationSpec& s, const Vec& z, Mat* D = nullptr) {
    int m = s.chart.m;
    if (D) *D = Mat::identity(m);
    if (s.sigma == 0.0) return z; // exact identity, no chart round trip
    auto cc = s.chart.to_cylindrical(z);
    if (!cc) return z;
    double zn = norm2(cc->zeta);
    double psi_v = s.psi.value(cc->rho), psi_d = s.psi.deriv(cc->rho);
    double p1_v = s.psi1.value(zn), p1_d = s.psi1.deriv(zn);
    if ((psi_v == 0.0 && psi_d == 0.0) || (p1_v == 0.0 && p1_d == 0.0)) return z;

    double ang = s.sigma * psi_v * p1_v;
    CylCoords out = *cc;
    out.theta = cc->theta + ang;
    Vec zp = s.chart.from_cylindrical(out);
    if (D) {
        double th = cc->theta, tp = out.theta, rho = cc->rho;
        double xup = rho * std::cos(tp), xcp = rho * std::sin(tp);
        Vec dT(m, 0.0); // gradient of the twist angle in chart coordinates
        dT[0] = s.sigma * psi_d * p1_v * std::cos(th);
        dT[1] = s.sigma * psi_d * p1_v * std::sin(th);
        if (zn > 1e-14 && p1_d != 0.0)
            for (int l = 0; l < m - 2; ++l)
                dT[2 + l] = s.sigma * psi_v * p1_d * cc->zeta[l] / zn;
        Mat Dc = Mat::identity(m);
        double ca = std::cos(ang), sa = std::sin(ang);
        Dc(0, 0) = ca - xcp * dT[0];
        Dc(0, 1) = -sa - xcp * dT[1];
        Dc(1, 0) = sa + xup * dT[0];
        Dc(1, 1) = ca + xup * dT[1];
        for (int l = 2; l < m; ++l) {
            Dc(0, l) = -xcp * dT[l];
            Dc(1, l) = xup * dT[l];
        }
        *D = matmul(transpose(s.chart.P), matmul(Dc, s.chart.P));
    }
    return zp;
}

// ---------------------------------------------------------------------------
// Delta_t search
// ---------------------------------------------------------------------------
struct DeltaSearchParams {
    std::vector<double> gamma_range = {0.03, 0.025, 0.02, 0.015, 0.012, 0.009};
    int n_candidates = 240;
    double x_center_radius = 0.15;
    double tau_lo = 0.3, tau_hi = 0.7;
    int oracle_samples = 2000;
    uint64_t seed = 1;
};

struct DeltaSearchResult {
    bool found = false;
    std::string failure;
    CylChart chart;
    double t = 1.0;
    int n_t = 0;
    std::vector<int> verified_js;
    std::vector<double> margins; // per (j, direction), gauge units (gamma = 1)
    double margin_min = 0;
    double collar_margin = 0;
    double oracle_margin = 0;
    std::string avoidance_note;
};

namespace delta_detail {

// The tube dynamics is linear on chart displacements, so the image of the
// Delta bounding box under j steps is an exact interval enclosure. Separation
// must hold for every lattice copy of the fiber offset: for each candidate
// wrap, some frame coordinate has to keep the boxes strictly apart.
inline std::optional<double> box_separation(const CylChart& chart, const ToralAutomorphism& A,
                                            const Mat& G, const Vec& image_base) {
    int m = chart.m;
    int d = A.d;
    Mat L = matmul(chart.P, matmul(G, transpose(chart.P)));
    Vec half_frame(m, 0.0);
    for (int i = 0; i < m; ++i) {
        double h = 0;
        for (int j = 0; j < m; ++j) h += std::fabs(L(i, j)) * chart.gamma0;
        half_frame[i] = h;
    }
    // ambient offset of the image base, fiber part wrapped to the centered rep
    Vec off = chart.displacement(image_base);
    // ambient halfwidths of the image box (for lattice ranging)
    Vec half_amb(m, 0.0);
    for (int j = 0; j < m; ++j) {
        double h = 0;
        for (int i = 0; i < m; ++i) h += std::fabs(chart.P(i, j)) * half_frame[i];
        half_amb[j] = h;
    }
    // candidate lattice shifts per fiber coordinate
    std::vector<int> lo(d), hi(d);
    long total = 1;
    for (int i = 0; i < d; ++i) {
        double reach = std::fabs(off[2 + i]) + half_amb[2 + i] + 2.0 * chart.gamma0 + 0.5;
        int r = static_cast<int>(std::ceil(reach));
        lo[i] = -r;
        hi[i] = r;
        total *= (2 * r + 1);
        if (total > 2'000'000) return std::nullopt; // enclosure too stretched to certify
    }
    double worst = 1e300;
    std::vector<int> n(d, 0);
    std::function<bool(int)> rec = [&](int pos) -> bool {
        if (pos == d) {
            Vec o = off;
            for (int i = 0; i < d; ++i) o[2 + i] += n[i];
            Vec fo = matvec(chart.P, o);
            double best = -1e300;
            for (int i = 0; i < m; ++i) {
                double gap = std::fabs(fo[i]) - (half_frame[i] + chart.gamma0);
                best = std::max(best, gap / chart.gamma0);
            }
            if (best <= 0.0) return false;
            worst = std::min(worst, best);
            return true;
        }
        for (n[pos] = lo[pos]; n[pos] <= hi[pos]; ++n[pos])
            if (!rec(pos + 1)) return false;
        return true;
    };
    if (!rec(0)) return std::nullopt;
    return worst;
}

} // namespace delta_detail

// exact enclosure certificate for both Delta_t conditions
inline std::optional<std::vector<double>> verify_delta_disjoint(const SuspensionField& X,
                                                                const CylChart& chart, double t,
                                                                int n_t) {
    std::vector<double> margins;
    for (int dir : {+1, -1}) {
        Vec base = chart.base;
        TubeStepper stepper(X, t);
        Mat fiber = Mat::identity(X.A.d);
        int glued = 0;
        for (int j = 1; j <= n_t; ++j) {
            int k = stepper.step(base, dir);
            for (int s = 0; s < std::abs(k); ++s)
                fiber = matmul(k > 0 ? X.A.M : X.A.Minv, fiber);
            glued += k;
            Mat G = Mat::identity(chart.m);
            for (int r = 0; r < X.A.d; ++r)
                for (int c = 0; c < X.A.d; ++c) G(2 + r, 2 + c) = fiber(r, c);
            auto sep = delta_detail::box_separation(chart, X.A, G, base);
            if (!sep) return std::nullopt;
            margins.push_back(*sep);
        }
        (void)glued;
    }
    return margins;
}

// sampled re-verification: maps mesh points exactly and reports the minimal
// gauge distance of every image to Delta (the independent oracle)
inline double delta_oracle_margin(const SuspensionField& X, const CylChart& chart, double t,
                                  int n_t, int samples, uint64_t seed) {
    Rng rng(seed);
    TubeStepper stepper(X, t);
    double gamma = chart.gamma0;
    double worst = 1e300;
    for (int s = 0; s < samples; ++s) {
        double rho = gamma * std::sqrt(rng.uniform());
        double th = rng.uniform(0.0, 2.0 * M_PI);
        auto ball = rng.unit_ball(chart.m - 2);
        CylCoords cc{rho, th, Vec(ball.begin(), ball.end())};
        for (auto& v : cc.zeta) v *= gamma;
        Vec p0 = chart.from_cylindrical(cc);
        for (int dir : {+1, -1}) {
            Vec q = p0;
            for (int j = 1; j <= n_t; ++j) {
                stepper.step(q, dir);
                auto c2 = chart.to_cylindrical(q);
                double gauge = c2 ? std::max(c2->rho / gamma, norm2(c2->zeta) / gamma) - 1.0 : 1e6;
                worst = std::min(worst, gauge);
            }
        }
    }
    return worst;
}

// Searches orbit-sampled candidate charts, shrinking gamma on failure.
// Exhaustion produces an explicit failure report, never a silent success.
inline DeltaSearchResult find_delta_t(const SuspensionField& X, double t, int n_t,
                                      const DeltaSearchParams& params = {}) {
    DeltaSearchResult res;
    res.t = t;
    res.n_t = n_t;
    if (X.V.stream.c_h != 0.0) {
        res.failure = "delta search certificate requires the frozen disk factor (c_H = 0)";
        return res;
    }
    Rng rng(params.seed);
    for (double gamma : params.gamma_range) {
        Rng cand_rng = rng.substream("candidates", static_cast<uint64_t>(gamma * 1e7));
        for (int c = 0; c < params.n_candidates; ++c) {
            Vec x = {cand_rng.uniform(-1.0, 1.0), cand_rng.uniform(-1.0, 1.0)};
            if (norm2(x) > 1.0) {
                --c;
                continue;
            }
            x = params.x_center_radius * x;
            Vec z0(X.m, 0.0);
            z0[0] = x[0];
            z0[1] = x[1];
            for (int i = 0; i < X.A.d; ++i) z0[2 + i] = cand_rng.uniform();
            z0[X.m - 1] = cand_rng.uniform(params.tau_lo, params.tau_hi);
            double collar = X.alpha.u_inner - (norm2({z0[0], z0[1]}) + gamma);
            if (collar <= 0.02) continue;
            CylChart chart;
            try {
                chart = cyl_chart_at(z0, gamma, X.A, X.eval(z0));
            } catch (const std::exception&) {
                continue;
            }
            auto margins = verify_delta_disjoint(X, chart, t, n_t);
            if (!margins) continue;
            double oracle =
                delta_oracle_margin(X, chart, t, n_t, params.oracle_samples, params.seed ^ 0x5eed);
            if (oracle <= 0) continue;
            res.found = true;
            res.chart = chart;
            res.margins = *margins;
            res.margin_min = 1e300;
            for (double mg : *margins) res.margin_min = std::min(res.margin_min, mg);
            for (int j = 1; j <= n_t; ++j) res.verified_js.push_back(j);
            for (int j = 1; j <= n_t; ++j) res.verified_js.push_back(-j);
            res.collar_margin = collar;
            res.oracle_margin = oracle;
            res.avoidance_note = "active avoidance sets: boundary collar U x L (alpha < 1)";
            return res;
        }
    }
    res.failure = "candidate exhaustion: no chart satisfied the disjointness conditions";
    return res;
}

// h_{t,sigma} = phi_sigma o phi^t through the full integrator
struct HtSigma {
    const SuspensionField* X;
    double t = 1.0;
    PerturbationSpec spec;
    FlowOpts opts;

    Vec apply(const Vec& z, Mat* D = nullptr) const {
        FlowOpts o = opts;
        o.with_jacobian = D != nullptr;
        FlowResult fr = flow_map(*X, t, z, o);
        Mat Dt;
        Vec out = phi_sigma(spec, fr.z, D ? &Dt : nullptr);
        if (D) *D = matmul(Dt, fr.J);
        return out;
    }
};

} // namespace dynlab
