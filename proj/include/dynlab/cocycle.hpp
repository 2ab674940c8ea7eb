#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynlab/perturbation.hpp"
#include "dynlab/rng.hpp"
#include "dynlab/stats.hpp"
#include "dynlab/suspension.hpp"

// First-return analysis of h_{t,sigma} on Delta_t through the invariance
// equation of the return cocycle. The perturbed return map factorizes as
// H_{t,sigma} = phi_sigma o H_{t,0}; the unperturbed return block is
// diag(eta(z), 1) in the moving frame (e_u, X) with eta(z) = eta^{gluings}
// exactly, so the per-sample observable reduces to
//   log eta(sigma, z) = K log(eta) + log|A(sigma, w) + B(sigma, w) beta eta^{-K}|
// with w = H_{t,0}(z) and beta given by the eta-damped backward series.

namespace dynlab {

struct ReturnRec {
    Vec point; // first re-entry into Delta (pre-twist)
    long steps = 0;
    long gluings = 0;
    bool censored = false;
};

class TubeReturnEngine {
  public:
    TubeReturnEngine(const SuspensionField& X, const CylChart& chart, double t, double psi_amp,
                     long max_iter = 300000)
        : x_(&X), chart_(chart), t_(t), max_iter_(max_iter), stepper_(X, t) {
        spec_ = PerturbationSpec::make(chart, 0.0, psi_amp);
        log_eta1_ = std::log(X.A.eta());
    }

    const SuspensionField& field() const { return *x_; }
    const CylChart& chart() const { return chart_; }
    const PerturbationSpec& spec() const { return spec_; }
    const TubeStepper& stepper() const { return stepper_; }
    double log_eta_unit() const { return log_eta1_; }
    double t() const { return t_; }

    bool in_delta(const Vec& z) const { return chart_.in_delta(z); }

    Vec twist(const Vec& z, double sigma) const {
        return phi_sigma(spec_.with_sigma(sigma), z, nullptr);
    }

    // unperturbed first return of phi^t to Delta (forward or backward)
    ReturnRec first_return(Vec z, int dir = +1) const {
        ReturnRec rec;
        for (long it = 1; it <= max_iter_; ++it) {
            rec.gluings += stepper_.step(z, dir);
            if (chart_.in_delta(z)) {
                rec.point = z;
                rec.steps = it;
                return rec;
            }
        }
        rec.censored = true;
        return rec;
    }

    struct EtaResult {
        double log_eta = 0;
        double beta = 0;
        long steps = 0;
        bool censored = false;
    };

    EtaResult log_eta_sigma(const Vec& z, double sigma, int depth = 4) const {
        ReturnRec fwd = first_return(z, +1);
        return log_eta_sigma_cached(z, sigma, fwd, depth);
    }

    // variant reusing the sigma-independent forward return of z
    EtaResult log_eta_sigma_cached(const Vec& z, double sigma, const ReturnRec& fwd,
                                   int depth = 4) const {
        EtaResult out;
        if (fwd.censored) {
            out.censored = true;
            return out;
        }
        out.steps = fwd.steps;
        double k_log = static_cast<double>(std::llabs(fwd.gluings)) * log_eta1_;
        if (sigma == 0.0) {
            out.log_eta = k_log;
            return out;
        }
        double beta = 0.0;
        if (!beta_backward(z, sigma, depth, beta)) {
            out.censored = true;
            return out;
        }
        out.beta = beta;
        auto cw = chart_.to_cylindrical(fwd.point);
        TwistBlocks bl = twist_blocks(spec_.with_sigma(sigma), cw->rho, cw->theta, norm2(cw->zeta));
        double damp = std::exp(-k_log); // underflows to 0 for long returns, exactly as it should
        out.log_eta = k_log + std::log(std::fabs(bl.a + bl.b * beta * damp));
        return out;
    }

    // residual of the invariance equation: beta at the image point by forward
    // push vs by its own independent backward series
    double invariance_residual(const Vec& z, double sigma, int depth = 5) const {
        ReturnRec fwd = first_return(z, +1);
        if (fwd.censored) return -1.0;
        double beta_z = 0;
        if (!beta_backward(z, sigma, depth, beta_z)) return -1.0;
        auto cw = chart_.to_cylindrical(fwd.point);
        TwistBlocks bl = twist_blocks(spec_.with_sigma(sigma), cw->rho, cw->theta, norm2(cw->zeta));
        double damp = std::exp(-static_cast<double>(std::llabs(fwd.gluings)) * log_eta1_);
        double denom = bl.a + bl.b * beta_z * damp;
        double beta_push = (bl.c + bl.d * beta_z * damp) / denom;
        Vec image = twist(fwd.point, sigma);
        double beta_indep = 0;
        if (!beta_backward(image, sigma, depth, beta_indep)) return -1.0;
        return std::fabs(beta_push - beta_indep);
    }

  private:
    const SuspensionField* x_;
    CylChart chart_;
    double t_;
    long max_iter_;
    TubeStepper stepper_;
    PerturbationSpec spec_;
    double log_eta1_ = 0;

    // beta(sigma, p0) from the backward H_{t,sigma} orbit: p_{k+1} =
    // H_{t,0}^{-1}(phi_{-sigma}(p_k)), blocks at q_k = phi_{-sigma}(p_k),
    // each level damped by the forward return factor from p_{k+1}.
    bool beta_backward(const Vec& p0, double sigma, int depth, double& beta_out) const {
        std::vector<double> qa(depth), qb(depth), qc(depth), qd(depth), damp(depth);
        Vec p = p0;
        for (int k = 0; k < depth; ++k) {
            Vec q = twist(p, -sigma);
            auto cq = chart_.to_cylindrical(q);
            TwistBlocks bl =
                twist_blocks(spec_.with_sigma(sigma), cq->rho, cq->theta, norm2(cq->zeta));
            ReturnRec back = first_return(q, -1);
            if (back.censored) return false;
            qa[k] = bl.a;
            qb[k] = bl.b;
            qc[k] = bl.c;
            qd[k] = bl.d;
            damp[k] = std::exp(-static_cast<double>(std::llabs(back.gluings)) * log_eta1_);
            p = back.point;
        }
        double beta = 0.0;
        for (int k = depth - 1; k >= 0; --k)
            beta = (qc[k] + qd[k] * beta * damp[k]) / (qa[k] + qb[k] * beta * damp[k]);
        beta_out = beta;
        return true;
    }
};

// one record of the return cocycle at a sample point
struct ReturnCocycleEntry {
    long return_steps = 0;
    double log_eta0 = 0;      // log |dH_{t,0}| restricted to the unstable line
    double log_eta_sigma = 0; // perturbed value through the invariance equation
    double beta = 0;          // slope of the perturbed unstable line at z
    TwistBlocks blocks;       // d phi_sigma at the return point, chart frame
    double residual = 0;      // invariance-equation residual (two-route beta)
    bool flagged = false;     // censored return or residual over threshold
};

inline ReturnCocycleEntry return_cocycle(const TubeReturnEngine& engine, const Vec& z,
                                         double sigma, double residual_tol = 1e-6) {
    ReturnCocycleEntry e;
    ReturnRec fwd = engine.first_return(z, +1);
    if (fwd.censored) {
        e.flagged = true;
        return e;
    }
    e.return_steps = fwd.steps;
    e.log_eta0 = static_cast<double>(std::llabs(fwd.gluings)) * engine.log_eta_unit();
    auto cw = engine.chart().to_cylindrical(fwd.point);
    e.blocks = twist_blocks(engine.spec().with_sigma(sigma), cw->rho, cw->theta,
                            norm2(cw->zeta));
    auto r = engine.log_eta_sigma(z, sigma);
    if (r.censored) {
        e.flagged = true;
        return e;
    }
    e.log_eta_sigma = r.log_eta;
    e.beta = r.beta;
    if (sigma != 0.0) {
        e.residual = engine.invariance_residual(z, sigma);
        if (e.residual < 0 || e.residual > residual_tol) e.flagged = true;
    }
    return e;
}

// ---------------------------------------------------------------------------
// common-random-number sampling of Delta (volume element rho drho dtheta dzeta)
// ---------------------------------------------------------------------------
struct DeltaSamples {
    std::vector<Vec> points;
    std::vector<int> stratum;
    int n_strata = 1;
};

inline DeltaSamples sample_delta_stratified(const CylChart& chart, int n_samples, uint64_t seed,
                                            int strata_u = 25, int strata_th = 20) {
    DeltaSamples out;
    out.n_strata = strata_u * strata_th;
    int reps = std::max(1, n_samples / out.n_strata);
    Rng rng(seed);
    double gamma = chart.gamma0;
    for (int iu = 0; iu < strata_u; ++iu)
        for (int it = 0; it < strata_th; ++it)
            for (int r = 0; r < reps; ++r) {
                double u = (iu + rng.uniform()) / strata_u;
                double th = 2.0 * M_PI * (it + rng.uniform()) / strata_th;
                auto ball = rng.unit_ball(chart.m - 2);
                CylCoords cc{gamma * std::sqrt(u), th, Vec(ball.begin(), ball.end())};
                for (auto& v : cc.zeta) v *= gamma;
                out.points.push_back(chart.from_cylindrical(cc));
                out.stratum.push_back(iu * strata_th + it);
            }
    return out;
}

inline ConfidenceInterval stratified_ci(const std::vector<double>& values,
                                        const std::vector<int>& stratum, int n_strata) {
    std::vector<RunningStats> per(n_strata);
    for (size_t i = 0; i < values.size(); ++i) per[stratum[i]].add(values[i]);
    double mean = 0, var = 0;
    size_t n = values.size();
    for (const auto& s : per) {
        if (s.n == 0) continue;
        double w = static_cast<double>(s.n) / static_cast<double>(n);
        mean += w * s.mean;
        if (s.n > 1) var += w * w * s.variance() / static_cast<double>(s.n);
    }
    double se = std::sqrt(var);
    return {mean, mean - 1.959963984540054 * se, mean + 1.959963984540054 * se, se};
}

struct LSigmaEstimate {
    double value = 0;
    double se = 0;
    double censored_fraction = 0;
    bool valid = false;
    int n_used = 0;
};

// Monte Carlo mean of log eta(sigma, z) over Delta. Censored returns are
// excluded with a recorded fraction; above 1% the estimate is invalidated.
inline LSigmaEstimate estimate_L_sigma(const TubeReturnEngine& engine, double sigma, int n_samples,
                                       uint64_t seed) {
    auto samples = sample_delta_stratified(engine.chart(), n_samples, seed);
    std::vector<double> vals;
    std::vector<int> strat;
    int censored = 0;
    for (size_t i = 0; i < samples.points.size(); ++i) {
        auto r = engine.log_eta_sigma(samples.points[i], sigma);
        if (r.censored) {
            ++censored;
            continue;
        }
        vals.push_back(r.log_eta);
        strat.push_back(samples.stratum[i]);
    }
    LSigmaEstimate est;
    est.censored_fraction = static_cast<double>(censored) / samples.points.size();
    est.n_used = static_cast<int>(vals.size());
    if (est.censored_fraction > 0.01) return est;
    auto ci = stratified_ci(vals, strat, samples.n_strata);
    est.value = ci.estimate;
    est.se = ci.stderr_mean;
    est.valid = true;
    return est;
}

// ---------------------------------------------------------------------------
// the quadrature second route
// ---------------------------------------------------------------------------
struct QuadratureReport {
    double theta_integral = 0; // quadrature of sin cos over a period
    double i_psi2 = 0;         // E[psi~^2] over Delta, probability normalization
    double i_rho_psir2 = 0;    // E[rho^2 psi~_rho^2]
    double j1 = 0;             // quadrature of (D')^2 - D'' + 2 B'C'
    double j1_exact = 0;       // theta-reduction: -(1/8) E[rho^2 psi~_rho^2]
    double j2 = 0;
    double j2_tail_bound = 0;
    double rhs_bound = 0;      // -0.025 (I_psi2 + I_rho2)
    bool bound_holds = false;
};

inline double halton(uint64_t i, int base) {
    double f = 1.0, r = 0.0;
    while (i > 0) {
        f /= base;
        r += f * static_cast<double>(i % base);
        i /= base;
    }
    return r;
}

// J1 and J2 by direct quadrature of the closed-form sigma-derivatives of the
// bump profiles, independent of the Monte Carlo path. J1 also gets its exact
// theta-reduction as an oracle; J2 carries the damped backward terms plus the
// analytic tail bound from the N_t rule (per-level factor > 100).
inline QuadratureReport j_quadrature(const TubeReturnEngine& engine, int n_nodes = 20000,
                                     int j2_depth = 2) {
    const CylChart& chart = engine.chart();
    const PerturbationSpec& spec = engine.spec();
    double gamma = chart.gamma0;
    QuadratureReport rep;

    {
        int n = 64;
        double s = 0;
        for (int i = 0; i < n; ++i) {
            double th = 2.0 * M_PI * i / n;
            s += std::sin(th) * std::cos(th);
        }
        rep.theta_integral = s * 2.0 * M_PI / n;
    }

    { // exact radial moments
        int nq = 4000;
        double su_psi2 = 0, su_rho2 = 0;
        for (int i = 0; i < nq; ++i) {
            double u = (i + 0.5) / nq;
            double rho = gamma * std::sqrt(u);
            double psi = spec.psi.value(rho), dpsi = spec.psi.deriv(rho);
            su_psi2 += psi * psi;
            su_rho2 += rho * rho * dpsi * dpsi;
        }
        int q = chart.m - 2;
        double sz = 0, sw = 0;
        for (int i = 0; i < nq; ++i) {
            double r = gamma * (i + 0.5) / nq;
            double w = std::pow(r / gamma, q - 1);
            double p1 = spec.psi1.value(r);
            sz += w * p1 * p1;
            sw += w;
        }
        double ball_avg = sz / sw;
        rep.i_psi2 = (su_psi2 / nq) * ball_avg;
        rep.i_rho_psir2 = (su_rho2 / nq) * ball_avg;
        rep.j1_exact = -rep.i_rho_psir2 / 8.0;
    }

    { // J1: every term of (D')^2 - D'' + 2B'C' is quadratic in psi1(|zeta|),
      // so the zeta-ball factor splits off exactly and a tensor quadrature in
      // (rho^2, theta) finishes the job
        int q = chart.m - 2;
        int nq = 4000;
        double sz = 0, sw = 0;
        for (int i = 0; i < nq; ++i) {
            double r = gamma * (i + 0.5) / nq;
            double w = std::pow(r / gamma, q - 1);
            double p1 = spec.psi1.value(r);
            sz += w * p1 * p1;
            sw += w;
        }
        double ball_avg = sz / sw;
        // psi1(0) = 1 on the plateau, so zeta_norm = 0 evaluates the psi1 == 1 slice
        int nu = 512, nth = 128;
        double acc = 0;
        for (int iu = 0; iu < nu; ++iu) {
            double u = (iu + 0.5) / nu;
            double rho = gamma * std::sqrt(u);
            for (int it = 0; it < nth; ++it) {
                double th = 2.0 * M_PI * it / nth;
                auto dv = twist_block_derivs0(spec, rho, th, 0.0);
                acc += dv.dp * dv.dp - dv.dpp + 2.0 * dv.bp * dv.cp;
            }
        }
        rep.j1 = ball_avg * acc / (nu * nth);
    }

    { // J2 by plain seeded sampling: the backward terms do not factorize, and
      // the eta-damping makes them tiny; the sample mean plus the tail bound
      // brackets the truth
        Rng rng(0x12ac5);
        double j2_sum = 0;
        long j2_nodes = std::max(1, n_nodes / 4);
        for (long i = 0; i < j2_nodes; ++i) {
            double rho = gamma * std::sqrt(rng.uniform());
            double th = rng.uniform(0.0, 2.0 * M_PI);
            auto ball = rng.unit_ball(chart.m - 2);
            Vec zeta(ball.begin(), ball.end());
            for (auto& v : zeta) v *= gamma;
            auto dv = twist_block_derivs0(spec, rho, th, norm2(zeta));
            Vec p = chart.from_cylindrical({rho, th, zeta});
            double damp_prod = 1.0;
            for (int n = 1; n <= j2_depth; ++n) {
                ReturnRec back = engine.first_return(p, -1);
                if (back.censored) break;
                damp_prod *= std::exp(-static_cast<double>(std::llabs(back.gluings)) *
                                      engine.log_eta_unit());
                p = back.point;
                auto cp = chart.to_cylindrical(p);
                auto dn = twist_block_derivs0(spec, cp->rho, cp->theta, norm2(cp->zeta));
                j2_sum += 2.0 * dv.bp * dn.cp * damp_prod;
            }
        }
        rep.j2 = j2_sum / static_cast<double>(j2_nodes);
    }
    rep.j2_tail_bound = 4.0 * (rep.i_psi2 + rep.i_rho_psir2) *
                        std::pow(100.0, -(j2_depth + 1)) / (1.0 - 0.01);
    rep.rhs_bound = -0.025 * (rep.i_psi2 + rep.i_rho_psir2);
    rep.bound_holds = (rep.j1 + rep.j2 + rep.j2_tail_bound) < rep.rhs_bound;
    return rep;
}

// ---------------------------------------------------------------------------
// the sigma scan
// ---------------------------------------------------------------------------
struct SigmaScanReport {
    std::vector<double> sigma_grid;
    std::vector<double> l_values;
    std::vector<double> l_se;
    ConfidenceInterval d1; // dL/dsigma|_0, Richardson refined, CRN-paired
    ConfidenceInterval d2; // d2L/dsigma2|_0
    QuadratureReport quad;
    double censored_fraction = 0;
    int n_samples = 0;
    uint64_t seed = 0;
    bool d1_contains_zero = false;
    bool d2_below_zero = false;
    bool mc_quad_consistent = false;
    double mc_quad_rel_gap = 0;
    double sigma_min = 0, l_min = 0, l_zero = 0;
    bool interior_minimum = false;
    ConfidenceInterval l_drop_at_min; // CRN-paired L_0 - L_sigma at the minimum
    double mean_return_steps = 0;
    std::string verdict;
};

inline SigmaScanReport sigma_scan(const TubeReturnEngine& engine, double sigma_max, int n_samples,
                                  uint64_t seed) {
    SigmaScanReport rep;
    rep.n_samples = n_samples;
    rep.seed = seed;
    double d = sigma_max / 8.0;
    // the negative side is only needed for the centered stencils at 0
    std::vector<double> grid = {0.0, d / 2, -d / 2, d, -d};
    for (int k = 2; k <= 8; ++k) grid.push_back(k * d);
    auto samples = sample_delta_stratified(engine.chart(), n_samples, seed);
    size_t np = samples.points.size();
    size_t ng = grid.size();
    std::vector<std::vector<double>> table(ng, std::vector<double>(np, 0.0));
    std::vector<char> bad(np, 0);
    std::vector<double> ret_steps(np, 0.0);
    for (size_t i = 0; i < np; ++i) {
        ReturnRec fwd = engine.first_return(samples.points[i], +1);
        for (size_t g = 0; g < ng; ++g) {
            auto r = engine.log_eta_sigma_cached(samples.points[i], grid[g], fwd);
            if (r.censored) {
                bad[i] = 1;
                break;
            }
            table[g][i] = r.log_eta;
            if (grid[g] == 0.0) ret_steps[i] = static_cast<double>(r.steps);
        }
    }
    std::vector<size_t> keep;
    int censored = 0;
    for (size_t i = 0; i < np; ++i) {
        if (bad[i])
            ++censored;
        else
            keep.push_back(i);
    }
    rep.censored_fraction = static_cast<double>(censored) / static_cast<double>(np);

    auto collect = [&](size_t g) {
        std::vector<double> v;
        std::vector<int> st;
        v.reserve(keep.size());
        for (size_t i : keep) {
            v.push_back(table[g][i]);
            st.push_back(samples.stratum[i]);
        }
        return stratified_ci(v, st, samples.n_strata);
    };

    std::vector<size_t> order(ng);
    for (size_t g = 0; g < ng; ++g) order[g] = g;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return grid[a] < grid[b]; });
    for (size_t g : order) {
        auto ci = collect(g);
        rep.sigma_grid.push_back(grid[g]);
        rep.l_values.push_back(ci.estimate);
        rep.l_se.push_back(ci.stderr_mean);
    }

    auto idx_of = [&](double s) {
        for (size_t g = 0; g < ng; ++g)
            if (grid[g] == s) return g;
        throw std::logic_error("sigma grid value missing");
    };
    size_t i0 = idx_of(0.0), ip = idx_of(d), im = idx_of(-d), ih = idx_of(d / 2),
           imh = idx_of(-d / 2);

    std::vector<double> d1v, d2v;
    std::vector<int> st;
    for (size_t i : keep) {
        double lp = table[ip][i], lm = table[im][i], l0 = table[i0][i];
        double lph = table[ih][i], lmh = table[imh][i];
        double d1a = (lp - lm) / (2 * d), d1b = (lph - lmh) / d;
        double d2a = (lp - 2 * l0 + lm) / (d * d);
        double d2b = (lph - 2 * l0 + lmh) / (d * d / 4);
        d1v.push_back((4 * d1b - d1a) / 3);
        d2v.push_back((4 * d2b - d2a) / 3);
        st.push_back(samples.stratum[i]);
    }
    rep.d1 = stratified_ci(d1v, st, samples.n_strata);
    rep.d2 = stratified_ci(d2v, st, samples.n_strata);
    rep.d1_contains_zero = rep.d1.contains(0.0);
    rep.d2_below_zero = rep.d2.strictly_below(0.0);

    RunningStats steps;
    for (size_t i : keep) steps.add(ret_steps[i]);
    rep.mean_return_steps = steps.mean;

    rep.quad = j_quadrature(engine);
    double quad_d2 = rep.quad.j1 + rep.quad.j2;
    rep.mc_quad_rel_gap = std::fabs(rep.d2.estimate - quad_d2) / std::fabs(quad_d2);
    rep.mc_quad_consistent = rep.mc_quad_rel_gap <= 0.10;

    for (size_t g = 0; g < rep.sigma_grid.size(); ++g)
        if (rep.sigma_grid[g] == 0.0) rep.l_zero = rep.l_values[g];
    rep.sigma_min = 0;
    rep.l_min = rep.l_zero;
    for (size_t g = 0; g < rep.sigma_grid.size(); ++g) {
        if (rep.sigma_grid[g] <= 0) continue;
        if (rep.l_values[g] < rep.l_min) {
            rep.l_min = rep.l_values[g];
            rep.sigma_min = rep.sigma_grid[g];
        }
    }
    rep.interior_minimum = rep.sigma_min > 0 && rep.sigma_min < sigma_max;

    if (rep.sigma_min > 0) { // CRN-paired drop L_0 - L_sigma at the scan minimum
        size_t gmin = idx_of(rep.sigma_min);
        std::vector<double> drops;
        std::vector<int> dst;
        for (size_t i : keep) {
            drops.push_back(table[i0][i] - table[gmin][i]);
            dst.push_back(samples.stratum[i]);
        }
        rep.l_drop_at_min = stratified_ci(drops, dst, samples.n_strata);
    }

    bool conclusive = rep.censored_fraction <= 0.01 && (rep.d2.hi < 0 || rep.d2.lo > 0);
    rep.verdict = conclusive ? "ok" : "inconclusive, increase samples";
    return rep;
}

// ---------------------------------------------------------------------------
// central exponent of h_{t,sigma}
// ---------------------------------------------------------------------------
struct CentralExponentReport {
    ConfidenceInterval tube_average; // E[log|dh restricted to E^c|] on the supporting tube
    double tube_fraction = 0;        // vol of the supporting tube / vol(N)
    ConfidenceInterval integral;     // tube-stratified estimate of the N-integral
    ConfidenceInterval equivalence;  // vol(Delta)/vol(N) * (L_0 - L_sigma), CRN-paired
    double delta_fraction = 0;
    bool bundle_flagged = false;
    int n_seeds = 0;
};

// Direct route: the integrand vanishes identically outside the tube
// {|zeta_x| < gamma, |tau - tau_0| < gamma} (such orbits never meet Delta and
// the center is exactly isometric there), so seeds are drawn in the tube and
// the integral is scaled by its volume. E^c is settled by pulling a vector
// back through the recorded 2x2 cocycle: backward propagation contracts the
// unstable component by eta^{-K} per return. The equivalence route uses the
// determinant identity: integral = vol(Delta)/vol(N) * (L_0 - L_sigma).
inline CentralExponentReport central_exponent(const TubeReturnEngine& engine, double sigma,
                                              int n_seeds, int n_steps, uint64_t seed) {
    const CylChart& chart = engine.chart();
    const SuspensionField& X = engine.field();
    double gamma = chart.gamma0;
    CentralExponentReport rep;
    rep.n_seeds = n_seeds;

    // vol fractions (vol N = pi * 1 * 1; disk tube area pi gamma^2; tau slab 2 gamma)
    rep.tube_fraction = gamma * gamma * 2.0 * gamma;
    int q = chart.m - 2;
    double vq = std::pow(M_PI, q / 2.0) / std::tgamma(q / 2.0 + 1.0);
    rep.delta_fraction = gamma * gamma * vq * std::pow(gamma, q);

    Rng rng(seed);
    std::vector<double> per_seed;
    int buffer = n_steps / 4 + 2000;
    for (int s = 0; s < n_seeds; ++s) {
        Rng sub = rng.substream("central", static_cast<uint64_t>(s));
        // seed inside the supporting tube, uniform
        Vec z = chart.base;
        auto ball = sub.unit_ball(2);
        z[0] += gamma * ball[0];
        z[1] += gamma * ball[1];
        for (int i = 0; i < X.A.d; ++i) z[2 + i] = sub.uniform();
        z[chart.m - 1] = chart.base[chart.m - 1] + gamma * sub.uniform(-1.0, 1.0);

        // forward pass: record the 2x2 cocycle in the moving frame
        int total = n_steps + buffer;
        std::vector<double> ulog(total);   // log expansion of the u-entry
        std::vector<TwistBlocks> tw(total);
        std::vector<char> twisted(total, 0);
        TubeStepper stepper(X, engine.t());
        for (int n = 0; n < total; ++n) {
            int k = stepper.step(z);
            ulog[n] = std::fabs(static_cast<double>(k)) * engine.log_eta_unit();
            if (chart.in_delta(z)) {
                auto cc = chart.to_cylindrical(z);
                tw[n] = twist_blocks(engine.spec().with_sigma(sigma), cc->rho, cc->theta,
                                     norm2(cc->zeta));
                twisted[n] = 1;
                z = engine.twist(z, sigma);
            }
        }
        // backward pass: pull (0,1) back to settle E^c, accumulate the growth
        double vu = 0.0, vc = 1.0;
        double acc = 0.0;
        for (int n = total - 1; n >= 0; --n) {
            double pu = vu, pc = vc;
            if (twisted[n]) { // inverse twist block (det = 1)
                const TwistBlocks& b = tw[n];
                double nu = b.d * pu - b.b * pc;
                double nc = -b.c * pu + b.a * pc;
                pu = nu;
                pc = nc;
            }
            pu *= std::exp(-ulog[n]); // inverse of diag(eta^k, 1)
            double before = std::hypot(pu, pc);
            if (!(before > 0) || !std::isfinite(before)) {
                rep.bundle_flagged = true;
                break;
            }
            if (n < n_steps) acc += std::log(std::hypot(vu, vc) / before);
            vu = pu / before;
            vc = pc / before;
        }
        per_seed.push_back(acc / n_steps);
    }
    rep.tube_average = ci95(per_seed);
    rep.integral = {rep.tube_average.estimate * rep.tube_fraction,
                    rep.tube_average.lo * rep.tube_fraction,
                    rep.tube_average.hi * rep.tube_fraction,
                    rep.tube_average.stderr_mean * rep.tube_fraction};

    // equivalence route with common random numbers
    auto samples = sample_delta_stratified(chart, 4000, seed ^ 0xabcdef);
    std::vector<double> diffs;
    std::vector<int> st;
    for (size_t i = 0; i < samples.points.size(); ++i) {
        auto a = engine.log_eta_sigma(samples.points[i], 0.0);
        auto b = engine.log_eta_sigma(samples.points[i], sigma);
        if (a.censored || b.censored) continue;
        diffs.push_back(a.log_eta - b.log_eta);
        st.push_back(samples.stratum[i]);
    }
    auto ci = stratified_ci(diffs, st, samples.n_strata);
    rep.equivalence = {ci.estimate * rep.delta_fraction, ci.lo * rep.delta_fraction,
                       ci.hi * rep.delta_fraction, ci.stderr_mean * rep.delta_fraction};
    return rep;
}

} // namespace dynlab
