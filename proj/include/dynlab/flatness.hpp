#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynlab/fd.hpp"
#include "dynlab/linalg.hpp"
#include "dynlab/rng.hpp"

// Admissible sequences, numerical flatness verification, and the library of
// smooth bumps used throughout: the two-sided exponential bridge, the annular
// profile psi, the plateau profile psi1, and the disk reparametrization alpha.

namespace dynlab {

// ---------------------------------------------------------------------------
// smooth bridge: S(u) = Q(u) / (Q(u) + Q(1-u)),  Q(v) = exp(-eps/v)
// S == 0 for u <= 0, S == 1 for u >= 1, C-infinity, flat at both ends.
// Smaller eps makes the rise from 0 faster.
// ---------------------------------------------------------------------------
struct SmoothBridge {
    double eps = 1.0;

    double value(double u) const {
        if (u <= 0.0) return 0.0;
        if (u >= 1.0) return 1.0;
        double a = q(u), b = q(1.0 - u);
        return a / (a + b);
    }

    double deriv(double u) const {
        if (u <= 0.0 || u >= 1.0) return 0.0;
        double a = q(u), b = q(1.0 - u);
        double ap = a * eps / (u * u);
        double bp = -b * eps / ((1.0 - u) * (1.0 - u));
        double s = a + b;
        return (ap * b - a * bp) / (s * s);
    }

    double deriv2(double u) const {
        if (u <= 0.0 || u >= 1.0) return 0.0;
        double a = q(u), b = q(1.0 - u);
        double u2 = u * u, v = 1.0 - u, v2 = v * v;
        double ap = a * eps / u2;
        double bp = -b * eps / v2;
        double app = a * (eps * eps / (u2 * u2) - 2.0 * eps / (u2 * u));
        double bpp = b * (eps * eps / (v2 * v2) - 2.0 * eps / (v2 * v));
        double s = a + b;
        return (app * b - a * bpp) / (s * s) - 2.0 * (ap * b - a * bp) * (ap + bp) / (s * s * s);
    }

    // log S(u), stable where the direct value underflows
    double log_value(double u) const {
        if (u <= 0.0) return -std::numeric_limits<double>::infinity();
        if (u >= 1.0) return 0.0;
        double la = -eps / u, lb = -eps / (1.0 - u);
        double m = std::max(la, lb);
        return la - (m + std::log(std::exp(la - m) + std::exp(lb - m)));
    }

    // d/du log S(u) = eps (1/u^2 + 1/(1-u)^2) (1 - S(u))
    double dlog(double u) const {
        if (u <= 0.0 || u >= 1.0) return 0.0;
        double one_minus_s = std::exp(log_value(1.0 - u)); // 1 - S(u) = S(1-u)
        return eps * (1.0 / (u * u) + 1.0 / ((1.0 - u) * (1.0 - u))) * one_minus_s;
    }

  private:
    static double safe_exp(double e) { return e < -700.0 ? 0.0 : std::exp(e); }
    double q(double v) const { return safe_exp(-eps / v); }
};

// ---------------------------------------------------------------------------
// admissible sequences
// ---------------------------------------------------------------------------
enum class Domain { Cube, Disk };

// distance to the boundary: 1 - ||x||_inf on the cube, 1 - ||x||_2 on the disk
inline double boundary_dist(Domain d, const Vec& x) {
    if (d == Domain::Cube) return 1.0 - norm_inf(x);
    return 1.0 - norm2(x);
}

// Sequence rho = (rho_0, rho_1, ...) of positive-interior, boundary-vanishing
// functions. The geometric family is rho_n(x) = c * 2^{-n p} * dist(x, boundary),
// and scale_by(k) applies the extra factor 2^{-k n}.
struct AdmissibleSequence {
    Domain domain = Domain::Cube;
    int dim = 0;
    double c = 1.0;
    int p = 1;
    int k_scale = 0;
    std::function<double(int, const Vec&)> custom; // overrides the geometric family

    double operator()(int n, const Vec& x) const {
        double base = custom ? custom(n, x)
                             : c * std::pow(2.0, -static_cast<double>(n) * p) * boundary_dist(domain, x);
        return base * std::pow(2.0, -static_cast<double>(k_scale) * n);
    }

    AdmissibleSequence scale_by(int k) const {
        AdmissibleSequence s = *this;
        s.k_scale += k;
        return s;
    }
};

inline AdmissibleSequence make_admissible_geometric(double c, int p, Domain domain, int dim) {
    if (c <= 0.0) throw std::invalid_argument("admissible: c must be positive");
    if (p < 1) throw std::invalid_argument("admissible: p must be >= 1");
    AdmissibleSequence s;
    s.domain = domain;
    s.dim = dim;
    s.c = c;
    s.p = p;
    return s;
}

// ---------------------------------------------------------------------------
// numerical flatness verification
// ---------------------------------------------------------------------------
struct FlatnessGrid {
    int samples_per_shell = 300;
    uint64_t seed = 20240501;
    double eval_noise = 1e-15; // per-evaluation absolute noise of the field
};

struct FlatnessOrderReport {
    int order = 0;
    double worst_ratio = 0;   // max |d^n phi| / rho_n over the shell
    double worst_excess = 0;  // max (|d^n phi| - rho_n)
    Vec worst_point;
};

struct FlatnessReport {
    int order_checked = 0;
    bool pass = false;
    std::vector<FlatnessOrderReport> orders;
};

inline constexpr double kFlatnessTolFd = 1e-4; // relative slack on the ratio

namespace flat_detail {

// deterministic samples of the shell ||x||_inf >= 1 - 2^-n (cube) or
// ||x||_2 >= 1 - 2^-n (disk); a fraction of them lies exactly on the boundary
inline std::vector<Vec> shell_samples(Domain dom, int dim, int n, const FlatnessGrid& grid) {
    if (grid.samples_per_shell < 16)
        throw std::invalid_argument("flatness grid too coarse: shell unsampled");
    Rng rng(grid.seed + 7919 * static_cast<uint64_t>(n));
    std::vector<Vec> pts;
    pts.reserve(grid.samples_per_shell);
    double depth = std::pow(2.0, -n);
    for (int i = 0; i < grid.samples_per_shell; ++i) {
        double u = (i % 8 == 0) ? 0.0 : rng.uniform(); // u = 0: exactly on the boundary
        if (dom == Domain::Cube) {
            Vec x(dim);
            for (int j = 0; j < dim; ++j) x[j] = rng.uniform(-1.0, 1.0);
            int face = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(dim));
            double sign = (rng.next_u64() & 1) ? 1.0 : -1.0;
            x[face] = sign * (1.0 - u * depth);
            pts.push_back(x);
        } else {
            double r = 1.0 - u * depth;
            double th = rng.uniform(0.0, 2.0 * M_PI);
            pts.push_back({r * std::cos(th), r * std::sin(th)});
        }
    }
    return pts;
}

} // namespace flat_detail

// Checks |d^n phi| <= rho_n on the shells ||x||_inf >= 1 - 2^-n for n <= n_max.
// Derivatives are central finite differences with Richardson refinement,
// step h_n = 2^-n * 1e-3; pass means every ratio stays below 1 + tol.
inline FlatnessReport is_rho_flat(const ScalarField& phi, const AdmissibleSequence& rho,
                                  int n_max, const FlatnessGrid& grid = {}) {
    if (n_max > 4) throw std::invalid_argument("is_rho_flat: n_max <= 4 (finite-difference depth)");
    FlatnessReport rep;
    rep.order_checked = n_max;
    rep.pass = true;
    for (int n = 0; n <= n_max; ++n) {
        FlatnessOrderReport ord;
        ord.order = n;
        double h = std::pow(2.0, -n) * 1e-3;
        auto pts = flat_detail::shell_samples(rho.domain, rho.dim, n, grid);
        auto mis = multi_indices(rho.dim, n);
        bool violated = false;
        // absolute floor: ulp-level evaluation noise amplified by the stencil,
        // so roundoff of flat-zero derivatives at rho = 0 boundary points
        // cannot fail the check while genuine order-0 violations still do
        double noise_floor = 1e-12 + grid.eval_noise * std::pow(2.0 / h, n);
        for (const auto& x : pts) {
            double bound = rho(n, x);
            for (const auto& mi : mis) {
                double d = (n == 0) ? phi(x) : fd_partial(phi, x, mi, h);
                double mag = std::fabs(d);
                // the stencil reads the field up to 2h away, so the verdict
                // compares against the weight's sup over that reach
                double bound_sup = bound;
                for (int l = 0; l < rho.dim; ++l) {
                    if (mi[l] == 0) continue;
                    for (double off : {-2.0 * h, 2.0 * h}) {
                        Vec y = x;
                        y[l] += off;
                        bound_sup = std::max(bound_sup, rho(n, y));
                    }
                }
                if (mag > bound_sup * (1.0 + kFlatnessTolFd) + noise_floor) violated = true;
                // ratios are reported away from the exact boundary, where rho
                // vanishes together with every flat derivative
                if (bound > 1e-9) {
                    double ratio = mag / bound;
                    if (ratio > ord.worst_ratio) {
                        ord.worst_ratio = ratio;
                        ord.worst_point = x;
                    }
                }
                ord.worst_excess = std::max(ord.worst_excess, mag - bound);
            }
        }
        if (violated) rep.pass = false;
        rep.orders.push_back(std::move(ord));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// bump profiles
// ---------------------------------------------------------------------------

// psi(w) = amp * exp(400/81 - gamma^2 / ((|w| - 0.1 gamma)(gamma - |w|))) on its
// support 0.1 gamma < |w| < gamma, 0 elsewhere. The 400/81 shift normalizes the
// peak (at |w| = 0.55 gamma) to amp.
struct PsiProfile {
    double gamma = 0.05;
    double amp = 1.0;

    double value(double w) const {
        double u = std::fabs(w);
        double a = 0.1 * gamma, b = gamma;
        if (u <= a || u >= b) return 0.0;
        double g = (u - a) * (b - u);
        double e = kPeakShift - gamma * gamma / g;
        return e < -700.0 ? 0.0 : amp * std::exp(e);
    }

    // d psi / dw for w >= 0 (psi is even; only the radial argument is used)
    double deriv(double w) const {
        double u = std::fabs(w);
        double a = 0.1 * gamma, b = gamma;
        if (u <= a || u >= b) return 0.0;
        double g = (u - a) * (b - u);
        double gp = (a + b) - 2.0 * u;
        double v = value(u);
        double d = v * gamma * gamma * gp / (g * g);
        return w >= 0 ? d : -d;
    }

    static constexpr double kPeakShift = 400.0 / 81.0; // gamma^2 / max g
};

// psi1(w): 1 on |w| <= 0.5 gamma, 0 outside |w| < gamma, smooth plateau bump
struct Psi1Profile {
    double gamma = 0.05;
    SmoothBridge bridge{1.0};

    double value(double w) const { return bridge.value((gamma - std::fabs(w)) / (0.5 * gamma)); }

    double deriv(double w) const {
        double s = bridge.deriv((gamma - std::fabs(w)) / (0.5 * gamma)) / (-0.5 * gamma);
        return w >= 0 ? s : -s;
    }
};

struct BumpSpec {
    double gamma = 0.05;
    double psi_amp = 1.0;
    double psi1_eps = 1.0;

    PsiProfile psi() const { return {gamma, psi_amp}; }
    Psi1Profile psi1() const { return {gamma, SmoothBridge{psi1_eps}}; }
};

inline PsiProfile bump_psi(double gamma, double amp = 1.0) {
    if (!(gamma > 0.0 && gamma < 0.1)) throw std::invalid_argument("bump_psi: gamma in (0, 0.1)");
    return {gamma, amp};
}

inline Psi1Profile bump_psi1(double gamma, double eps = 1.0) {
    if (!(gamma > 0.0 && gamma < 0.1)) throw std::invalid_argument("bump_psi1: gamma in (0, 0.1)");
    return {gamma, SmoothBridge{eps}};
}

// alpha: 1 on ||x|| <= U_inner, positive inside the open disk, flat-to-all-orders
// zero at the boundary. The tau-speed of the suspension field.
struct AlphaBump {
    double u_inner = 0.25;
    SmoothBridge bridge{4.0};

    double value_r(double r) const {
        if (r <= u_inner) return 1.0;
        return bridge.value((1.0 - r) / (1.0 - u_inner));
    }

    double deriv_r(double r) const {
        if (r <= u_inner) return 0.0;
        return bridge.deriv((1.0 - r) / (1.0 - u_inner)) / (-(1.0 - u_inner));
    }

    double operator()(const Vec& x) const { return value_r(norm2(x)); }

    // log alpha, stable deep in the collar where the direct value underflows
    double log_value_r(double r) const {
        if (r <= u_inner) return 0.0;
        return bridge.log_value((1.0 - r) / (1.0 - u_inner));
    }

    // gradient as a disk field
    Vec grad(const Vec& x) const {
        double r = norm2(x);
        if (r <= u_inner || r < 1e-14) return {0.0, 0.0};
        double dr = deriv_r(r);
        return {dr * x[0] / r, dr * x[1] / r};
    }
};

inline AlphaBump bump_alpha(double u_inner, double eps = 4.0) {
    if (!(u_inner > 0.0 && u_inner < 1.0))
        throw std::invalid_argument("bump_alpha: U_inner in (0,1)");
    return {u_inner, SmoothBridge{eps}};
}

} // namespace dynlab
