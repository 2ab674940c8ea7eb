#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dynlab/linalg.hpp"

// Hyperbolic toral automorphisms built from Brin's block-diagonal recipe:
// diag{A_1, ..., A_m'} on T^{m-3}, A_i = [[2,1],[1,1]], and the last block is
// [[2,1,1],[1,1,1],[0,1,2]] when m is even.

namespace dynlab {

inline double mod1(double v) {
    double r = v - std::floor(v);
    return r >= 1.0 ? r - 1.0 : r;
}

// wrap to [-0.5, 0.5)
inline double wrap_centered(double v) {
    double r = v - std::round(v);
    return r >= 0.5 ? r - 1.0 : (r < -0.5 ? r + 1.0 : r);
}

struct BlockEigen {
    int offset = 0;        // coordinate offset of the block inside T^d
    int size = 0;          // 2 or 3
    std::vector<double> eigenvalues;      // descending modulus
    std::vector<Vec> eigenvectors;        // unit, block-local coordinates
};

struct ToralAutomorphism {
    int d = 0;       // torus dimension m-3
    int m_prime = 0; // number of blocks
    Mat M;           // integer entries stored as doubles
    Mat Minv;
    std::vector<BlockEigen> blocks;

    Vec apply(const Vec& y) const {
        Vec z = matvec(M, y);
        for (double& v : z) v = mod1(v);
        return z;
    }

    Vec apply_inv(const Vec& y) const {
        Vec z = matvec(Minv, y);
        for (double& v : z) v = mod1(v);
        return z;
    }

    // derivative on fiber tangents, no wrap
    Vec push(const Vec& v) const { return matvec(M, v); }
    Vec push_inv(const Vec& v) const { return matvec(Minv, v); }

    const BlockEigen& last_block() const { return blocks.back(); }

    // expansion rate of A_m' along the chosen unstable line
    double eta() const { return last_block().eigenvalues[0]; }

    // unit unstable / stable directions of the last block, embedded in R^d
    Vec unstable_dir() const { return embed(last_block(), 0); }
    Vec stable_dir() const {
        const auto& b = last_block();
        return embed(b, static_cast<int>(b.eigenvalues.size()) - 1);
    }

    Vec embed(const BlockEigen& b, int which) const {
        Vec v(d, 0.0);
        for (int i = 0; i < b.size; ++i) v[b.offset + i] = b.eigenvectors[which][i];
        return v;
    }
};

namespace toral_detail {

inline BlockEigen eigen2x2(int offset) {
    // [[2,1],[1,1]]: eigenvalues (3 +- sqrt5)/2, orthogonal eigenvectors
    BlockEigen e;
    e.offset = offset;
    e.size = 2;
    double s5 = std::sqrt(5.0);
    double phi = (1.0 + s5) / 2.0;
    double lu = (3.0 + s5) / 2.0, ls = (3.0 - s5) / 2.0;
    double nu = std::sqrt(phi * phi + 1.0);
    e.eigenvalues = {lu, ls};
    e.eigenvectors = {{phi / nu, 1.0 / nu}, {1.0 / nu, -phi / nu}};
    return e;
}

inline double cubic_root_newton(double x0) {
    // p(x) = x^3 - 5x^2 + 6x - 1, the characteristic polynomial of the 3x3 block
    double x = x0;
    for (int it = 0; it < 60; ++it) {
        double f = ((x - 5.0) * x + 6.0) * x - 1.0;
        double fp = (3.0 * x - 10.0) * x + 6.0;
        double step = f / fp;
        x -= step;
        if (std::fabs(step) < 1e-15) break;
    }
    return x;
}

inline BlockEigen eigen3x3(int offset) {
    BlockEigen e;
    e.offset = offset;
    e.size = 3;
    double r1 = cubic_root_newton(3.2);
    double r2 = cubic_root_newton(1.5);
    double r3 = cubic_root_newton(0.2);
    e.eigenvalues = {r1, r2, r3};
    double B[3][3] = {{2, 1, 1}, {1, 1, 1}, {0, 1, 2}};
    for (double lam : e.eigenvalues) {
        // null space of (B - lam I) via the cross product of two rows
        double a[3] = {B[0][0] - lam, B[0][1], B[0][2]};
        double b[3] = {B[1][0], B[1][1] - lam, B[1][2]};
        Vec v = {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
        double n = norm2(v);
        if (n < 1e-12) throw std::runtime_error("degenerate 3x3 eigenvector");
        e.eigenvectors.push_back({v[0] / n, v[1] / n, v[2] / n});
    }
    return e;
}

} // namespace toral_detail

inline ToralAutomorphism make_brin_automorphism(int m) {
    if (m < 5) throw std::invalid_argument("Brin automorphism needs m >= 5");
    ToralAutomorphism A;
    A.d = m - 3;
    A.m_prime = (m - 3) / 2;
    A.M = Mat(A.d, A.d);
    bool even = (m % 2 == 0);
    int off = 0;
    for (int i = 1; i <= A.m_prime; ++i) {
        bool last = (i == A.m_prime);
        if (last && even) {
            double B[3][3] = {{2, 1, 1}, {1, 1, 1}, {0, 1, 2}};
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) A.M(off + r, off + c) = B[r][c];
            A.blocks.push_back(toral_detail::eigen3x3(off));
            off += 3;
        } else {
            A.M(off, off) = 2;
            A.M(off, off + 1) = 1;
            A.M(off + 1, off) = 1;
            A.M(off + 1, off + 1) = 1;
            A.blocks.push_back(toral_detail::eigen2x2(off));
            off += 2;
        }
    }
    if (off != A.d) throw std::logic_error("block layout mismatch");
    // integer inverse blocks: [[1,-1],[-1,2]] and the adjugate of the 3x3
    A.Minv = Mat(A.d, A.d);
    off = 0;
    for (const auto& b : A.blocks) {
        if (b.size == 2) {
            A.Minv(off, off) = 1;
            A.Minv(off, off + 1) = -1;
            A.Minv(off + 1, off) = -1;
            A.Minv(off + 1, off + 1) = 2;
        } else {
            // inverse of [[2,1,1],[1,1,1],[0,1,2]] (det 1)
            double I3[3][3] = {{1, -1, 0}, {-2, 4, -1}, {1, -2, 1}};
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) A.Minv(off + r, off + c) = I3[r][c];
        }
        off += b.size;
    }
    return A;
}

inline Vec toral_apply(const ToralAutomorphism& A, const Vec& y) { return A.apply(y); }
inline const Mat& toral_derivative(const ToralAutomorphism& A) { return A.M; }
inline double expansion_rate_eta(const ToralAutomorphism& A) { return A.eta(); }

} // namespace dynlab
