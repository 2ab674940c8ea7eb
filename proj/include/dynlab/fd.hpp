#pragma once

#include <cassert>
#include <cmath>
#include <functional>
#include <vector>

#include "dynlab/linalg.hpp"

// Central finite differences for mixed partials up to total order 4,
// with one Richardson refinement (h and h/2) so the truncation error is O(h^4).

namespace dynlab {

using ScalarField = std::function<double(const Vec&)>;

namespace fd_detail {

// n-th order central difference in coordinate `axis` of a callable g(x)
template <typename F>
double central_1d(const F& g, const Vec& x, int axis, int order, double h) {
    Vec p = x;
    auto at = [&](double off) {
        p[axis] = x[axis] + off;
        return g(p);
    };
    switch (order) {
        case 0: return g(x);
        case 1: return (at(h) - at(-h)) / (2 * h);
        case 2: return (at(h) - 2 * at(0) + at(-h)) / (h * h);
        case 3: return (at(2 * h) - 2 * at(h) + 2 * at(-h) - at(-2 * h)) / (2 * h * h * h);
        case 4: return (at(2 * h) - 4 * at(h) + 6 * at(0) - 4 * at(-h) + at(-2 * h)) / (h * h * h * h);
        default: assert(false && "fd order > 4 unsupported"); return 0;
    }
}

inline double mixed_rec(const ScalarField& f, const Vec& x, const std::vector<int>& mi,
                        size_t from, double h) {
    while (from < mi.size() && mi[from] == 0) ++from;
    if (from == mi.size()) return f(x);
    auto inner = [&](const Vec& p) { return mixed_rec(f, p, mi, from + 1, h); };
    return central_1d(inner, x, static_cast<int>(from), mi[from], h);
}

} // namespace fd_detail

// Mixed partial d^{|mi|} f / dx^{mi} at x, step h, Richardson-refined.
inline double fd_partial(const ScalarField& f, const Vec& x, const std::vector<int>& mi, double h) {
    double d_h = fd_detail::mixed_rec(f, x, mi, 0, h);
    double d_h2 = fd_detail::mixed_rec(f, x, mi, 0, h / 2);
    return (4.0 * d_h2 - d_h) / 3.0;
}

// All multi-indices (i_1,...,i_m) with i_1+...+i_m = n.
inline std::vector<std::vector<int>> multi_indices(int m, int n) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(m, 0);
    std::function<void(int, int)> rec = [&](int pos, int remaining) {
        if (pos == m - 1) {
            cur[pos] = remaining;
            out.push_back(cur);
            return;
        }
        for (int k = remaining; k >= 0; --k) {
            cur[pos] = k;
            rec(pos + 1, remaining - k);
        }
    };
    if (m > 0) rec(0, n);
    return out;
}

} // namespace dynlab
