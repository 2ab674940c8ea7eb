#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

// Small dense linear algebra for state dimensions m <= 9.
// Everything is plain std::vector<double>; no external dependencies.

namespace dynlab {

using Vec = std::vector<double>;

struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    static Mat identity(int n) {
        Mat I(n, n);
        for (int i = 0; i < n; ++i) I(i, i) = 1.0;
        return I;
    }
};

inline double dot(const Vec& x, const Vec& y) {
    assert(x.size() == y.size());
    double s = 0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

inline double norm_inf(const Vec& x) {
    double s = 0;
    for (double v : x) s = std::max(s, std::fabs(v));
    return s;
}

inline Vec operator+(Vec x, const Vec& y) {
    for (size_t i = 0; i < x.size(); ++i) x[i] += y[i];
    return x;
}

inline Vec operator-(Vec x, const Vec& y) {
    for (size_t i = 0; i < x.size(); ++i) x[i] -= y[i];
    return x;
}

inline Vec operator*(double c, Vec x) {
    for (double& v : x) v *= c;
    return x;
}

inline void axpy(double c, const Vec& x, Vec& y) {
    for (size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

inline Vec matvec(const Mat& A, const Vec& x) {
    assert(static_cast<int>(x.size()) == A.cols);
    Vec y(A.rows, 0.0);
    for (int i = 0; i < A.rows; ++i) {
        double s = 0;
        for (int j = 0; j < A.cols; ++j) s += A(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

inline Mat matmul(const Mat& A, const Mat& B) {
    assert(A.cols == B.rows);
    Mat C(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i)
        for (int k = 0; k < A.cols; ++k) {
            double aik = A(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < B.cols; ++j) C(i, j) += aik * B(k, j);
        }
    return C;
}

inline Mat transpose(const Mat& A) {
    Mat T(A.cols, A.rows);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < A.cols; ++j) T(j, i) = A(i, j);
    return T;
}

// det via LU with partial pivoting; fine at these sizes
inline double det(Mat A) {
    assert(A.rows == A.cols);
    int n = A.rows;
    double d = 1.0;
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int i = k + 1; i < n; ++i)
            if (std::fabs(A(i, k)) > std::fabs(A(piv, k))) piv = i;
        if (A(piv, k) == 0.0) return 0.0;
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(A(piv, j), A(k, j));
            d = -d;
        }
        d *= A(k, k);
        for (int i = k + 1; i < n; ++i) {
            double f = A(i, k) / A(k, k);
            for (int j = k; j < n; ++j) A(i, j) -= f * A(k, j);
        }
    }
    return d;
}

inline Vec solve(Mat A, Vec b) {
    assert(A.rows == A.cols && static_cast<int>(b.size()) == A.rows);
    int n = A.rows;
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int i = k + 1; i < n; ++i)
            if (std::fabs(A(i, k)) > std::fabs(A(piv, k))) piv = i;
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(A(piv, j), A(k, j));
            std::swap(b[piv], b[k]);
        }
        for (int i = k + 1; i < n; ++i) {
            double f = A(i, k) / A(k, k);
            b[i] -= f * b[k];
            for (int j = k; j < n; ++j) A(i, j) -= f * A(k, j);
        }
    }
    Vec x(n);
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n; ++j) s -= A(i, j) * x[j];
        x[i] = s / A(i, i);
    }
    return x;
}

// Modified Gram-Schmidt on the columns of Q (in place).
// Returns the log of each diagonal R entry; that is the Benettin ledger step.
inline std::vector<double> mgs_lognorms(Mat& Q) {
    std::vector<double> logs(Q.cols, 0.0);
    for (int j = 0; j < Q.cols; ++j) {
        for (int k = 0; k < j; ++k) {
            double s = 0;
            for (int i = 0; i < Q.rows; ++i) s += Q(i, k) * Q(i, j);
            for (int i = 0; i < Q.rows; ++i) Q(i, j) -= s * Q(i, k);
        }
        double nrm = 0;
        for (int i = 0; i < Q.rows; ++i) nrm += Q(i, j) * Q(i, j);
        nrm = std::sqrt(nrm);
        logs[j] = std::log(nrm);
        for (int i = 0; i < Q.rows; ++i) Q(i, j) /= nrm;
    }
    return logs;
}

} // namespace dynlab
