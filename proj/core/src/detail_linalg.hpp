#ifndef RBDSDE_DETAIL_LINALG_HPP
#define RBDSDE_DETAIL_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace rbdsde::detail {

// Dense lower-Cholesky of a symmetric positive definite n x n matrix
// (row-major). Returns false when a pivot falls below rel_tol times the
// largest diagonal entry, so exactly singular input is rejected even when
// rounding leaves a pivot a hair above zero.
inline bool cholesky(const std::vector<double>& a, int n, std::vector<double>& l,
                     double rel_tol = 1e-10) {
    double max_diag = 0.0;
    for (int i = 0; i < n; ++i)
        max_diag = std::max(max_diag, a[static_cast<std::size_t>(i) * n + i]);
    const double floor = rel_tol * max_diag;
    l.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a[static_cast<std::size_t>(i) * n + j];
            for (int k = 0; k < j; ++k)
                s -= l[static_cast<std::size_t>(i) * n + k] * l[static_cast<std::size_t>(j) * n + k];
            if (i == j) {
                if (!(s > floor))
                    return false;
                l[static_cast<std::size_t>(i) * n + i] = std::sqrt(s);
            } else {
                l[static_cast<std::size_t>(i) * n + j] = s / l[static_cast<std::size_t>(j) * n + j];
            }
        }
    }
    return true;
}

// Solve L L^T x = b in place using a precomputed lower factor.
inline void cholesky_solve(const std::vector<double>& l, int n, std::vector<double>& x) {
    for (int i = 0; i < n; ++i) {
        double s = x[i];
        for (int k = 0; k < i; ++k)
            s -= l[static_cast<std::size_t>(i) * n + k] * x[k];
        x[i] = s / l[static_cast<std::size_t>(i) * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = x[i];
        for (int k = i + 1; k < n; ++k)
            s -= l[static_cast<std::size_t>(k) * n + i] * x[k];
        x[i] = s / l[static_cast<std::size_t>(i) * n + i];
    }
}

// Least-squares slope of y against x.
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    return sxy / sxx;
}

} // namespace rbdsde::detail

#endif
