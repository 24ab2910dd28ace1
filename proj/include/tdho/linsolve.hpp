#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace tdho::detail {

// Solve a*x = b by Gaussian elimination with partial pivoting, in place.
// Returns false when a pivot falls below tol relative to the largest entry
// of the original matrix (singular within tolerance).
template <std::size_t N>
bool solve_dense(std::array<std::array<double, N>, N>& a, std::array<double, N>& b,
                 double tol = 1e-13) {
    double scale = 0.0;
    for (const auto& row : a)
        for (double v : row) scale = std::max(scale, std::fabs(v));
    if (scale == 0.0) return false;

    for (std::size_t col = 0; col < N; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < N; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        if (std::fabs(a[piv][col]) <= tol * scale) return false;
        if (piv != col) {
            std::swap(a[piv], a[col]);
            std::swap(b[piv], b[col]);
        }
        for (std::size_t r = col + 1; r < N; ++r) {
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < N; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t i = N; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < N; ++c) s -= a[i][c] * b[c];
        b[i] = s / a[i][i];
    }
    return true;
}

} // namespace tdho::detail
