#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace distint::detail {

/// Least squares via normal equations with full pivoting; fine for the tiny
/// (<= 8 column) fits used by the limit engines.
inline std::vector<double> least_squares(const std::vector<std::vector<double>>& rows,
                                         const std::vector<double>& rhs) {
    const size_t m = rows.size();
    if (m == 0) throw std::invalid_argument("least_squares: no rows");
    const size_t n = rows[0].size();
    std::vector<std::vector<double>> A(n, std::vector<double>(n, 0.0));
    std::vector<double> b(n, 0.0);
    for (size_t r = 0; r < m; ++r) {
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = 0; j < n; ++j) A[i][j] += rows[r][i] * rows[r][j];
            b[i] += rows[r][i] * rhs[r];
        }
    }
    for (size_t col = 0; col < n; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < n; ++r)
            if (std::fabs(A[r][col]) > std::fabs(A[piv][col])) piv = r;
        std::swap(A[col], A[piv]);
        std::swap(b[col], b[piv]);
        if (A[col][col] == 0.0) throw std::runtime_error("least_squares: singular fit");
        for (size_t r = col + 1; r < n; ++r) {
            const double k = A[r][col] / A[col][col];
            for (size_t c = col; c < n; ++c) A[r][c] -= k * A[col][c];
            b[r] -= k * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (size_t r = n; r-- > 0;) {
        double s = b[r];
        for (size_t c = r + 1; c < n; ++c) s -= A[r][c] * x[c];
        x[r] = s / A[r][r];
    }
    return x;
}

}  // namespace distint::detail
