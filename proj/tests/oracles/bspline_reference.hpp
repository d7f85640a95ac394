#pragma once

// Textbook Cox-de Boor recursion, written independently of the library's
// triangular evaluation scheme. Test-only oracle.

#include <vector>

namespace oracle {

inline double bspline_recursive(const std::vector<double>& t, int i, int k, double x,
                                double right_end) {
    if (k == 0) {
        const bool last = t[static_cast<std::size_t>(i + 1)] >= right_end;
        if (last) return (x >= t[static_cast<std::size_t>(i)] && x <= t[static_cast<std::size_t>(i + 1)]) ? 1.0 : 0.0;
        return (x >= t[static_cast<std::size_t>(i)] && x < t[static_cast<std::size_t>(i + 1)]) ? 1.0 : 0.0;
    }
    double left = 0.0, right = 0.0;
    const double d1 = t[static_cast<std::size_t>(i + k)] - t[static_cast<std::size_t>(i)];
    if (d1 > 0) {
        left = (x - t[static_cast<std::size_t>(i)]) / d1 * bspline_recursive(t, i, k - 1, x, right_end);
    }
    const double d2 = t[static_cast<std::size_t>(i + k + 1)] - t[static_cast<std::size_t>(i + 1)];
    if (d2 > 0) {
        right = (t[static_cast<std::size_t>(i + k + 1)] - x) / d2 *
                bspline_recursive(t, i + 1, k - 1, x, right_end);
    }
    return left + right;
}

} // namespace oracle
