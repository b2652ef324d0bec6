#pragma once

// Independent reference computations used only by the tests.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

/// Regularized lower incomplete gamma P(a, x) by its power series.
inline double gamma_p_series(double a, double x) {
    if (x <= 0.0) return 0.0;
    double term = 1.0 / a;
    double sum = term;
    for (int k = 1; k < 100000; ++k) {
        term *= x / (a + k);
        sum += term;
        if (term < sum * 1e-17) break;
    }
    return std::exp(a * std::log(x) - x - std::lgamma(a)) * sum;
}

inline double chi_square_cdf(double x, double dof) { return gamma_p_series(0.5 * dof, 0.5 * x); }

/// Poisson mixture of central chi-square laws.
inline double noncentral_chi_square_cdf(double x, double dof, double nc) {
    const double half = 0.5 * nc;
    double total = 0.0;
    for (int k = 0; k < 2000; ++k) {
        const double w = std::exp(-half + k * std::log(half > 0 ? half : 1.0) - std::lgamma(k + 1.0));
        const double weight = (half > 0 || k == 0) ? w : 0.0;
        total += weight * chi_square_cdf(x, dof + 2.0 * k);
        if (k > half && weight < 1e-18) break;
    }
    return total;
}

/// Composite Simpson rule on [a, b] with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace oracle
