#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

namespace modescope {

/// Ordinary least-squares line y = slope*x + intercept, with standard errors
/// from the residual variance and the coefficient of determination.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_std_error = 0.0;
    double intercept_std_error = 0.0;
    double r_squared = 1.0;
    std::size_t n = 0;
};

inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("linear_fit: size mismatch");
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("linear_fit: need at least 2 points");

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("linear_fit: x values are all equal");

    LinearFit fit;
    fit.n = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;

    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (fit.slope * x[i] + fit.intercept);
        ssr += r * r;
    }
    fit.r_squared = (syy > 0.0) ? 1.0 - ssr / syy : (ssr > 0.0 ? 0.0 : 1.0);

    if (n > 2) {
        const double s2 = ssr / static_cast<double>(n - 2);
        fit.slope_std_error = std::sqrt(s2 / sxx);
        fit.intercept_std_error =
            std::sqrt(s2 * (1.0 / static_cast<double>(n) + mx * mx / sxx));
    }
    return fit;
}

}  // namespace modescope
