#pragma once

// Gauss-Hermite rules for standard Gaussian expectations and a clamped cubic
// spline on a uniform grid with affine extrapolation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace spinhj {

/// Nodes z_i and weights w_i with E f(Z) ~= sum_i w_i f(z_i) for Z ~ N(0, 1).
struct GaussianRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const noexcept { return nodes.size(); }

    template <typename Fn>
    double expect(Fn&& f) const {
        double sum = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) sum += weights[i] * f(nodes[i]);
        return sum;
    }
};

/// Physicists' Hermite roots by Newton iteration on the orthonormal
/// recurrence, then rescaled to the standard normal weight.
inline GaussianRule gauss_hermite(int n) {
    if (n < 1 || n > 200) throw std::invalid_argument("gauss_hermite: node count out of range");
    const double pim4 = std::pow(std::numbers::pi, -0.25);
    std::vector<double> x(n), w(n);
    const int m = (n + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < m; ++i) {
        if (i == 0) {
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
        } else if (i == 1) {
            z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        } else if (i == 2) {
            z = 1.86 * z - 0.86 * x[0];
        } else if (i == 3) {
            z = 1.91 * z - 0.91 * x[1];
        } else {
            z = 2.0 * z - x[i - 2];
        }
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = pim4, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    GaussianRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = std::numbers::sqrt2 * x[i];
        rule.weights[i] = w[i] / std::sqrt(std::numbers::pi);
    }
    return rule;
}

/// Cubic spline through (x0 + i h, y_i) with prescribed end slopes; affine
/// continuation outside the grid with those same slopes, so the
/// interpolant is C^1 on all of R.
class ClampedSpline {
public:
    ClampedSpline(double x0, double h, std::vector<double> y, double slope_lo, double slope_hi)
        : x0_(x0), h_(h), y_(std::move(y)), slope_lo_(slope_lo), slope_hi_(slope_hi) {
        const std::size_t n = y_.size();
        if (n < 2) throw std::invalid_argument("spline needs at least two points");
        // Second derivatives m_i from the clamped tridiagonal system.
        m_.assign(n, 0.0);
        std::vector<double> c(n, 0.0), d(n, 0.0);
        const double inv_h = 1.0 / h_;
        auto rhs = [&](std::size_t i) {
            if (i == 0) return 6.0 * inv_h * ((y_[1] - y_[0]) * inv_h - slope_lo_);
            if (i == n - 1) return 6.0 * inv_h * (slope_hi_ - (y_[n - 1] - y_[n - 2]) * inv_h);
            return 6.0 * inv_h * inv_h * (y_[i + 1] - 2.0 * y_[i] + y_[i - 1]);
        };
        // Thomas algorithm; rows: 2 m_0 + m_1, m_{i-1} + 4 m_i + m_{i+1}, m_{n-2} + 2 m_{n-1}.
        double diag = 2.0;
        c[0] = 1.0 / diag;
        d[0] = rhs(0) / diag;
        for (std::size_t i = 1; i < n; ++i) {
            const double b = (i == n - 1) ? 2.0 : 4.0;
            const double upper = (i == n - 1) ? 0.0 : 1.0;
            const double denom = b - c[i - 1];
            c[i] = upper / denom;
            d[i] = (rhs(i) - d[i - 1]) / denom;
        }
        m_[n - 1] = d[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) m_[i] = d[i] - c[i] * m_[i + 1];
    }

    double operator()(double x) const noexcept {
        const double u = (x - x0_) / h_;
        const std::size_t n = y_.size();
        if (u <= 0.0) return y_[0] + slope_lo_ * (x - x0_);
        if (u >= static_cast<double>(n - 1)) return y_[n - 1] + slope_hi_ * (x - x_hi());
        auto i = static_cast<std::size_t>(u);
        if (i >= n - 1) i = n - 2;
        const double b = u - static_cast<double>(i);
        const double a = 1.0 - b;
        const double h2 = h_ * h_ / 6.0;
        return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h2;
    }

    double x_hi() const noexcept { return x0_ + h_ * static_cast<double>(y_.size() - 1); }

private:
    double x0_, h_;
    std::vector<double> y_;
    double slope_lo_, slope_hi_;
    std::vector<double> m_;
};

}  // namespace spinhj
