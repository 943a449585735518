#pragma once

// Mixed p-spin structure function and the scalar functions derived from it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "spinhj/error.hpp"

namespace spinhj {

/// The covariance polynomial xi(r) = sum_p beta_p^2 r^p with finitely many
/// strictly positive coefficients. Zero coefficients are dropped on
/// construction.
class MixedPSpinModel {
public:
    explicit MixedPSpinModel(const std::map<int, double>& coeffs) {
        for (const auto& [p, c] : coeffs) {
            if (p < 1) {
                throw ValidationError("degree must be a positive integer, got " + std::to_string(p),
                                      "/coeffs/" + std::to_string(p));
            }
            if (!(c >= 0.0) || !std::isfinite(c)) {
                throw ValidationError("coefficient for degree " + std::to_string(p) +
                                          " must be finite and nonnegative",
                                      "/coeffs/" + std::to_string(p));
            }
            if (c > 0.0) coeffs_.emplace_back(p, c);
        }
        if (coeffs_.empty()) {
            throw ValidationError("model needs at least one positive coefficient", "/coeffs");
        }
    }

    /// Pure p-spin with xi(r) = beta2 * r^p.
    static MixedPSpinModel pure(int p, double beta2 = 1.0) { return MixedPSpinModel({{p, beta2}}); }

    /// Sherrington-Kirkpatrick, xi(r) = r^2.
    static MixedPSpinModel sk() { return pure(2, 1.0); }

    /// (degree, beta_p^2) pairs in increasing degree.
    const std::vector<std::pair<int, double>>& coeffs() const noexcept { return coeffs_; }

    int max_degree() const noexcept { return coeffs_.back().first; }

    /// Coefficient of r^1, i.e. xi'(0).
    double linear_coeff() const noexcept {
        return coeffs_.front().first == 1 ? coeffs_.front().second : 0.0;
    }

    double xi(double r) const noexcept {
        double sum = 0.0;
        for (const auto& [p, c] : coeffs_) sum += c * std::pow(r, p);
        return sum;
    }

    double xi_prime(double r) const noexcept {
        double sum = 0.0;
        for (const auto& [p, c] : coeffs_) sum += c * p * std::pow(r, p - 1);
        return sum;
    }

    double xi_second(double r) const noexcept {
        double sum = 0.0;
        for (const auto& [p, c] : coeffs_) {
            if (p >= 2) sum += c * p * (p - 1) * std::pow(r, p - 2);
        }
        return sum;
    }

    /// theta(r) = r xi'(r) - xi(r).
    double theta(double r) const noexcept { return r * xi_prime(r) - xi(r); }

    /// Maximizer r >= 0 of r s - xi(r). On [0, inf) xi' is nondecreasing, so
    /// the stationarity condition xi'(r) = s is solved by bisection once a
    /// bracket is found by doubling.
    double xi_star_argmax(double s) const noexcept {
        if (s <= xi_prime(0.0)) return 0.0;
        double hi = 1.0;
        // Pure p=1 models have constant xi'; the doubling stops at 2^60 and
        // the sup is reported on that bounded interval.
        int doublings = 0;
        while (xi_prime(hi) < s && doublings < 60) {
            hi *= 2.0;
            ++doublings;
        }
        if (xi_prime(hi) < s) return hi;
        double lo = 0.0;
        while (hi - lo > 1e-12 * std::max(1.0, hi)) {
            const double mid = 0.5 * (lo + hi);
            if (xi_prime(mid) < s) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return 0.5 * (lo + hi);
    }

    /// xi*(s) = sup_{r >= 0} { r s - xi(r) }.
    double xi_star(double s) const noexcept {
        const double r = xi_star_argmax(s);
        if (r == 0.0) return 0.0;
        // r = 0 is always admissible, so rounding below zero is clipped.
        return std::max(0.0, r * s - xi(r));
    }

    /// Convex, nondecreasing, Lipschitz continuation of xi off [0, 1]:
    /// zero below 0, tangent line above 1.
    double xi_bar(double r) const noexcept {
        if (r <= 0.0) return 0.0;
        if (r <= 1.0) return xi(r);
        return xi(1.0) + xi_prime(1.0) * (r - 1.0);
    }

    /// A subgradient of xi_bar at r; at the kinks 0 and 1 the left value.
    double xi_bar_slope(double r) const noexcept {
        if (r <= 0.0) return 0.0;
        if (r >= 1.0) return xi_prime(1.0);
        return xi_prime(r);
    }

    /// Global Lipschitz constant of xi_bar.
    double xi_bar_lipschitz() const noexcept { return xi_prime(1.0); }

private:
    std::vector<std::pair<int, double>> coeffs_;
};

}  // namespace spinhj
