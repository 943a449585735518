#pragma once

// Finite-dimensional Hamilton-Jacobi machinery on the dyadic cone C^j:
// the nonlinearity H^j, weighted finite-difference gradients of psi^j,
// the classical subsolution residual, and a monotone explicit solver.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "spinhj/cascade.hpp"
#include "spinhj/cone.hpp"
#include "spinhj/error.hpp"
#include "spinhj/model.hpp"

namespace spinhj {

// ---------------------------------------------------------------------------
// H^j(a) = inf { sum_k 2^{-j} xi_bar(b_k) : b in C^j, b - a in (C^j)* }.
//
// The constraint b - a in (C^j)* says every tail sum of b dominates the
// matching tail sum of a. Among nondecreasing b with this property the
// isotonic regression of a is majorized (weakly, from the tail) by every
// feasible b, and xi_bar is convex and nondecreasing, so it is optimal.
// xi_bar vanishes on negatives, which takes care of the sign constraint.
// ---------------------------------------------------------------------------

inline std::vector<double> h_j_minimizer(const DyadicVector& a) { return isotonic_regression(a.entries); }

inline double h_j_value_at(const MixedPSpinModel& model, const DyadicVector& b) {
    double sum = 0.0;
    for (double x : b.entries) sum += model.xi_bar(x);
    return sum * b.weight();
}

inline double h_j(const MixedPSpinModel& model, const DyadicVector& a) {
    const auto b = h_j_minimizer(a);
    double sum = 0.0;
    for (double x : b) sum += model.xi_bar(x);
    return sum * a.weight();
}

struct SubgradientResult {
    double value = 0.0;
    std::vector<double> minimizer;
    int iterations = 0;
};

/// Euclidean projection onto {b in C^j : tail sums of b dominate those of
/// a}, by Dykstra's alternation between isotonic regression and the
/// halfspaces of the tail constraints. Projecting onto one halfspace adds
/// the deficit, spread evenly, to the violating suffix.
inline std::vector<double> project_hj_feasible(const std::vector<double>& y, const std::vector<double>& a,
                                               int max_cycles = 2000) {
    const std::size_t n = y.size();
    std::vector<double> tails(n);
    double acc = 0.0;
    for (std::size_t m = n; m-- > 0;) tails[m] = (acc += a[m]);
    std::vector<std::vector<double>> corr(n + 1, std::vector<double>(n, 0.0));
    std::vector<double> x = y, z(n);
    for (int cycle = 0; cycle < max_cycles; ++cycle) {
        const std::vector<double> start = x;
        for (std::size_t set = 0; set <= n; ++set) {
            for (std::size_t k = 0; k < n; ++k) z[k] = x[k] + corr[set][k];
            if (set == 0) {
                x = project_monotone_nonnegative(z);
            } else {
                const std::size_t m = set - 1;
                double tail = 0.0;
                for (std::size_t k = m; k < n; ++k) tail += z[k];
                x = z;
                if (tail < tails[m]) {
                    const double lift = (tails[m] - tail) / static_cast<double>(n - m);
                    for (std::size_t k = m; k < n; ++k) x[k] += lift;
                }
            }
            for (std::size_t k = 0; k < n; ++k) corr[set][k] = z[k] - x[k];
        }
        double moved = 0.0;
        for (std::size_t k = 0; k < n; ++k) moved = std::max(moved, std::abs(x[k] - start[k]));
        if (moved < 1e-14) break;
    }
    // Exact feasibility: a final sweep of suffix lifts from the back keeps
    // monotonicity and only raises tail sums.
    x = project_monotone_nonnegative(x);
    double tail = 0.0;
    for (std::size_t m = n; m-- > 0;) {
        tail += x[m];
        if (tail < tails[m]) {
            const double lift = (tails[m] - tail) / static_cast<double>(n - m);
            for (std::size_t k = m; k < n; ++k) x[k] += lift;
            tail = tails[m];
        }
    }
    return x;
}

/// Cross-check solver: projected (sub)gradient descent on b with the
/// projection above. The step is the inverse curvature bound of xi_bar.
inline SubgradientResult h_j_subgradient(const MixedPSpinModel& model, const DyadicVector& a, int max_iter = 500,
                                         double tol = 1e-10) {
    const std::size_t n = a.size();
    const double w = a.weight();
    auto value = [&](const std::vector<double>& b) {
        double s = 0.0;
        for (double x : b) s += model.xi_bar(x);
        return s * w;
    };
    const double curvature = model.xi_second(1.0);
    const double step = curvature > 0.0 ? 1.0 / curvature : 1.0;

    std::vector<double> b = project_hj_feasible(std::vector<double>(n, 0.0), a.entries);
    SubgradientResult out{value(b), b, 0};
    for (int it = 1; it <= max_iter; ++it) {
        std::vector<double> y = b;
        // Gradient of sum_k 2^{-j} xi_bar(b_k) is 2^{-j} xi_bar'(b_k); in the
        // weighted geometry the factor cancels.
        for (std::size_t k = 0; k < n; ++k) y[k] -= step * model.xi_bar_slope(b[k]);
        const auto next = project_hj_feasible(y, a.entries);
        const double v = value(next);
        out.iterations = it;
        const double gain = out.value - v;
        if (v < out.value) {
            out.value = v;
            out.minimizer = next;
        }
        b = next;
        if (gain >= 0.0 && gain < tol) break;
    }
    return out;
}

/// H^j(a) >= H^j(a') - tol, given a - a' in (C^j)*.
inline bool h_j_monotonicity_check(const MixedPSpinModel& model, const DyadicVector& a, const DyadicVector& a_prime,
                                   double tol = 1e-12) {
    if (a.level != a_prime.level) throw ValidationError("vectors at different levels", "/a_prime");
    DyadicVector diff = a;
    for (std::size_t k = 0; k < a.size(); ++k) diff[k] -= a_prime[k];
    if (!dual_cone_test(diff)) throw ValidationError("a - a' is not in the dual cone", "/a");
    return h_j(model, a) >= h_j(model, a_prime) - tol;
}

// ---------------------------------------------------------------------------
// Gradients of psi^j(q) = psi(l_j q) in the weighted inner product.
// ---------------------------------------------------------------------------

inline double psi_j(const DyadicVector& q, const QuadratureConfig& quad = {}) {
    return psi(lift_path(q), quad);
}

/// Difference quotients of psi see the second derivative of the interpolating
/// spline, whose error is O(grid_step^2); a finer grid keeps it near 1e-5.
inline constexpr QuadratureConfig kGradientQuadrature{40, 0.02};

inline DyadicVector grad_psi_j(const DyadicVector& q, double h, const QuadratureConfig& quad = kGradientQuadrature) {
    if (!q.is_monotone_nonnegative()) throw ValidationError("gradient base point is not in the cone", "/q");
    if (!(h > 0.0)) throw ValidationError("finite-difference step must be positive", "/h");
    const std::size_t n = q.size();
    const double scale = std::ldexp(1.0, q.level);
    const double base = psi_j(q, quad);
    DyadicVector g(q.level, std::vector<double>(n, 0.0));
    std::size_t k = 0;
    while (k < n) {
        const bool fwd = (k + 1 == n) || (q[k] + h <= q[k + 1]);
        if (fwd) {
            DyadicVector p = q;
            p[k] += h;
            g[k] = scale * (psi_j(p, quad) - base) / h;
            ++k;
            continue;
        }
        const double below = k ? q[k - 1] : 0.0;
        if (q[k] - h >= below) {
            DyadicVector p = q;
            p[k] -= h;
            g[k] = scale * (base - psi_j(p, quad)) / h;
            ++k;
            continue;
        }
        // Pinched: move the block of nearly tied coordinates together.
        std::size_t end = k + 1;
        while (end < n && q[end] - q[end - 1] < h) ++end;
        DyadicVector p = q;
        for (std::size_t i = k; i < end; ++i) p[i] += h;
        const double share = scale * (psi_j(p, quad) - base) / h / static_cast<double>(end - k);
        for (std::size_t i = k; i < end; ++i) g[i] = share;
        k = end;
    }
    return g;
}

/// <grad psi^j, p> - sum 2^{-j} xi*(p_k) - sum 2^{-j} xi(grad_k), with the
/// gradient taken at t p + q and p = p_j(nu).
inline double subsolution_residual(const MixedPSpinModel& model, const StepPath& nu, int j, double t,
                                   const DyadicVector& q, double h,
                                   const QuadratureConfig& quad = kGradientQuadrature) {
    if (!(t > 0.0)) throw ValidationError("residual needs t > 0", "/t");
    if (q.level != j) throw ValidationError("base point level does not match j", "/q");
    const DyadicVector p = project(nu, j);
    DyadicVector x = q;
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += t * p[k];
    const DyadicVector g = grad_psi_j(x, h, quad);
    double sum = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) sum += g[k] * p[k] - model.xi_star(p[k]) - model.xi(g[k]);
    return sum * g.weight();
}

// ---------------------------------------------------------------------------
// Cone grid and the explicit scheme.
//
// The scheme works in increment coordinates d_1 = q_1, d_m = q_m - q_{m-1},
// where the cone is an orthant and moving d_m by h shifts q_m, ..., q_n by h.
// With D_m the derivative along that move, the Euclidean partials are
// D_k - D_{k+1}, and H^j is nondecreasing in every D_m.
// ---------------------------------------------------------------------------

class ConeGrid {
public:
    ConeGrid(int j, double h, double cap) : level_(j), h_(h), cap_(cap) {
        if (j < 0 || j > 3) throw ValidationError("grid level must be in [0, 3]", "/j");
        if (!(h > 0.0)) throw ValidationError("grid step must be positive", "/h");
        if (!(cap > 0.0)) throw ValidationError("grid cap must be positive", "/M");
        const double ratio = cap / h;
        cap_index_ = static_cast<int>(std::llround(ratio));
        if (std::abs(ratio - cap_index_) > 1e-9 * std::max(1.0, ratio) || cap_index_ < 1) {
            throw ValidationError("grid cap must be a positive multiple of the step", "/M");
        }
        n_ = std::size_t{1} << j;
        double count = 1.0;
        for (std::size_t i = 1; i <= n_; ++i) count = count * static_cast<double>(cap_index_ + i) / static_cast<double>(i);
        if (count > 5e6) throw NumericalError("cone grid would have more than 5e6 points");

        std::vector<int> idx(n_, 0);
        for (;;) {
            index_.emplace(key(idx), points_.size());
            points_.push_back(idx);
            std::size_t pos = n_;
            while (pos > 0 && idx[pos - 1] == cap_index_) --pos;
            if (pos == 0) break;
            ++idx[pos - 1];
            for (std::size_t k = pos; k < n_; ++k) idx[k] = idx[pos - 1];
        }
        fwd_.assign(points_.size() * n_, npos);
        bwd_.assign(points_.size() * n_, npos);
        for (std::size_t i = 0; i < points_.size(); ++i) {
            for (std::size_t m = 0; m < n_; ++m) {
                auto up = points_[i];
                for (std::size_t k = m; k < n_; ++k) ++up[k];
                if (up.back() <= cap_index_) fwd_[i * n_ + m] = index_.at(key(up));
                const int below = m ? points_[i][m - 1] : 0;
                if (points_[i][m] > below) {
                    auto down = points_[i];
                    for (std::size_t k = m; k < n_; ++k) --down[k];
                    bwd_[i * n_ + m] = index_.at(key(down));
                }
            }
        }
    }

    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    int level() const noexcept { return level_; }
    double step() const noexcept { return h_; }
    double cap() const noexcept { return cap_; }
    int cap_index() const noexcept { return cap_index_; }
    std::size_t dim() const noexcept { return n_; }
    std::size_t size() const noexcept { return points_.size(); }
    const std::vector<int>& indices(std::size_t i) const { return points_[i]; }

    DyadicVector point(std::size_t i) const {
        std::vector<double> v(n_);
        for (std::size_t k = 0; k < n_; ++k) v[k] = points_[i][k] * h_;
        return DyadicVector(level_, std::move(v));
    }

    /// Neighbor after raising (lowering) increment coordinate m by one step.
    std::size_t forward(std::size_t i, std::size_t m) const { return fwd_[i * n_ + m]; }
    std::size_t backward(std::size_t i, std::size_t m) const { return bwd_[i * n_ + m]; }

    std::optional<std::size_t> find(const std::vector<int>& idx) const {
        const auto it = index_.find(key(idx));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    /// Strictly inside the cone and far enough from the cap that the exact
    /// domain of dependence over [0, T] stays on the grid.
    bool interior(std::size_t i, double reach) const {
        const auto& p = points_[i];
        if (p[0] <= 0) return false;
        for (std::size_t k = 1; k < n_; ++k) {
            if (p[k] <= p[k - 1]) return false;
        }
        return p.back() * h_ + reach <= cap_ + 1e-12;
    }

    template <typename Fn>
    std::vector<double> sample(Fn&& fn) const {
        std::vector<double> out(size());
        for (std::size_t i = 0; i < size(); ++i) out[i] = fn(point(i));
        return out;
    }

private:
    std::uint64_t key(const std::vector<int>& idx) const {
        std::uint64_t k = 0;
        for (int v : idx) k = k * static_cast<std::uint64_t>(cap_index_ + 1) + static_cast<std::uint64_t>(v);
        return k;
    }

    int level_;
    double h_, cap_;
    int cap_index_ = 0;
    std::size_t n_ = 1;
    std::vector<std::vector<int>> points_;
    std::unordered_map<std::uint64_t, std::size_t> index_;
    std::vector<std::size_t> fwd_, bwd_;
};

struct FdOptions {
    bool keep_slices = true;    // otherwise only the first and last slice are stored
    /// Slopes used for the ghost neighbor beyond the cap, one per grid point
    /// and increment direction. Defaults to the backward differences of the
    /// initial condition, frozen in time.
    std::optional<std::vector<double>> cap_slopes;
};

struct FdSolution {
    std::vector<double> times;
    std::vector<std::vector<double>> slices;
    double dt = 0.0;
    double cfl_ratio = 0.0;       // dt / (h / (2 Lip 2^j)), at most 1
    double max_gradient = 0.0;    // largest Euclidean partial in the final slice
    bool gradient_near_cap = false;

    const std::vector<double>& final_slice() const { return slices.back(); }
};

inline std::vector<double> frozen_cap_slopes(const ConeGrid& grid, const std::vector<double>& init) {
    const std::size_t n = grid.dim();
    const double h = grid.step();
    std::vector<double> out(grid.size() * n, 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t m = 0; m < n; ++m) {
            const auto b = grid.backward(i, m);
            if (b != ConeGrid::npos) {
                out[i * n + m] = (init[i] - init[b]) / h;
                continue;
            }
            // Pinned in both directions (on the cap with d_m = 0): borrow the
            // slope from a neighbor one step below the cap.
            for (std::size_t other = n; other-- > 0;) {
                const auto lower = grid.backward(i, other);
                if (lower == ConeGrid::npos) continue;
                const auto f = grid.forward(lower, m);
                if (f == ConeGrid::npos) continue;
                out[i * n + m] = (init[f] - init[lower]) / h;
                break;
            }
        }
    }
    return out;
}

inline FdSolution fd_solve(const MixedPSpinModel& model, const ConeGrid& grid, const std::vector<double>& init, double T,
                           double dt, const FdOptions& opt = {}) {
    if (init.size() != grid.size()) throw ValidationError("initial condition does not match the grid", "/init");
    if (!(T >= 0.0) || !std::isfinite(T)) throw ValidationError("T must be finite and nonnegative", "/T");
    if (!(dt > 0.0)) throw ValidationError("dt must be positive", "/dt");
    const std::size_t n = grid.dim();
    const double h = grid.step();
    const double lip = model.xi_bar_lipschitz();
    const double scale = std::ldexp(1.0, grid.level());
    const double dt_max = h / (2.0 * lip * scale);
    FdSolution sol;
    sol.cfl_ratio = dt / dt_max;
    if (sol.cfl_ratio > 1.0 + 1e-12) {
        throw NumericalError("CFL condition violated: dt = " + std::to_string(dt) + " > " + std::to_string(dt_max));
    }
    const std::vector<double> ghost = opt.cap_slopes ? *opt.cap_slopes : frozen_cap_slopes(grid, init);
    if (ghost.size() != grid.size() * n) throw ValidationError("cap slopes do not match the grid", "/cap_slopes");

    const auto steps = static_cast<std::size_t>(std::llround(T / dt));
    if (std::abs(static_cast<double>(steps) * dt - T) > 1e-9 * std::max(1.0, T)) {
        throw ValidationError("T must be a multiple of dt", "/dt");
    }
    sol.dt = dt;
    std::vector<double> u = init, next(u.size());
    sol.times.push_back(0.0);
    sol.slices.push_back(u);

    std::vector<double> D(n), a(n);
    DyadicVector arg(grid.level(), std::vector<double>(n, 0.0));
    auto gradient = [&](const std::vector<double>& field, std::size_t i, double& visc) {
        visc = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            const auto f = grid.forward(i, m);
            const auto b = grid.backward(i, m);
            const double dp = f != ConeGrid::npos ? (field[f] - field[i]) / h : ghost[i * n + m];
            if (b == ConeGrid::npos) {
                D[m] = dp;
            } else {
                const double dm = (field[i] - field[b]) / h;
                D[m] = 0.5 * (dp + dm);
                visc += 0.5 * lip * (dp - dm);
            }
        }
        for (std::size_t k = 0; k < n; ++k) arg[k] = scale * (D[k] - (k + 1 < n ? D[k + 1] : 0.0));
    };

    for (std::size_t s = 1; s <= steps; ++s) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            double visc = 0.0;
            gradient(u, i, visc);
            next[i] = u[i] + dt * (h_j(model, arg) + visc);
        }
        u.swap(next);
        if (opt.keep_slices || s == steps) {
            sol.times.push_back(static_cast<double>(s) * dt);
            sol.slices.push_back(u);
        }
    }

    for (std::size_t i = 0; i < grid.size(); ++i) {
        double visc = 0.0;
        gradient(u, i, visc);
        for (std::size_t k = 0; k < n; ++k) sol.max_gradient = std::max(sol.max_gradient, std::abs(arg[k]));
    }
    // Exact gradients stay in [0, 1]; larger partials only enter through the
    // cap closure.
    sol.gradient_near_cap = sol.max_gradient > 1.0 + 1e-6;
    return sol;
}

/// CSV with columns t, q1, ..., q_{2^j}, value.
inline void write_fd_csv(std::ostream& os, const ConeGrid& grid, const FdSolution& sol) {
    os << "t";
    for (std::size_t k = 0; k < grid.dim(); ++k) os << ",q" << (k + 1);
    os << ",value\n";
    os.precision(17);
    for (std::size_t s = 0; s < sol.slices.size(); ++s) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            os << sol.times[s];
            for (int idx : grid.indices(i)) os << ',' << idx * grid.step();
            os << ',' << sol.slices[s][i] << '\n';
        }
    }
}

}  // namespace spinhj
