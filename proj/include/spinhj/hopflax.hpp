#pragma once

// Hopf-Lax variational formula
//   f(t, mu) = sup_{nu in C} { psi(nu) - t int_0^1 xi*((nu(s) - mu(s)) / t) ds }
// restricted to step paths nu on a dyadic cut grid, and the subsolution family
//   g_nu(t, mu) = psi(t nu + mu) - t int_0^1 xi*(nu(s)) ds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "spinhj/cascade.hpp"
#include "spinhj/cone.hpp"
#include "spinhj/error.hpp"
#include "spinhj/model.hpp"

namespace spinhj {

/// t int_0^1 xi*((nu - mu) / t) ds, exact on the merged cut grid.
inline double penalty(const MixedPSpinModel& model, double t, const StepFunction& mu, const StepFunction& nu) {
    if (!(t > 0.0)) throw ValidationError("penalty needs t > 0", "/t");
    return t * integrate_pair(nu, mu, [&](double n, double m) { return model.xi_star((n - m) / t); });
}

inline double g_subsolution(const MixedPSpinModel& model, const StepPath& nu, double t, const StepPath& mu,
                            const QuadratureConfig& quad = {}) {
    if (!(t >= 0.0)) throw ValidationError("t must be nonnegative", "/t");
    if (t == 0.0) return psi(mu, quad);
    return psi(scaled_sum(t, nu, mu), quad) - t * nu.integrate([&](double v) { return model.xi_star(v); });
}

struct HopfLaxOptions {
    int level = 2;                  // nu lives on 2^level dyadic steps
    double grid_step = 0.1;         // ladder spacing of the exhaustive backend
    std::optional<double> v_max;    // default xi'(1) + mu(1) + 1
    std::size_t max_grid_points = 200000;
    double tol = 1e-9;              // stop when a sweep gains less than this
    double line_tol = 1e-7;
    int max_sweeps = 60;
};

struct HopfLaxResult {
    double value = 0.0;
    StepPath argmax = StepPath::zero();
    std::string backend;       // "initial", "grid" or "ascent"
    double grid_value = std::numeric_limits<double>::quiet_NaN();
    double ascent_value = std::numeric_limits<double>::quiet_NaN();
    double grid_step = 0.0;    // resolution actually used by the grid backend
    double v_max = 0.0;
    int sweeps = 0;
    std::size_t evaluations = 0;
    bool converged = true;
    bool touches_cap = false;  // argmax within one grid step of v_max
};

/// Evaluates the Hopf-Lax objective over dyadic step paths. Values of psi on
/// the exhaustive ladder are independent of (t, mu) and memoized across
/// calls on the same solver.
class HopfLaxSolver {
public:
    HopfLaxSolver(MixedPSpinModel model, HopfLaxOptions opt = {}, QuadratureConfig quad = {})
        : model_(std::move(model)), opt_(opt), quad_(quad) {
        if (opt_.level < 0 || opt_.level > 6) throw ValidationError("Hopf-Lax level must be in [0, 6]", "/j");
        if (!(opt_.grid_step > 0.0)) throw ValidationError("grid_step must be positive", "/grid_step");
    }

    const MixedPSpinModel& model() const noexcept { return model_; }
    const HopfLaxOptions& options() const noexcept { return opt_; }

    double psi_of(const std::vector<double>& nu_values) const {
        ++evaluations_;
        return psi(lift_path(DyadicVector(opt_.level, nu_values)), quad_);
    }

    double objective(double t, const StepPath& mu, const std::vector<double>& nu_values) const {
        const auto nu = lift(DyadicVector(opt_.level, nu_values));
        return psi_of(nu_values) - penalty(model_, t, mu, nu);
    }

    HopfLaxResult solve(double t, const StepPath& mu) const {
        if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("t must be finite and nonnegative", "/t");
        HopfLaxResult out;
        if (t == 0.0) {
            out.value = psi(mu, quad_);
            out.argmax = mu;
            out.backend = "initial";
            return out;
        }
        const std::size_t n = std::size_t{1} << opt_.level;
        const double v_max = opt_.v_max.value_or(model_.xi_prime(1.0) + mu.sup() + 1.0);
        out.v_max = v_max;
        const std::size_t evals_before = evaluations_;

        // Backend (a): exhaustive search over nondecreasing ladders.
        double step = opt_.grid_step;
        while (ladder_count(static_cast<std::size_t>(std::floor(v_max / step)) + 1, n) >
               static_cast<double>(opt_.max_grid_points)) {
            step *= 2.0;
        }
        out.grid_step = step;
        const auto rungs = static_cast<int>(std::floor(v_max / step + 1e-12)) + 1;
        std::vector<int> idx(n, 0);
        std::vector<double> best_grid(n, 0.0), nu(n);
        double best = -std::numeric_limits<double>::infinity();
        for (;;) {
            for (std::size_t k = 0; k < n; ++k) nu[k] = idx[k] * step;
            const double val = cached_psi(idx, step, nu) - penalty(model_, t, mu, lift(DyadicVector(opt_.level, nu)));
            if (val > best) {
                best = val;
                best_grid = nu;
            }
            // Next nondecreasing tuple in lexicographic order.
            std::size_t pos = n;
            while (pos > 0 && idx[pos - 1] == rungs - 1) --pos;
            if (pos == 0) break;
            ++idx[pos - 1];
            for (std::size_t k = pos; k < n; ++k) idx[k] = idx[pos - 1];
        }
        out.grid_value = best;

        // Backend (b): coordinate ascent with golden-section line searches,
        // each trial point re-projected onto the monotone cone.
        std::vector<double> cur = best_grid;
        double cur_val = best;
        out.converged = false;
        for (int sweep = 0; sweep < opt_.max_sweeps; ++sweep) {
            const double start_val = cur_val;
            for (std::size_t k = 0; k < n; ++k) {
                const double lo = std::max(0.0, cur[k] - 2.0 * step);
                const double hi = std::min(v_max, cur[k] + 2.0 * step);
                auto trial = [&](double x) {
                    std::vector<double> cand = cur;
                    cand[k] = x;
                    cand = project_monotone_nonnegative(cand);
                    return std::make_pair(objective(t, mu, cand), cand);
                };
                auto [x_best, val_best] = golden_max(lo, hi, [&](double x) { return trial(x).first; });
                if (val_best > cur_val) {
                    cur = trial(x_best).second;
                    cur_val = val_best;
                }
            }
            out.sweeps = sweep + 1;
            if (cur_val - start_val < opt_.tol) {
                out.converged = true;
                break;
            }
        }
        out.ascent_value = cur_val;

        const bool use_ascent = cur_val > best;
        const auto& arg = use_ascent ? cur : best_grid;
        out.value = use_ascent ? cur_val : best;
        out.backend = use_ascent ? "ascent" : "grid";
        out.argmax = lift_path(DyadicVector(opt_.level, arg)).simplified();
        out.touches_cap = arg.back() >= v_max - step;
        out.evaluations = evaluations_ - evals_before;
        return out;
    }

private:
    static double ladder_count(std::size_t rungs, std::size_t n) {
        // C(rungs - 1 + n, n)
        double c = 1.0;
        for (std::size_t i = 1; i <= n; ++i) c = c * static_cast<double>(rungs - 1 + i) / static_cast<double>(i);
        return c;
    }

    double cached_psi(const std::vector<int>& idx, double step, const std::vector<double>& nu) const {
        auto& table = memo_[step];
        const auto it = table.find(idx);
        if (it != table.end()) return it->second;
        const double v = psi_of(nu);
        table.emplace(idx, v);
        return v;
    }

    template <typename Fn>
    std::pair<double, double> golden_max(double lo, double hi, Fn&& f) const {
        const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
        double a = lo, b = hi;
        double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
        double fc = f(c), fd = f(d);
        while (b - a > opt_.line_tol) {
            if (fc > fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = f(d);
            }
        }
        // Endpoints are candidates too; the maximum may sit on the bracket.
        double xb = fc > fd ? c : d, fb = std::max(fc, fd);
        for (double x : {lo, hi}) {
            const double fx = f(x);
            if (fx > fb) {
                fb = fx;
                xb = x;
            }
        }
        return {xb, fb};
    }

    MixedPSpinModel model_;
    HopfLaxOptions opt_;
    QuadratureConfig quad_;
    mutable std::map<double, std::map<std::vector<int>, double>> memo_;
    mutable std::size_t evaluations_ = 0;
};

inline HopfLaxResult hopf_lax(const MixedPSpinModel& model, double t, const StepPath& mu, const HopfLaxOptions& opt = {},
                              const QuadratureConfig& quad = {}) {
    return HopfLaxSolver(model, opt, quad).solve(t, mu);
}

}  // namespace spinhj
