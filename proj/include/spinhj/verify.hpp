#pragma once

// Invariant suites run by `spin-hj verify`. Each check reports the worst
// observed margin against its tolerance; a negative slack is a failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "spinhj/cascade.hpp"
#include "spinhj/cone.hpp"
#include "spinhj/error.hpp"
#include "spinhj/freeenergy.hpp"
#include "spinhj/hjfd.hpp"
#include "spinhj/hopflax.hpp"
#include "spinhj/model.hpp"
#include "spinhj/random.hpp"

namespace spinhj::verify {

struct Check {
    std::string suite;
    std::string name;
    bool passed = false;
    double slack = 0.0;   // tolerance minus worst violation
    std::size_t cases = 0;
};

struct Report {
    std::vector<Check> checks;

    bool passed() const noexcept {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
    }
};

inline const std::vector<std::string>& suites() {
    static const std::vector<std::string> names{"model", "cone", "cascade", "freeenergy", "hopflax", "hjfd"};
    return names;
}

/// Random cone path with up to `max_pieces` steps and values below `top`.
template <typename Engine>
StepPath random_path(Engine& eng, std::size_t max_pieces, double top) {
    std::uniform_int_distribution<std::size_t> pieces(1, max_pieces);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t n = pieces(eng);
    std::vector<double> cuts{0.0, 1.0}, values(n);
    while (cuts.size() < n + 1) {
        const double c = u(eng);
        if (c > 1e-3 && c < 1.0 - 1e-3 && std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    for (auto& v : values) v = top * u(eng);
    std::sort(values.begin(), values.end());
    return StepPath(std::move(cuts), std::move(values));
}

template <typename Engine>
DyadicVector random_cone_point(Engine& eng, int j, double top) {
    std::uniform_real_distribution<double> u(0.0, top);
    std::vector<double> v(std::size_t{1} << j);
    for (auto& x : v) x = u(eng);
    std::sort(v.begin(), v.end());
    return DyadicVector(j, std::move(v));
}

namespace detail {

/// Tracks max(violation) over cases and turns it into a check.
class Tally {
public:
    Tally(std::string suite, std::string name, double tol) : suite_(std::move(suite)), name_(std::move(name)), tol_(tol) {}

    void violation(double v) {
        worst_ = std::max(worst_, std::isnan(v) ? std::numeric_limits<double>::infinity() : v);
        ++cases_;
    }

    Check done() const {
        const double slack = tol_ - worst_;
        return {suite_, name_, slack >= 0.0, slack, cases_};
    }

private:
    std::string suite_, name_;
    double tol_;
    double worst_ = -std::numeric_limits<double>::infinity();
    std::size_t cases_ = 0;
};

inline void model_suite(const MixedPSpinModel& m, std::uint64_t seed, Report& out) {
    std::mt19937_64 eng(seed);
    Tally theta("model", "theta_is_conjugate_of_xi_prime", 1e-9);
    for (int i = 0; i <= 100; ++i) {
        const double r = i * 0.01;
        theta.violation(std::abs(m.theta(r) - m.xi_star(m.xi_prime(r))));
    }
    out.checks.push_back(theta.done());

    Tally star("model", "xi_star_nonnegative_nondecreasing_convex", 1e-9);
    const double ds = 0.01;
    for (int i = 0; i < 400; ++i) {
        const double s = -1.0 + i * ds;
        const double a = m.xi_star(s), b = m.xi_star(s + ds), c = m.xi_star(s + 2 * ds);
        star.violation(std::max({-a, a - b, -(a - 2 * b + c)}));
    }
    out.checks.push_back(star.done());

    Tally lip("model", "xi_bar_lipschitz", 1e-12);
    Tally cvx("model", "xi_bar_convex", 1e-12);
    std::uniform_real_distribution<double> u(-2.0, 3.0);
    const double L = m.xi_prime(1.0);
    for (int i = 0; i < 1000; ++i) {
        const double a = u(eng), b = u(eng);
        lip.violation(std::abs(m.xi_bar(a) - m.xi_bar(b)) - L * std::abs(a - b));
        cvx.violation(m.xi_bar(0.5 * (a + b)) - 0.5 * (m.xi_bar(a) + m.xi_bar(b)));
    }
    out.checks.push_back(lip.done());
    out.checks.push_back(cvx.done());
}

inline void cone_suite(std::uint64_t seed, Report& out) {
    std::mt19937_64 eng(seed);
    Tally bound("cone", "projection_bound", 0.0);
    Tally lift_back("cone", "project_lift_roundtrip", 1e-12);
    for (int i = 0; i < 100; ++i) {
        const auto p = random_path(eng, 6, 2.0);
        for (int j = 0; j <= 6; ++j) {
            const auto b = verify_projection_bound(p, j);
            bound.violation(b.lhs - b.rhs);
            const auto v = project(p, j);
            const auto back = project(lift(v), j);
            double err = 0.0;
            for (std::size_t k = 0; k < v.size(); ++k) err = std::max(err, std::abs(back[k] - v[k]));
            lift_back.violation(err);
        }
    }
    out.checks.push_back(bound.done());
    out.checks.push_back(lift_back.done());
}

inline void cascade_suite(const MixedPSpinModel& m, std::uint64_t seed, Report& out) {
    std::mt19937_64 eng(seed);
    Tally constant("cascade", "constant_leaf", 1e-12);
    for (int i = 0; i < 10; ++i) {
        const auto p = random_path(eng, 4, 2.0);
        constant.violation(std::abs(cascade_log_moment(CascadeLevels::from_path(p), Leaf::constant(0.37)) - 0.37));
    }
    out.checks.push_back(constant.done());

    Tally linear("cascade", "linear_leaf_identity", 1e-6);
    for (double t0 : {0.1, 0.5, 1.0}) {
        for (int i = 0; i < 20; ++i) {
            const auto z = random_path(eng, 5, 1.0);
            std::vector<double> zv = z.values();
            if (zv.back() <= 0.0) continue;
            for (auto& x : zv) x /= zv.back();
            const StepPath zeta(z.cuts(), zv);
            std::vector<double> var;
            for (double x : zv) var.push_back(t0 * m.theta(x));
            const double lhs =
                cascade_log_moment(CascadeLevels::from_path(StepPath(z.cuts(), var)), Leaf::identity());
            const double integral = zeta.integrate([&](double x) { return 2.0 * t0 * m.theta(x); });
            linear.violation(std::abs(lhs - 0.5 * (-integral + 2.0 * t0 * m.theta(1.0))));
        }
    }
    out.checks.push_back(linear.done());

    Tally mono("cascade", "psi_monotone", 1e-9);
    Tally lip("cascade", "psi_lipschitz_l1", 1e-6);
    std::uniform_real_distribution<double> bump(0.0, 0.4);
    for (int i = 0; i < 20; ++i) {
        const auto p = random_path(eng, 3, 1.0);
        std::vector<double> up = p.values();
        double acc = 0.0;
        for (auto& x : up) x += (acc += bump(eng));
        const StepPath q(p.cuts(), up);
        const double a = psi(p), b = psi(q);
        mono.violation(a - b);
        lip.violation(std::abs(a - b) - l1_distance(p, q));
    }
    out.checks.push_back(mono.done());
    out.checks.push_back(lip.done());
}

inline void freeenergy_suite(const MixedPSpinModel& m, std::uint64_t seed, Report& out) {
    Tally closed("freeenergy", "pure_two_spin_closed_form", 1e-12);
    const auto sk = MixedPSpinModel::sk();
    for (double t : {0.1, 0.5, 1.0}) {
        const auto est = free_energy(sk, 1, t, StepPath::zero(), {20, 10, derive_seed(seed, 1)});
        closed.violation(std::max(std::abs(est.mean - t), est.stderr));
    }
    out.checks.push_back(closed.done());

    Tally tele("freeenergy", "telescoping", 1e-12);
    const StepPath mu({0.0, 0.5, 1.0}, {0.2, 0.6});
    const auto table = free_energy_table(m, 4, 0.3, mu, {20, 50, derive_seed(seed, 2)});
    const auto inc = increments_from_table(table);
    double sum = 0.0;
    for (std::size_t N = 1; N < table.size(); ++N) {
        sum += inc[N - 1].mean;
        const double target = static_cast<double>(N) * table[N].mean;
        tele.violation(std::abs(sum - target) / std::max(1.0, std::abs(target)));
    }
    out.checks.push_back(tele.done());

    Tally det("freeenergy", "seed_determinism", 0.0);
    const FreeEnergyMc mc{10, 50, derive_seed(seed, 3)};
    const auto a = free_energy(m, 3, 0.4, mu, mc), b = free_energy(m, 3, 0.4, mu, mc);
    det.violation(a.mean == b.mean && a.stderr == b.stderr ? 0.0 : 1.0);
    out.checks.push_back(det.done());

    Tally init("freeenergy", "initial_condition_is_psi_3sigma", 0.0);
    const auto f0 = free_energy(m, 2, 0.0, StepPath::constant(0.5), {400, 10, derive_seed(seed, 4)});
    init.violation(std::abs(f0.mean - psi(StepPath::constant(0.5))) - 3.0 * f0.stderr);
    out.checks.push_back(init.done());
}

inline void hopflax_suite(const MixedPSpinModel& m, std::uint64_t seed, Report& out) {
    std::mt19937_64 eng(seed);
    HopfLaxOptions opt;
    opt.level = 1;
    const HopfLaxSolver solver(m, opt);

    Tally initial("hopflax", "initial_time_is_psi", 0.0);
    const StepPath mu({0.0, 0.5, 1.0}, {0.1, 0.4});
    initial.violation(std::abs(solver.solve(0.0, mu).value - psi(mu)));
    out.checks.push_back(initial.done());

    Tally sup("hopflax", "sup_dominates_subsolutions", 1e-9);
    Tally mono("hopflax", "monotone_in_t_at_zero", 1e-9);
    double prev = -std::numeric_limits<double>::infinity();
    for (double t : {0.1, 0.2, 0.4}) {
        const double f = solver.solve(t, StepPath::zero()).value;
        mono.violation(prev - f);
        prev = f;
        for (int i = 0; i < 5; ++i) {
            const auto nu = lift_path(random_cone_point(eng, 1, m.xi_prime(1.0)));
            sup.violation(g_subsolution(m, nu, t, StepPath::zero()) - f);
        }
    }
    out.checks.push_back(sup.done());
    out.checks.push_back(mono.done());
}

inline void hjfd_suite(const MixedPSpinModel& m, std::uint64_t seed, Report& out) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> u(-1.5, 2.0);

    Tally on_unit("hjfd", "h_j_equals_sum_xi_on_unit_cone", 1e-12);
    for (int j = 0; j <= 3; ++j) {
        for (int i = 0; i < 10; ++i) {
            const auto b = random_cone_point(eng, j, 1.0);
            double expect = 0.0;
            for (double x : b.entries) expect += m.xi(x) * b.weight();
            on_unit.violation(std::abs(h_j(m, b) - expect));
        }
    }
    out.checks.push_back(on_unit.done());

    Tally mono("hjfd", "h_j_dual_cone_monotone", 1e-12);
    Tally cvx("hjfd", "h_j_convex", 1e-9);
    std::exponential_distribution<double> expo(1.0);
    for (int i = 0; i < 100; ++i) {
        const int j = i % 3;
        const std::size_t n = std::size_t{1} << j;
        std::vector<double> a(n), b(n), d(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            a[k] = u(eng);
            b[k] = u(eng);
        }
        // Random nonnegative tail sums, some of them zero.
        std::vector<double> tail(n + 1, 0.0);
        for (std::size_t s = 0; s < n; ++s) tail[s] = eng() % 3 ? expo(eng) : 0.0;
        for (std::size_t s = 0; s < n; ++s) d[s] = tail[s] - tail[s + 1];
        const DyadicVector lo(j, a);
        std::vector<double> hi_v(n);
        for (std::size_t k = 0; k < n; ++k) hi_v[k] = a[k] + d[k];
        const DyadicVector hi(j, hi_v);
        if (dual_cone_test(DyadicVector(j, d))) mono.violation(h_j(m, lo) - h_j(m, hi));
        std::vector<double> mid(n);
        for (std::size_t k = 0; k < n; ++k) mid[k] = 0.5 * (a[k] + b[k]);
        cvx.violation(h_j(m, DyadicVector(j, mid)) - 0.5 * (h_j(m, lo) + h_j(m, DyadicVector(j, b))));
    }
    out.checks.push_back(mono.done());
    out.checks.push_back(cvx.done());

    Tally range("hjfd", "grad_psi_in_unit_cone", 1e-4);
    Tally resid("hjfd", "subsolution_residual", 1e-4);
    std::uniform_real_distribution<double> ut(0.05, 1.0);
    for (int j = 0; j <= 2; ++j) {
        for (int i = 0; i < 5; ++i) {
            const auto q = random_cone_point(eng, j, 1.5);
            const auto g = grad_psi_j(q, 1e-4);
            double worst = std::max(-g[0], g[0] - 1.0);
            for (std::size_t k = 1; k < g.size(); ++k) worst = std::max({worst, g[k] - 1.0, g[k - 1] - g[k]});
            range.violation(worst);
            const auto nu = lift_path(random_cone_point(eng, j, m.xi_prime(1.0)));
            resid.violation(subsolution_residual(m, nu, j, ut(eng), q, 1e-4));
        }
    }
    out.checks.push_back(range.done());
    out.checks.push_back(resid.done());

    Tally constant("hjfd", "fd_constant_fixed_point", 1e-12);
    const ConeGrid grid(1, 0.1, 1.0);
    const double dt = grid.step() / (2.0 * m.xi_prime(1.0) * 2.0) * 0.5;
    const auto sol = fd_solve(m, grid, std::vector<double>(grid.size(), 0.7), 20 * dt, dt);
    for (double v : sol.final_slice()) constant.violation(std::abs(v - 0.7));
    out.checks.push_back(constant.done());
}

}  // namespace detail

/// Runs one suite by name, or every suite for "all".
inline Report run(const std::string& suite, const MixedPSpinModel& model, std::uint64_t seed) {
    const auto& names = suites();
    if (suite != "all" && std::find(names.begin(), names.end(), suite) == names.end()) {
        throw ValidationError("unknown verify suite '" + suite + "'", "/suite");
    }
    Report out;
    auto want = [&](const char* s) { return suite == "all" || suite == s; };
    if (want("model")) detail::model_suite(model, derive_seed(seed, 11), out);
    if (want("cone")) detail::cone_suite(derive_seed(seed, 12), out);
    if (want("cascade")) detail::cascade_suite(model, derive_seed(seed, 13), out);
    if (want("freeenergy")) detail::freeenergy_suite(model, derive_seed(seed, 14), out);
    if (want("hopflax")) detail::hopflax_suite(model, derive_seed(seed, 15), out);
    if (want("hjfd")) detail::hjfd_suite(model, derive_seed(seed, 16), out);
    return out;
}

}  // namespace spinhj::verify
