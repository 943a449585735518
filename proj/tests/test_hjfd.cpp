#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "spinhj/hjfd.hpp"

using namespace spinhj;

namespace {

DyadicVector random_cone_point(std::mt19937_64& eng, int j, double scale) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(std::size_t{1} << j);
    double level = 0.0;
    for (auto& x : v) {
        level += scale * u(eng);
        x = level;
    }
    return DyadicVector(j, v);
}

const MixedPSpinModel kMixed({{1, 0.5}, {2, 1.0}, {3, 0.3}});

}  // namespace

TEST(Hj, LevelZero) {
    const auto sk = MixedPSpinModel::sk();
    EXPECT_EQ(h_j(sk, DyadicVector(0, {-3.0})), 0.0);
    for (int i = -20; i <= 20; ++i) {
        const double a = 0.1 * i;
        EXPECT_NEAR(h_j(sk, DyadicVector(0, {a})), sk.xi_bar(std::max(a, 0.0)), 1e-15);
        EXPECT_NEAR(h_j(sk, DyadicVector(0, {a})), oracle::h0_brute(sk, a), 1e-3);
    }
}

TEST(Hj, EqualsXiOnUnitConePoints) {
    std::mt19937_64 eng(1);
    for (int j = 0; j <= 4; ++j) {
        for (int i = 0; i < 20; ++i) {
            auto b = random_cone_point(eng, j, 1.0 / (1 << j));
            double expect = 0.0;
            for (double x : b.entries) expect += kMixed.xi(x);
            EXPECT_NEAR(h_j(kMixed, b), expect * b.weight(), 1e-14);
        }
    }
}

TEST(Hj, LevelOneAgainstBruteForce) {
    const auto sk = MixedPSpinModel::sk();
    EXPECT_NEAR(h_j(sk, DyadicVector(1, {0.5, -0.2})), 0.0225, 1e-15);
    EXPECT_NEAR(h_j(sk, DyadicVector(1, {0.5, -0.2})), oracle::h1_brute(sk, 0.5, -0.2), 1e-4);
    std::mt19937_64 eng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 10; ++i) {
        const double a1 = u(eng), a2 = u(eng);
        EXPECT_NEAR(h_j(kMixed, DyadicVector(1, {a1, a2})), oracle::h1_brute(kMixed, a1, a2), 1e-4) << a1 << " " << a2;
    }
}

TEST(Hj, SubgradientCrossCheck) {
    std::mt19937_64 eng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.5);
    for (int j = 0; j <= 3; ++j) {
        for (int i = 0; i < 10; ++i) {
            std::vector<double> a(std::size_t{1} << j);
            for (auto& x : a) x = u(eng);
            const DyadicVector v(j, a);
            const auto sg = h_j_subgradient(kMixed, v);
            EXPECT_GE(sg.value, h_j(kMixed, v) - 1e-12);
            EXPECT_NEAR(sg.value, h_j(kMixed, v), 5e-3);
            // The reported minimizer is feasible.
            const DyadicVector b(j, sg.minimizer);
            EXPECT_TRUE(b.is_monotone_nonnegative());
            DyadicVector diff = b;
            for (std::size_t k = 0; k < a.size(); ++k) diff[k] -= a[k];
            EXPECT_TRUE(dual_cone_test(diff, 1e-9));
        }
    }
}

TEST(Hj, DualMonotonicity) {
    const auto sk = MixedPSpinModel::sk();
    std::mt19937_64 eng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, 3);
    const DyadicVector a(2, {0.1, -0.3, 0.5, 0.2});
    EXPECT_TRUE(h_j_monotonicity_check(sk, a, a));
    for (int i = 0; i < 100; ++i) {
        std::vector<double> base(4);
        for (auto& x : base) x = u(eng);
        // a = a' + c 1_{k >= m} lies above a' in the dual order.
        std::vector<double> up = base;
        const int m = pick(eng);
        const double c = pos(eng);
        for (int k = m; k < 4; ++k) up[static_cast<std::size_t>(k)] += c;
        EXPECT_TRUE(h_j_monotonicity_check(sk, DyadicVector(2, up), DyadicVector(2, base)));
        std::vector<double> down = base;
        for (auto& x : down) x -= c;
        EXPECT_TRUE(h_j_monotonicity_check(sk, DyadicVector(2, base), DyadicVector(2, down)));
    }
    EXPECT_THROW(h_j_monotonicity_check(sk, DyadicVector(1, {1.0, -2.0}), DyadicVector(1, {0.0, 0.0})),
                 ValidationError);
}

TEST(Hj, Convexity) {
    std::mt19937_64 eng(5);
    std::uniform_real_distribution<double> u(-1.5, 2.0);
    for (int i = 0; i < 300; ++i) {
        std::vector<double> a(4), b(4), m(4);
        for (std::size_t k = 0; k < 4; ++k) {
            a[k] = u(eng);
            b[k] = u(eng);
            m[k] = 0.5 * (a[k] + b[k]);
        }
        const double slack = 0.5 * (h_j(kMixed, DyadicVector(2, a)) + h_j(kMixed, DyadicVector(2, b))) -
                             h_j(kMixed, DyadicVector(2, m));
        EXPECT_GE(slack, -1e-9);
    }
}

TEST(GradPsi, LevelZero) {
    const auto g0 = grad_psi_j(DyadicVector(0, {0.0}), 1e-4);
    EXPECT_NEAR(g0[0], 0.0, 1e-3);
    for (double q : {0.2, 0.7, 1.5}) {
        const auto g = grad_psi_j(DyadicVector(0, {q}), 1e-5);
        EXPECT_NEAR(g[0], oracle::psi_constant_derivative(q), 1e-4) << q;
    }
}

TEST(GradPsi, WeightedConvention) {
    // At a constant path every weighted component equals the level-0
    // derivative: the second cascade level has derivative half the first.
    const double q = 0.6;
    const auto g0 = grad_psi_j(DyadicVector(0, {q}), 1e-5);
    EXPECT_NEAR(g0[0], oracle::psi_constant_derivative(q), 1e-4);
    for (int j = 1; j <= 2; ++j) {
        const auto g = grad_psi_j(DyadicVector(j, std::vector<double>(std::size_t{1} << j, q)), 1e-5);
        for (double x : g.entries) EXPECT_NEAR(x, g0[0], 1e-4) << j;
    }
}

TEST(GradPsi, RangeAndOrder) {
    std::mt19937_64 eng(6);
    for (int j = 0; j <= 2; ++j) {
        for (int i = 0; i < 8; ++i) {
            const auto q = random_cone_point(eng, j, 0.5);
            const auto g = grad_psi_j(q, 1e-4);
            for (std::size_t k = 0; k < g.size(); ++k) {
                EXPECT_GE(g[k], -1e-4);
                EXPECT_LE(g[k], 1.0 + 1e-4);
                if (k) {
                    EXPECT_GE(g[k], g[k - 1] - 1e-4);
                }
            }
        }
    }
}

TEST(GradPsi, Validation) {
    EXPECT_THROW(grad_psi_j(DyadicVector(1, {0.5, 0.2}), 1e-4), ValidationError);
    EXPECT_THROW(grad_psi_j(DyadicVector(0, {0.5}), 0.0), ValidationError);
}

TEST(Residual, ZeroVelocity) {
    const auto sk = MixedPSpinModel::sk();
    const DyadicVector q(1, {0.2, 0.5});
    const double r = subsolution_residual(sk, StepPath::zero(), 1, 0.3, q, 1e-4);
    const auto g = grad_psi_j(q, 1e-4);
    EXPECT_NEAR(r, -0.5 * (sk.xi(g[0]) + sk.xi(g[1])), 1e-12);
    EXPECT_LE(r, 0.0);
}

TEST(Residual, RandomBatch) {
    std::mt19937_64 eng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int j = 0; j <= 2; ++j) {
        for (int i = 0; i < 6; ++i) {
            const auto q = random_cone_point(eng, j, 0.3);
            const auto p = random_cone_point(eng, j, 0.8);
            const double t = 0.05 + u(eng);
            EXPECT_LE(subsolution_residual(kMixed, lift_path(p), j, t, q, 1e-4), 1e-4);
        }
    }
}

TEST(Residual, YoungEquality) {
    const auto sk = MixedPSpinModel::sk();
    for (double g : {0.0, 0.3, 0.8, 1.0}) {
        const double p = sk.xi_prime(g);
        EXPECT_NEAR(g * p - sk.xi_star(p) - sk.xi(g), 0.0, 1e-11);
    }
}

TEST(ConeGridTest, Enumeration) {
    const ConeGrid g(1, 0.5, 2.0);
    // Nondecreasing pairs from {0, ..., 4}: C(6, 2) = 15.
    EXPECT_EQ(g.size(), 15u);
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_TRUE(g.point(i).is_monotone_nonnegative());
        for (std::size_t m = 0; m < g.dim(); ++m) {
            const auto f = g.forward(i, m);
            if (f != ConeGrid::npos) {
                EXPECT_EQ(g.backward(f, m), i);
            }
        }
    }
    EXPECT_THROW(ConeGrid(1, 0.3, 1.0), ValidationError);
    EXPECT_THROW(ConeGrid(5, 0.1, 1.0), ValidationError);
}

TEST(FdSolve, ConstantInit) {
    const auto sk = MixedPSpinModel::sk();
    const ConeGrid g(1, 0.1, 1.0);
    const std::vector<double> init(g.size(), 0.7);
    const auto sol = fd_solve(sk, g, init, 0.2, 0.0125);
    EXPECT_EQ(sol.slices.front(), init);
    for (const auto& s : sol.slices) {
        for (double v : s) EXPECT_EQ(v, 0.7);
    }
}

TEST(FdSolve, AffineInit) {
    const auto sk = MixedPSpinModel::sk();
    const ConeGrid g(1, 0.1, 2.0);
    const DyadicVector c(1, {0.3, 0.8});
    const auto init = g.sample([&](const DyadicVector& q) { return inner(c, q); });
    const double T = 0.25;
    const auto sol = fd_solve(sk, g, init, T, 0.0125);
    const double H = h_j(sk, c);
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_NEAR(sol.final_slice()[i], init[i] + T * H, 1e-12);
    }
}

TEST(FdSolve, Monotone) {
    const auto sk = MixedPSpinModel::sk();
    const ConeGrid g(1, 0.1, 1.5);
    const auto init = g.sample([](const DyadicVector& q) { return psi_j(q); });
    std::mt19937_64 eng(8);
    std::uniform_real_distribution<double> u(0.0, 0.05);
    auto raised = init;
    for (auto& x : raised) x += u(eng);
    FdOptions opt;
    opt.cap_slopes = frozen_cap_slopes(g, init);
    const auto a = fd_solve(sk, g, init, 0.2, 0.0125, opt);
    const auto b = fd_solve(sk, g, raised, 0.2, 0.0125, opt);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_GE(b.final_slice()[i], a.final_slice()[i] - 1e-14);
}

TEST(FdSolve, CflGuard) {
    const ConeGrid g(0, 0.1, 1.0);
    const std::vector<double> init(g.size(), 0.0);
    EXPECT_THROW(fd_solve(MixedPSpinModel::sk(), g, init, 0.2, 0.05), NumericalError);
    EXPECT_NO_THROW(fd_solve(MixedPSpinModel::sk(), g, init, 0.2, 0.025));
}

TEST(FdSolve, CsvDump) {
    const ConeGrid g(0, 0.5, 1.0);
    const std::vector<double> init{0.0, 1.0, 2.0};
    FdOptions opt;
    const auto sol = fd_solve(MixedPSpinModel::sk(), g, init, 0.125, 0.125, opt);
    std::ostringstream os;
    write_fd_csv(os, g, sol);
    const std::string s = os.str();
    EXPECT_EQ(s.substr(0, s.find('\n')), "t,q1,value");
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1 + 2 * 3);
}
