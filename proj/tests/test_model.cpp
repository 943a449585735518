#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "spinhj/error.hpp"
#include "spinhj/model.hpp"

using spinhj::MixedPSpinModel;

namespace {

MixedPSpinModel mixed() { return MixedPSpinModel({{1, 0.5}, {2, 1.0}, {3, 0.3}}); }

}  // namespace

TEST(Model, XiEvaluation) {
    EXPECT_DOUBLE_EQ(MixedPSpinModel::sk().xi(0.5), 0.25);
    EXPECT_EQ(mixed().xi(0.0), 0.0);
    EXPECT_DOUBLE_EQ(MixedPSpinModel({{1, 1.0}, {2, 1.0}}).xi(1.0), 2.0);
}

TEST(Model, XiPrime) {
    const auto sk = MixedPSpinModel::sk();
    EXPECT_DOUBLE_EQ(sk.xi_prime(0.5), 1.0);
    EXPECT_DOUBLE_EQ(mixed().xi_prime(0.0), 0.5);
    for (const auto& m : {sk, mixed()}) {
        for (double r = 0.0; r <= 1.0 + 1e-12; r += 0.05) {
            const double h = 1e-6;
            const double fd = (m.xi(r + h) - m.xi(r - h)) / (2 * h);
            EXPECT_NEAR(m.xi_prime(r), fd, 1e-6);
        }
    }
}

TEST(Model, Theta) {
    const auto sk = MixedPSpinModel::sk();
    EXPECT_DOUBLE_EQ(sk.theta(1.0), 1.0);
    EXPECT_EQ(mixed().theta(0.0), 0.0);
    for (const auto& m : {sk, mixed()}) {
        for (int i = 0; i <= 10; ++i) {
            const double r = 0.1 * i;
            EXPECT_NEAR(m.theta(r), m.xi_star(m.xi_prime(r)), 1e-9) << r;
        }
    }
}

TEST(Model, XiStarExamples) {
    const auto sk = MixedPSpinModel::sk();
    EXPECT_NEAR(sk.xi_star(2.0), 1.0, 1e-11);
    EXPECT_EQ(mixed().xi_star(0.0), 0.0);
    EXPECT_EQ(sk.xi_star(0.0), 0.0);
    EXPECT_EQ(sk.xi_star(-1.0), 0.0);
    // Nothing below the linear coefficient.
    EXPECT_EQ(mixed().xi_star(0.4), 0.0);
}

TEST(Model, XiStarAgainstSearch) {
    for (const auto& m : {MixedPSpinModel::sk(), mixed(), MixedPSpinModel::pure(3, 0.7)}) {
        for (double s : {0.1, 0.6, 1.3, 2.5, 4.0, 7.5}) {
            EXPECT_NEAR(m.xi_star(s), oracle::xi_star(m, s), 1e-9) << s;
        }
    }
}

TEST(Model, XiStarShape) {
    const auto m = mixed();
    const double h = 0.01;
    double prev = m.xi_star(-1.0);
    for (double s = -1.0 + h; s < 6.0; s += h) {
        const double cur = m.xi_star(s);
        EXPECT_GE(cur, 0.0);
        EXPECT_GE(cur, prev - 1e-12);
        const double second = m.xi_star(s + h) - 2 * cur + m.xi_star(s - h);
        EXPECT_GE(second, -1e-9) << s;
        prev = cur;
    }
}

TEST(Model, PureLinearXiStarIsBounded) {
    const auto m = MixedPSpinModel::pure(1, 1.0);
    EXPECT_EQ(m.xi_star(0.9), 0.0);
    EXPECT_TRUE(std::isfinite(m.xi_star(2.0)));
}

TEST(Model, XiBar) {
    const auto sk = MixedPSpinModel::sk();
    EXPECT_DOUBLE_EQ(sk.xi_bar(0.5), 0.25);
    EXPECT_DOUBLE_EQ(sk.xi_bar(2.0), 3.0);
    EXPECT_EQ(sk.xi_bar(-1.0), 0.0);
}

TEST(Model, XiBarLipschitzAndConvex) {
    std::mt19937_64 eng(7);
    std::uniform_real_distribution<double> u(-3.0, 4.0);
    for (const auto& m : {MixedPSpinModel::sk(), mixed()}) {
        const double L = m.xi_bar_lipschitz();
        for (int i = 0; i < 2000; ++i) {
            const double a = u(eng), b = u(eng), c = u(eng);
            EXPECT_LE(std::abs(m.xi_bar(a) - m.xi_bar(b)), L * std::abs(a - b) + 1e-12);
            EXPECT_GE(0.5 * (m.xi_bar(a) + m.xi_bar(c)) - m.xi_bar(0.5 * (a + c)), -1e-12);
        }
    }
}

TEST(Model, Validation) {
    EXPECT_THROW(MixedPSpinModel({}), spinhj::ValidationError);
    EXPECT_THROW(MixedPSpinModel({{2, 0.0}}), spinhj::ValidationError);
    EXPECT_THROW(MixedPSpinModel({{0, 1.0}}), spinhj::ValidationError);
    EXPECT_THROW(MixedPSpinModel({{2, -1.0}}), spinhj::ValidationError);
    const MixedPSpinModel m({{1, 0.0}, {2, 1.0}});
    EXPECT_EQ(m.coeffs().size(), 1u);
}
