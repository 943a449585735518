#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "spinhj/cascade.hpp"
#include "spinhj/model.hpp"

using namespace spinhj;

namespace {

StepPath random_path(std::mt19937_64& eng, int pieces, double scale) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> inner;
    for (int k = 1; k < pieces; ++k) inner.push_back(0.05 + 0.9 * u(eng));
    std::sort(inner.begin(), inner.end());
    std::vector<double> cuts{0.0};
    for (double c : inner) {
        if (c > cuts.back() + 0.02) cuts.push_back(c);
    }
    cuts.push_back(1.0);
    std::vector<double> values;
    double v = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        v += scale * u(eng);
        values.push_back(v);
    }
    return StepPath(cuts, values);
}

}  // namespace

TEST(Cascade, ConstantLeaf) {
    std::mt19937_64 eng(1);
    for (int i = 0; i < 10; ++i) {
        const auto p = random_path(eng, 4, 1.0);
        EXPECT_NEAR(cascade_log_moment(CascadeLevels::from_path(p), Leaf::constant(0.37)), 0.37, 1e-12);
    }
}

TEST(Cascade, PsiOfZero) { EXPECT_EQ(psi(StepPath::zero()), 0.0); }

TEST(Cascade, PsiConstantPath) {
    for (double c : {0.1, 0.5}) EXPECT_NEAR(psi(StepPath::constant(c)), oracle::psi_constant(c), 1e-8) << c;
    // Wider Gaussians need more nodes; 40 still gives 1e-4 at c = 2.5.
    EXPECT_NEAR(psi(StepPath::constant(2.5)), oracle::psi_constant(2.5), 1e-4);
    const QuadratureConfig fine{150, 0.02};
    for (double c : {1.0, 2.5}) EXPECT_NEAR(psi(StepPath::constant(c), fine), oracle::psi_constant(c), 1e-8) << c;
    const auto rule = gauss_hermite(80);
    const double direct = 0.5 - rule.expect([](double z) { return log_cosh(z); });
    EXPECT_NEAR(psi(StepPath::constant(0.5)), direct, 1e-8);
}

TEST(Cascade, PsiTwoStepAgainstNestedSimpson) {
    for (auto [z, q1, q2] : {std::tuple{0.3, 0.2, 0.8}, std::tuple{0.7, 0.5, 0.6}, std::tuple{0.5, 0.0, 1.5}}) {
        const StepPath p({0.0, z, 1.0}, {q1, q2});
        EXPECT_NEAR(psi(p), oracle::psi_two_step(z, q1, q2), 2e-6);
        EXPECT_NEAR(psi(p, {150, 0.02}), oracle::psi_two_step(z, q1, q2), 1e-7);
    }
}

TEST(Cascade, LinearLeafIdentity) {
    const MixedPSpinModel models[] = {MixedPSpinModel::sk(), MixedPSpinModel({{1, 0.5}, {2, 1.0}, {3, 0.3}})};
    std::mt19937_64 eng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& m : models) {
        for (double t0 : {0.1, 0.5, 1.0}) {
            for (int i = 0; i < 5; ++i) {
                // A random cone path zeta with last value 1.
                const auto z = random_path(eng, 5, 1.0);
                std::vector<double> zv = z.values();
                for (auto& x : zv) x /= zv.back();
                const StepPath zeta(z.cuts(), zv);
                std::vector<double> var;
                for (double x : zv) var.push_back(t0 * m.theta(x));
                const StepPath levels_path(z.cuts(), var);
                const double lhs = cascade_log_moment(CascadeLevels::from_path(levels_path), Leaf::identity());
                const double integral = zeta.integrate([&](double x) { return 2.0 * t0 * m.theta(x); });
                const double rhs = 0.5 * (-integral + 2.0 * t0 * m.theta(1.0));
                EXPECT_NEAR(lhs, rhs, 1e-6);
            }
        }
    }
}

TEST(Cascade, PsiMonotoneAndLipschitz) {
    std::mt19937_64 eng(4);
    std::uniform_real_distribution<double> u(0.0, 0.5);
    for (int i = 0; i < 20; ++i) {
        const auto p = random_path(eng, 3, 0.8);
        std::vector<double> up = p.values();
        double bump = 0.0;
        for (auto& x : up) {
            bump += u(eng);
            x += bump;
        }
        const StepPath q(p.cuts(), up);
        const double a = psi(p), b = psi(q);
        EXPECT_LE(a, b + 1e-9);
        EXPECT_LE(std::abs(a - b), l1_distance(p, q) + 1e-6);
    }
}

TEST(Cascade, SampledWeightsNormalized) {
    const CascadeLevels lv{{0.0, 0.4, 0.8, 1.0}, {0.1, 0.3, 0.6}};
    for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
        const auto s = sample_rpc(lv, 20, 2, seed);
        ASSERT_EQ(s.leaves(), 400u);
        double sum = 0.0;
        for (double w : s.weights) {
            EXPECT_GE(w, 0.0);
            sum += w;
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Cascade, PoissonDirichletSecondMoment) {
    // E sum v^2 = 1 - zeta for one branching level.
    const double zeta = 0.4;
    const CascadeLevels lv{{0.0, zeta, 1.0}, {0.0, 0.0}};
    RunningStats stats;
    for (std::uint64_t r = 0; r < 4000; ++r) {
        const auto s = sample_rpc(lv, 2000, 1, derive_seed(123, r));
        double sq = 0.0;
        for (double w : s.weights) sq += w * w;
        stats.add(sq);
    }
    EXPECT_LE(std::abs(stats.mean() - (1.0 - zeta)), 3.0 * stats.stderr() + 1e-3);
}

TEST(Cascade, OverlapLawIsLumpedUniform) {
    const CascadeLevels lv{{0.0, 0.3, 0.7, 1.0}, {0.1, 0.4, 0.9}};
    std::mt19937_64 eng(8);
    std::vector<double> counts(3, 0.0);
    const int draws_per_tree = 200, trees = 300;
    for (int t = 0; t < trees; ++t) {
        const auto s = sample_rpc(lv, 200, 1, derive_seed(77, static_cast<std::uint64_t>(t)));
        std::discrete_distribution<std::size_t> pick(s.weights.begin(), s.weights.end());
        for (int d = 0; d < draws_per_tree; ++d) counts[s.common_depth(pick(eng), pick(eng))] += 1.0;
    }
    const double total = trees * draws_per_tree;
    // Overlap value q_{d+1} has probability zeta_{d+1} - zeta_d. Tree
    // replicas are strongly correlated, hence the loose tolerance.
    EXPECT_NEAR(counts[0] / total, 0.3, 0.04);
    EXPECT_NEAR(counts[1] / total, 0.4, 0.04);
    EXPECT_NEAR(counts[2] / total, 0.3, 0.04);
}

TEST(Cascade, SampledFieldCovariance) {
    // Distinct leaves share only the root, covariance 2 q_1; self covariance 2 q_2.
    const CascadeLevels lv{{0.0, 0.5, 1.0}, {0.2, 0.7}};
    RunningStats self, cross;
    for (std::uint64_t r = 0; r < 4000; ++r) {
        const auto s = sample_rpc(lv, 4, 1, derive_seed(9, r));
        self.add(s.field(0)[0] * s.field(0)[0]);
        cross.add(s.field(0)[0] * s.field(1)[0]);
    }
    EXPECT_LE(std::abs(self.mean() - 1.4), 4.0 * self.stderr());
    EXPECT_LE(std::abs(cross.mean() - 0.4), 4.0 * cross.stderr());
}

TEST(Cascade, PsiMc) {
    const auto zero = psi_mc(StepPath::zero(), 10, 5, 1);
    EXPECT_EQ(zero.mean, 0.0);
    EXPECT_EQ(zero.stderr, 0.0);
    const auto c = psi_mc(StepPath::constant(0.5), 500, 2000, 3);
    EXPECT_LE(std::abs(c.mean - psi(StepPath::constant(0.5))), 3.0 * c.stderr);
}

TEST(Cascade, SharedPrefixAcrossTruncations) {
    const CascadeLevels lv{{0.0, 0.4, 0.8, 1.0}, {0.2, 0.5, 0.7}};
    const auto a = sample_rpc(lv, 10, 1, 42);
    const auto b = sample_rpc(lv, 20, 1, 42);
    ASSERT_EQ(a.leaves(), 100u);
    // Same atoms and fields for leaves in the first 10 x 10 block.
    for (std::size_t i = 0; i < 10; ++i) {
        for (std::size_t k = 0; k < 10; ++k) {
            EXPECT_EQ(a.field(i * 10 + k)[0], b.field(i * 20 + k)[0]);
        }
    }
}

TEST(Cascade, SamplerValidation) {
    const CascadeLevels bad{{0.0, 0.5, 1.0}, {0.2, 0.7}};
    EXPECT_THROW(sample_rpc(bad, 1, 1, 0), ValidationError);
    EXPECT_THROW(sample_rpc({{0.0, 0.2, 0.4, 0.6, 0.8, 1.0}, {0.1, 0.2, 0.3, 0.4, 0.5}}, 2, 1, 0), ValidationError);
    EXPECT_THROW(sample_rpc({{0.0, 0.3, 0.6, 1.0}, {0.1, 0.2, 0.3}}, 5000, 1, 0), NumericalError);
}
