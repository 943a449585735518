#pragma once

// Ruelle probability cascades with finitely many levels: the backward
// Gaussian-smoothing recursion for E log <exp leaf(w)>, the functional psi,
// and a truncated Poisson-Dirichlet sampler used as a stochastic oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "spinhj/cone.hpp"
#include "spinhj/error.hpp"
#include "spinhj/quadrature.hpp"
#include "spinhj/random.hpp"

namespace spinhj {

/// Discrete cascade parameters: cuts 0 = zeta_0 < ... < zeta_n = 1 and
/// variance ladder 0 <= q_1 <= ... <= q_n. Two leaves whose common ancestor
/// sits at depth d (d = 0 is the root) carry field covariance 2 q_{d+1}.
struct CascadeLevels {
    std::vector<double> cuts;
    std::vector<double> values;

    static CascadeLevels from_path(const StepPath& p) { return {p.cuts(), p.values()}; }

    std::size_t pieces() const noexcept { return values.size(); }
    double increment(std::size_t k) const noexcept { return values[k] - (k ? values[k - 1] : 0.0); }
};

/// Numerically stable log cosh.
inline double log_cosh(double x) noexcept {
    const double a = std::abs(x);
    return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

/// Leaf function of the recursion together with its asymptotic slopes, used
/// for affine extrapolation off the interpolation grid.
struct Leaf {
    std::function<double(double)> fn;
    double slope_lo = 0.0;
    double slope_hi = 0.0;

    static Leaf log_cosh() { return {[](double x) { return spinhj::log_cosh(x); }, -1.0, 1.0}; }
    static Leaf identity() { return {[](double x) { return x; }, 1.0, 1.0}; }
    static Leaf constant(double c) { return {[c](double) { return c; }, 0.0, 0.0}; }
};

struct QuadratureConfig {
    int nodes = 40;
    double grid_step = 0.05;
};

namespace detail {

inline const GaussianRule& cached_rule(int nodes) {
    static thread_local std::vector<GaussianRule> cache(201);
    auto& rule = cache.at(static_cast<std::size_t>(nodes));
    if (rule.size() == 0) rule = gauss_hermite(nodes);
    return rule;
}

/// (1 / zeta) log E exp(zeta X(x + sigma Z)) with a max shift.
template <typename Fn>
double smoothing_step(const GaussianRule& rule, Fn&& X, double x, double zeta, double sigma) {
    double shift = -std::numeric_limits<double>::infinity();
    thread_local std::vector<double> buf;
    buf.resize(rule.size());
    for (std::size_t i = 0; i < rule.size(); ++i) {
        buf[i] = zeta * X(x + sigma * rule.nodes[i]);
        shift = std::max(shift, buf[i]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) sum += rule.weights[i] * std::exp(buf[i] - shift);
    return (shift + std::log(sum)) / zeta;
}

}  // namespace detail

/// E log <exp leaf(w)> for the cascade field w, by the backward recursion
///   X_n = leaf,
///   X_{k-1}(x) = zeta_{k-1}^{-1} log E exp(zeta_{k-1} X_k(x + Z sqrt(2 (q_k - q_{k-1})))),
///   X_0 = E X_1(Z sqrt(2 q_1)).
/// Intermediate X_k live on a uniform grid over [-X_MAX, X_MAX],
/// X_MAX = 8 + 4 sqrt(2 q_n), with grid points at multiples of the step.
inline double cascade_log_moment(const CascadeLevels& levels, const Leaf& leaf, const QuadratureConfig& quad = {}) {
    const std::size_t n = levels.pieces();
    if (n == 0) throw ValidationError("cascade needs at least one level");
    const GaussianRule& rule = detail::cached_rule(quad.nodes);

    const double x_max = 8.0 + 4.0 * std::sqrt(2.0 * levels.values.back());
    const auto half = static_cast<std::size_t>(std::ceil(x_max / quad.grid_step));
    const double x0 = -static_cast<double>(half) * quad.grid_step;
    const std::size_t grid_size = 2 * half + 1;

    std::function<double(double)> current = leaf.fn;
    ClampedSpline spline(0.0, 1.0, {0.0, 0.0}, 0.0, 0.0);
    std::vector<double> table(grid_size);
    for (std::size_t k = n; k >= 2; --k) {
        // Zero increments still go through the grid so that the value is
        // continuous as an increment opens up from 0.
        const double var = levels.increment(k - 1);
        const double sigma = std::sqrt(2.0 * var);
        const double zeta = levels.cuts[k - 1];
        for (std::size_t i = 0; i < grid_size; ++i) {
            const double x = x0 + static_cast<double>(i) * quad.grid_step;
            table[i] = detail::smoothing_step(rule, current, x, zeta, sigma);
        }
        spline = ClampedSpline(x0, quad.grid_step, table, leaf.slope_lo, leaf.slope_hi);
        current = [&spline](double x) { return spline(x); };
    }
    const double sigma0 = std::sqrt(2.0 * levels.values.front());
    const double out = rule.expect([&](double z) { return current(sigma0 * z); });
    if (!std::isfinite(out)) throw NumericalError("cascade recursion produced a non-finite value");
    return out;
}

/// psi(mu) = -E log <cosh w^mu(alpha)> + mu(1).
inline double psi(const StepPath& path, const QuadratureConfig& quad = {}) {
    return -cascade_log_moment(CascadeLevels::from_path(path), Leaf::log_cosh(), quad) + path.sup();
}

// ---------------------------------------------------------------------------
// Truncated Poisson-Dirichlet sampler.
//
// Pieces n give a tree with n - 1 branching levels. The root carries a shared
// Gaussian vector of variance 2 q_1 per coordinate; a vertex at depth d - 1
// has K children whose atoms are the K largest points of a Poisson process
// with intensity zeta_d x^{-zeta_d - 1} dx, and each child adds a Gaussian
// increment of variance 2 (q_{d+1} - q_d). Leaf weights are the normalized
// products of atoms along the path.
//
// Every vertex owns counter-derived streams, so the first K children of a
// vertex are identical whether the tree is truncated at K or at 2K.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxCascadePieces = 4;
inline constexpr double kMaxCascadeLeaves = 1e8;

namespace detail {

inline void validate_sampler(const CascadeLevels& levels, std::size_t K, std::size_t dim) {
    if (K < 2) throw ValidationError("cascade truncation K must be at least 2", "/K");
    if (dim < 1) throw ValidationError("field dimension must be positive", "/dim");
    if (levels.pieces() == 0 || levels.pieces() > kMaxCascadePieces) {
        throw ValidationError("sampled cascades support 1 to " + std::to_string(kMaxCascadePieces) + " steps",
                              "/path/values");
    }
    for (std::size_t k = 1; k + 1 < levels.cuts.size(); ++k) {
        const double z = levels.cuts[k];
        if (!(z > 0.0 && z < 1.0)) {
            throw ValidationError("inner cascade cuts must lie in (0, 1)", "/path/cuts/" + std::to_string(k));
        }
    }
    const double leaves = std::pow(static_cast<double>(K), static_cast<double>(levels.pieces() - 1));
    if (leaves > kMaxCascadeLeaves) throw NumericalError("cascade has too many leaves for desk-scale sampling");
}

/// Logs of the K largest atoms of PPP(zeta x^{-zeta-1}): -log(Gamma_m) / zeta
/// for Poisson arrival times Gamma_1 < Gamma_2 < ...
inline void sample_log_atoms(std::uint64_t vertex_seed, double zeta, std::size_t K, std::vector<double>& out) {
    std::mt19937_64 eng(derive_seed(vertex_seed, 1));
    std::exponential_distribution<double> expo(1.0);
    out.resize(K);
    double arrival = 0.0;
    for (std::size_t m = 0; m < K; ++m) {
        arrival += expo(eng);
        out[m] = -std::log(arrival) / zeta;
    }
}

inline double log_sum_exp(std::span<const double> v) {
    double shift = -std::numeric_limits<double>::infinity();
    for (double x : v) shift = std::max(shift, x);
    if (!std::isfinite(shift)) return shift;
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - shift);
    return shift + std::log(sum);
}

/// Returns (log numerator, log denominator) for the subtree below a vertex
/// at `depth` whose accumulated field is `field`.
template <typename LeafLog>
std::pair<double, double> aggregate(const CascadeLevels& levels, std::size_t K, std::size_t dim,
                                    std::uint64_t vertex_seed, std::size_t depth, std::vector<double>& field,
                                    LeafLog& leaf_log) {
    const std::size_t branching = levels.pieces() - 1;
    if (depth == branching) return {leaf_log(std::span<const double>(field)), 0.0};

    const double zeta = levels.cuts[depth + 1];
    const double sigma = std::sqrt(2.0 * levels.increment(depth + 1));
    std::vector<double> log_atoms;
    sample_log_atoms(vertex_seed, zeta, K, log_atoms);

    std::mt19937_64 inc_eng(derive_seed(vertex_seed, 2));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> num(K), den(K), child_field(dim);
    for (std::size_t c = 0; c < K; ++c) {
        for (std::size_t i = 0; i < dim; ++i) child_field[i] = field[i] + sigma * normal(inc_eng);
        const auto [ln, ld] =
            aggregate(levels, K, dim, derive_seed(vertex_seed, 16 + c), depth + 1, child_field, leaf_log);
        num[c] = log_atoms[c] + ln;
        den[c] = log_atoms[c] + ld;
    }
    return {log_sum_exp(num), log_sum_exp(den)};
}

inline std::vector<double> root_field(const CascadeLevels& levels, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 eng(derive_seed(seed, 3));
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sigma = std::sqrt(2.0 * levels.values.front());
    std::vector<double> field(dim);
    for (auto& x : field) x = sigma * normal(eng);
    return field;
}

}  // namespace detail

/// log sum_alpha v_alpha exp(leaf_log(w(alpha))) for one sampled cascade,
/// aggregated depth-first in log space without materializing leaves.
template <typename LeafLog>
double cascade_log_average(const CascadeLevels& levels, std::size_t K, std::size_t dim, std::uint64_t seed,
                           LeafLog&& leaf_log) {
    detail::validate_sampler(levels, K, dim);
    auto field = detail::root_field(levels, dim, seed);
    const auto [ln, ld] = detail::aggregate(levels, K, dim, seed, 0, field, leaf_log);
    const double out = ln - ld;
    if (!std::isfinite(out)) throw NumericalError("cascade average is not finite");
    return out;
}

/// A materialized cascade sample.
struct SampledCascade {
    std::size_t K = 0;
    std::size_t dim = 0;
    std::size_t depth = 0;  // branching levels, pieces - 1
    std::uint64_t seed = 0;
    std::vector<double> weights;              // one per leaf, sums to 1
    std::vector<double> fields;               // leaf-major, dim entries per leaf
    std::vector<std::uint32_t> ancestry;      // leaf-major, child index at each depth

    std::size_t leaves() const noexcept { return weights.size(); }
    std::span<const double> field(std::size_t leaf) const { return {fields.data() + leaf * dim, dim}; }

    /// Depth of the deepest common ancestor of two leaves (depth for a leaf
    /// with itself).
    std::size_t common_depth(std::size_t a, std::size_t b) const {
        std::size_t d = 0;
        while (d < depth && ancestry[a * depth + d] == ancestry[b * depth + d]) ++d;
        return d;
    }
};

inline constexpr double kMaxMaterializedEntries = 2e7;

inline SampledCascade sample_rpc(const CascadeLevels& levels, std::size_t K, std::size_t dim, std::uint64_t seed) {
    detail::validate_sampler(levels, K, dim);
    const std::size_t depth = levels.pieces() - 1;
    const double leaves = std::pow(static_cast<double>(K), static_cast<double>(depth));
    if (leaves * static_cast<double>(dim + depth + 1) > kMaxMaterializedEntries) {
        throw NumericalError("cascade too large to materialize; use cascade_log_average");
    }
    SampledCascade out;
    out.K = K;
    out.dim = dim;
    out.depth = depth;
    out.seed = seed;

    std::vector<double> log_w;
    std::vector<std::uint32_t> path(depth);
    std::vector<double> field = detail::root_field(levels, dim, seed);

    // Same vertex seeds and stream order as detail::aggregate.
    std::function<void(std::uint64_t, std::size_t, double)> visit = [&](std::uint64_t vseed, std::size_t d,
                                                                          double log_weight) {
        if (d == depth) {
            log_w.push_back(log_weight);
            out.fields.insert(out.fields.end(), field.begin(), field.end());
            out.ancestry.insert(out.ancestry.end(), path.begin(), path.end());
            return;
        }
        const double zeta = levels.cuts[d + 1];
        const double sigma = std::sqrt(2.0 * levels.increment(d + 1));
        std::vector<double> log_atoms;
        detail::sample_log_atoms(vseed, zeta, K, log_atoms);
        std::mt19937_64 inc_eng(derive_seed(vseed, 2));
        std::normal_distribution<double> normal(0.0, 1.0);
        const std::vector<double> saved = field;
        for (std::size_t c = 0; c < K; ++c) {
            for (std::size_t i = 0; i < dim; ++i) field[i] = saved[i] + sigma * normal(inc_eng);
            path[d] = static_cast<std::uint32_t>(c);
            visit(derive_seed(vseed, 16 + c), d + 1, log_weight + log_atoms[c]);
        }
        field = saved;
    };
    visit(seed, 0, 0.0);

    const double norm = detail::log_sum_exp(log_w);
    out.weights.resize(log_w.size());
    for (std::size_t i = 0; i < log_w.size(); ++i) out.weights[i] = std::exp(log_w[i] - norm);
    return out;
}

/// Monte Carlo psi: replica mean of -log sum_alpha v_alpha cosh(w(alpha)) + mu(1).
/// Biased by the truncation at K atoms per vertex.
inline McEstimate psi_mc(const StepPath& path, std::size_t K, std::size_t replicas, std::uint64_t seed) {
    if (replicas < 1) throw ValidationError("need at least one replica", "/replicas");
    const auto levels = CascadeLevels::from_path(path);
    RunningStats stats;
    for (std::size_t r = 0; r < replicas; ++r) {
        const double la = cascade_log_average(levels, K, 1, derive_seed(seed, r),
                                              [](std::span<const double> w) { return log_cosh(w[0]); });
        stats.add(-la + path.sup());
    }
    return stats.estimate(seed);
}

}  // namespace spinhj
