#pragma once

// Finite-N enriched free energy by exact enumeration of spin configurations,
// averaged over disorder and sampled cascades.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "spinhj/cascade.hpp"
#include "spinhj/cone.hpp"
#include "spinhj/error.hpp"
#include "spinhj/model.hpp"
#include "spinhj/random.hpp"

namespace spinhj {

inline constexpr int kDefaultMaxSpins = 14;
inline constexpr double kMaxTensorEntries = 1e7;

/// In-place Walsh-Hadamard transform: h(x) = sum_S c_S (-1)^{|S & x|}.
inline void walsh_hadamard(std::vector<double>& h) {
    for (std::size_t len = 1; len < h.size(); len <<= 1) {
        for (std::size_t i = 0; i < h.size(); i += len << 1) {
            for (std::size_t j = i; j < i + len; ++j) {
                const double a = h[j], b = h[j + len];
                h[j] = a + b;
                h[j + len] = a - b;
            }
        }
    }
}

/// One draw of the disorder: i.i.d. standard normal tensors g^{(p)} of shape
/// N^p, giving
///   H_N(sigma) = sum_p beta_p N^{-(p-1)/2} sum g_{i_1..i_p} sigma_{i_1} ... sigma_{i_p}
/// with covariance N xi(sigma^1 . sigma^2 / N).
struct DisorderSample {
    int N = 0;
    std::uint64_t seed = 0;
    std::vector<int> degrees;
    std::vector<std::vector<double>> tensors;  // row-major, index i_1 most significant

    /// Walsh coefficients c_S with H(sigma) = sum_S c_S prod_{i in S} sigma_i.
    /// A monomial only depends on the set of indices appearing an odd number
    /// of times.
    std::vector<double> walsh_coefficients(const MixedPSpinModel& model) const {
        const std::size_t configs = std::size_t{1} << N;
        std::vector<double> c(configs, 0.0);
        for (std::size_t d = 0; d < degrees.size(); ++d) {
            const int p = degrees[d];
            double beta2 = 0.0;
            for (const auto& [deg, b2] : model.coeffs()) {
                if (deg == p) beta2 = b2;
            }
            const double scale = std::sqrt(beta2) * std::pow(static_cast<double>(N), -(p - 1) / 2.0);
            const auto& g = tensors[d];
            std::vector<int> idx(static_cast<std::size_t>(p), 0);
            for (std::size_t flat = 0; flat < g.size(); ++flat) {
                std::size_t mask = 0;
                for (int i : idx) mask ^= std::size_t{1} << i;
                c[mask] += scale * g[flat];
                for (int pos = p - 1; pos >= 0; --pos) {
                    if (++idx[static_cast<std::size_t>(pos)] < N) break;
                    idx[static_cast<std::size_t>(pos)] = 0;
                }
            }
        }
        return c;
    }

    /// H_N(sigma) for every configuration. Configuration x encodes
    /// sigma_i = -1 iff bit i of x is set.
    std::vector<double> energies(const MixedPSpinModel& model) const {
        auto h = walsh_coefficients(model);
        walsh_hadamard(h);
        return h;
    }
};

inline double spin_value(std::size_t config, int i) noexcept { return (config >> i) & 1u ? -1.0 : 1.0; }

inline void check_size_guards(const MixedPSpinModel& model, int N, int max_spins = kDefaultMaxSpins) {
    if (N < 1) throw ValidationError("system size N must be at least 1", "/N");
    if (N > max_spins) {
        throw NumericalError("N = " + std::to_string(N) + " exceeds the exact-enumeration limit " +
                             std::to_string(max_spins));
    }
    for (const auto& [p, c] : model.coeffs()) {
        if (std::pow(static_cast<double>(N), p) > kMaxTensorEntries) {
            throw NumericalError("degree " + std::to_string(p) + " tensor has more than 1e7 entries at N = " +
                                 std::to_string(N));
        }
    }
}

inline DisorderSample sample_hamiltonian(const MixedPSpinModel& model, int N, std::uint64_t seed,
                                         int max_spins = kDefaultMaxSpins) {
    check_size_guards(model, N, max_spins);
    DisorderSample out;
    out.N = N;
    out.seed = seed;
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const auto& [p, c] : model.coeffs()) {
        out.degrees.push_back(p);
        std::vector<double> g(static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(N), p))));
        for (auto& x : g) x = normal(eng);
        out.tensors.push_back(std::move(g));
    }
    return out;
}

struct FreeEnergyMc {
    std::size_t replicas = 200;
    std::size_t K = 1000;
    std::uint64_t seed = 0;
};

namespace detail {

/// log sum_sigma 2^{-N} exp(a(sigma) + sigma . w) with a given on all configs.
inline double log_partition(std::span<const double> base, std::span<const double> w, std::vector<double>& work) {
    const std::size_t configs = base.size();
    const int N = static_cast<int>(w.size());
    work.resize(configs);
    double total = 0.0;
    for (double x : w) total += x;
    work[0] = total;
    for (std::size_t x = 1; x < configs; ++x) {
        const int low = std::countr_zero(x);
        work[x] = work[x & (x - 1)] - 2.0 * w[static_cast<std::size_t>(low)];
    }
    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < configs; ++x) {
        work[x] += base[x];
        shift = std::max(shift, work[x]);
    }
    double sum = 0.0;
    for (std::size_t x = 0; x < configs; ++x) sum += std::exp(work[x] - shift);
    return shift + std::log(sum) - N * std::numbers::ln2;
}

/// One joint disorder x cascade replica of
///   -(1/N) log sum_alpha v_alpha sum_sigma 2^{-N} exp(H^{t,mu}_N(sigma, alpha)).
/// The sigma-independent part of H_N (the mean over configurations, a
/// centered Gaussian shift) enters the replica value linearly with zero mean
/// and is removed exactly.
inline double free_energy_replica(const MixedPSpinModel& model, int N, double t, const StepPath& path,
                                  std::size_t K, std::uint64_t replica_seed) {
    const std::size_t configs = std::size_t{1} << N;
    std::vector<double> base(configs, 0.0);
    if (t > 0.0) {
        const auto disorder = sample_hamiltonian(model, N, derive_seed(replica_seed, 100));
        base = disorder.walsh_coefficients(model);
        base[0] = 0.0;
        walsh_hadamard(base);
        const double amp = std::sqrt(2.0 * t);
        for (auto& x : base) x *= amp;
    }
    const double shift = N * t * model.xi(1.0) + N * path.sup();
    std::vector<double> work;
    const auto levels = CascadeLevels::from_path(path);
    const double log_avg = cascade_log_average(levels, K, static_cast<std::size_t>(N), derive_seed(replica_seed, 200),
                                               [&](std::span<const double> w) { return log_partition(base, w, work); });
    return -(log_avg - shift) / N;
}

}  // namespace detail

inline void check_free_energy_args(const MixedPSpinModel& model, int N, double t, const FreeEnergyMc& mc) {
    check_size_guards(model, N);
    if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("t must be finite and nonnegative", "/t");
    if (mc.replicas < 1) throw ValidationError("need at least one replica", "/replicas");
    if (mc.K < 2) throw ValidationError("cascade truncation K must be at least 2", "/K");
}

/// Estimate of F_N(t, mu) = E[-(1/N) log iint exp H^{t,mu}_N dP_N dR].
inline McEstimate free_energy(const MixedPSpinModel& model, int N, double t, const StepPath& path,
                              const FreeEnergyMc& mc) {
    check_free_energy_args(model, N, t, mc);
    RunningStats stats;
    for (std::size_t r = 0; r < mc.replicas; ++r) {
        stats.add(detail::free_energy_replica(model, N, t, path, mc.K, derive_seed(mc.seed, r)));
    }
    return stats.estimate(mc.seed);
}

/// Paired estimate of F_N(t, mu) - F_N(t, mu') with common random numbers;
/// both paths should share a cut grid so the sampled trees coincide.
inline McEstimate free_energy_difference(const MixedPSpinModel& model, int N, double t, const StepPath& mu,
                                         const StepPath& mu2, const FreeEnergyMc& mc) {
    check_free_energy_args(model, N, t, mc);
    RunningStats stats;
    for (std::size_t r = 0; r < mc.replicas; ++r) {
        const auto seed = derive_seed(mc.seed, r);
        stats.add(detail::free_energy_replica(model, N, t, mu, mc.K, seed) -
                  detail::free_energy_replica(model, N, t, mu2, mc.K, seed));
    }
    return stats.estimate(mc.seed);
}

/// Same as free_energy_difference but across two times at a fixed path.
inline McEstimate free_energy_time_difference(const MixedPSpinModel& model, int N, double t, double t2,
                                              const StepPath& mu, const FreeEnergyMc& mc) {
    check_free_energy_args(model, N, t, mc);
    check_free_energy_args(model, N, t2, mc);
    RunningStats stats;
    for (std::size_t r = 0; r < mc.replicas; ++r) {
        const auto seed = derive_seed(mc.seed, r);
        stats.add(detail::free_energy_replica(model, N, t, mu, mc.K, seed) -
                  detail::free_energy_replica(model, N, t2, mu, mc.K, seed));
    }
    return stats.estimate(mc.seed);
}

/// Estimates at truncation K and 2K with the same seed; the shift between
/// them monitors the truncation bias.
struct TruncationLadder {
    McEstimate at_K;
    McEstimate at_2K;
    double shift() const noexcept { return at_2K.mean - at_K.mean; }
};

inline TruncationLadder free_energy_ladder(const MixedPSpinModel& model, int N, double t, const StepPath& path,
                                           const FreeEnergyMc& mc) {
    FreeEnergyMc doubled = mc;
    doubled.K = 2 * mc.K;
    return {free_energy(model, N, t, path, mc), free_energy(model, N, t, path, doubled)};
}

/// Seed used for system size N inside free-energy tables and increments.
inline std::uint64_t size_seed(std::uint64_t seed, int N) { return derive_seed(seed, 0x5151'0000ull + N); }

/// Independent estimates of F_1..F_{n_max}; entry 0 is F_0 := 0 exactly.
inline std::vector<McEstimate> free_energy_table(const MixedPSpinModel& model, int n_max, double t,
                                                 const StepPath& path, const FreeEnergyMc& mc) {
    std::vector<McEstimate> table(static_cast<std::size_t>(n_max) + 1);
    table[0] = {0.0, 0.0, mc.replicas, mc.seed};
    for (int N = 1; N <= n_max; ++N) {
        FreeEnergyMc m = mc;
        m.seed = size_seed(mc.seed, N);
        table[static_cast<std::size_t>(N)] = free_energy(model, N, t, path, m);
    }
    return table;
}

/// A_N = (N+1) F_{N+1} - N F_N from two table entries, with independent
/// errors combined in quadrature.
inline McEstimate increment_from(const McEstimate& f_n, const McEstimate& f_next, int N) {
    McEstimate out;
    out.mean = (N + 1) * f_next.mean - N * f_n.mean;
    out.stderr = std::hypot((N + 1) * f_next.stderr, N * f_n.stderr);
    out.samples = f_next.samples;
    out.seed = f_next.seed;
    return out;
}

/// A_0 .. A_{n_max - 1} from a shared table, so that sum_{j<N} A_j = N F_N.
inline std::vector<McEstimate> increments_from_table(std::span<const McEstimate> table) {
    std::vector<McEstimate> out;
    for (std::size_t j = 0; j + 1 < table.size(); ++j) {
        out.push_back(increment_from(table[j], table[j + 1], static_cast<int>(j)));
    }
    return out;
}

/// The Aizenman-Sims-Starr increment A_N = (N+1) F_{N+1} - N F_N with F_0 := 0.
inline McEstimate ass_increment(const MixedPSpinModel& model, int N, double t, const StepPath& path,
                                const FreeEnergyMc& mc) {
    if (N < 0) throw ValidationError("N must be nonnegative", "/N");
    FreeEnergyMc next = mc;
    next.seed = size_seed(mc.seed, N + 1);
    const McEstimate f_next = free_energy(model, N + 1, t, path, next);
    McEstimate f_n{0.0, 0.0, mc.replicas, mc.seed};
    if (N > 0) {
        FreeEnergyMc here = mc;
        here.seed = size_seed(mc.seed, N);
        f_n = free_energy(model, N, t, path, here);
    }
    auto out = increment_from(f_n, f_next, N);
    out.seed = mc.seed;
    return out;
}

/// The original free energy (1/N) E log int exp H_N dP_N = -F_N(1/2, 0) + xi(1)/2.
inline McEstimate original_free_energy(const MixedPSpinModel& model, int N, const FreeEnergyMc& mc) {
    auto est = free_energy(model, N, 0.5, StepPath::zero(), mc);
    est.mean = -est.mean + 0.5 * model.xi(1.0);
    return est;
}

}  // namespace spinhj
