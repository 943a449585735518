#pragma once

// Step functions on [0, 1), the cone of nondecreasing nonnegative step paths,
// and the dyadic projection/lift pair between L^2([0,1)) and R^{2^j}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spinhj/error.hpp"

namespace spinhj {

/// A right-continuous step function on [0, 1): value `values[k]` on
/// [cuts[k], cuts[k+1]). Cuts are strictly increasing from 0 to 1.
class StepFunction {
public:
    StepFunction(std::vector<double> cuts, std::vector<double> values)
        : cuts_(std::move(cuts)), values_(std::move(values)) {
        validate_grid();
    }

    static StepFunction constant(double c) { return StepFunction({0.0, 1.0}, {c}); }

    const std::vector<double>& cuts() const noexcept { return cuts_; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t pieces() const noexcept { return values_.size(); }
    double width(std::size_t k) const noexcept { return cuts_[k + 1] - cuts_[k]; }

    double operator()(double s) const {
        if (!(s >= 0.0 && s < 1.0)) {
            throw ValidationError("step functions are evaluated on [0, 1), got s = " + std::to_string(s));
        }
        const auto it = std::upper_bound(cuts_.begin(), cuts_.end(), s);
        return values_[static_cast<std::size_t>(it - cuts_.begin()) - 1];
    }

    /// Integral of fn(value) over [0, 1).
    template <typename Fn>
    double integrate(Fn&& fn) const {
        double sum = 0.0;
        for (std::size_t k = 0; k < pieces(); ++k) sum += width(k) * fn(values_[k]);
        return sum;
    }

    bool is_monotone_nonnegative() const noexcept {
        if (values_.front() < 0.0) return false;
        for (std::size_t k = 1; k < values_.size(); ++k) {
            if (values_[k] < values_[k - 1]) return false;
        }
        return true;
    }

    friend bool operator==(const StepFunction&, const StepFunction&) = default;

private:
    void validate_grid() const {
        if (cuts_.size() < 2) throw ValidationError("cuts need at least the endpoints 0 and 1", "/cuts");
        if (values_.size() + 1 != cuts_.size()) {
            throw ValidationError("need exactly one value per interval (cuts.size() - 1)", "/values");
        }
        if (cuts_.front() != 0.0) throw ValidationError("first cut must be 0", "/cuts/0");
        if (cuts_.back() != 1.0) {
            throw ValidationError("last cut must be 1", "/cuts/" + std::to_string(cuts_.size() - 1));
        }
        for (std::size_t k = 1; k < cuts_.size(); ++k) {
            if (!(cuts_[k] > cuts_[k - 1])) {
                throw ValidationError("cuts must be strictly increasing", "/cuts/" + std::to_string(k));
            }
        }
        for (std::size_t k = 0; k < values_.size(); ++k) {
            if (!std::isfinite(values_[k])) {
                throw ValidationError("values must be finite", "/values/" + std::to_string(k));
            }
        }
    }

    std::vector<double> cuts_;
    std::vector<double> values_;
};

/// An element of the cone C restricted to finitely many steps: a
/// nondecreasing, nonnegative step function.
class StepPath {
public:
    StepPath(std::vector<double> cuts, std::vector<double> values)
        : StepPath(StepFunction(std::move(cuts), std::move(values))) {}

    explicit StepPath(StepFunction f) : f_(std::move(f)) {
        const auto& v = f_.values();
        if (v.front() < 0.0) throw ValidationError("path values must be nonnegative", "/values/0");
        for (std::size_t k = 1; k < v.size(); ++k) {
            if (v[k] < v[k - 1]) {
                throw ValidationError("path values must be nondecreasing", "/values/" + std::to_string(k));
            }
        }
    }

    static StepPath zero() { return constant(0.0); }
    static StepPath constant(double c) { return StepPath({0.0, 1.0}, {c}); }

    const StepFunction& function() const noexcept { return f_; }
    operator const StepFunction&() const noexcept { return f_; }

    const std::vector<double>& cuts() const noexcept { return f_.cuts(); }
    const std::vector<double>& values() const noexcept { return f_.values(); }
    std::size_t pieces() const noexcept { return f_.pieces(); }
    double operator()(double s) const { return f_(s); }

    /// mu(1) = lim_{s -> 1} mu(s), the last step value.
    double sup() const noexcept { return f_.values().back(); }

    template <typename Fn>
    double integrate(Fn&& fn) const {
        return f_.integrate(std::forward<Fn>(fn));
    }

    /// Same path with adjacent equal values merged into one step.
    StepPath simplified() const {
        std::vector<double> cuts{0.0};
        std::vector<double> values{f_.values().front()};
        for (std::size_t k = 1; k < pieces(); ++k) {
            if (f_.values()[k] != values.back()) {
                cuts.push_back(f_.cuts()[k]);
                values.push_back(f_.values()[k]);
            }
        }
        cuts.push_back(1.0);
        return StepPath(std::move(cuts), std::move(values));
    }

    friend bool operator==(const StepPath&, const StepPath&) = default;

private:
    StepFunction f_;
};

inline double path_eval(const StepFunction& f, double s) { return f(s); }
inline double path_sup(const StepPath& p) { return p.sup(); }

/// An element of H^j = R^{2^j} with <a, b> = sum_k 2^{-j} a_k b_k.
struct DyadicVector {
    int level = 0;
    std::vector<double> entries;

    DyadicVector() : entries(1, 0.0) {}
    DyadicVector(int j, std::vector<double> e) : level(j), entries(std::move(e)) {
        if (j < 0 || j > 30) throw ValidationError("dyadic level out of range", "/j");
        if (entries.size() != (std::size_t{1} << j)) {
            throw ValidationError("dyadic vector at level " + std::to_string(j) + " needs " +
                                  std::to_string(std::size_t{1} << j) + " entries");
        }
    }

    std::size_t size() const noexcept { return entries.size(); }
    double weight() const noexcept { return std::ldexp(1.0, -level); }
    double operator[](std::size_t k) const { return entries[k]; }
    double& operator[](std::size_t k) { return entries[k]; }

    bool is_monotone_nonnegative() const noexcept {
        if (entries.front() < 0.0) return false;
        for (std::size_t k = 1; k < entries.size(); ++k) {
            if (entries[k] < entries[k - 1]) return false;
        }
        return true;
    }

    friend bool operator==(const DyadicVector&, const DyadicVector&) = default;
};

inline double inner(const DyadicVector& a, const DyadicVector& b) {
    if (a.level != b.level) throw ValidationError("inner product of vectors at different levels");
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) sum += a[k] * b[k];
    return sum * a.weight();
}

/// Sorted union of the two cut grids.
inline std::vector<double> merge_cuts(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

/// Pointwise op(a(s), b(s)) on the merged grid.
template <typename Op>
StepFunction combine(const StepFunction& a, const StepFunction& b, Op&& op) {
    auto cuts = merge_cuts(a.cuts(), b.cuts());
    std::vector<double> values;
    values.reserve(cuts.size() - 1);
    std::size_t ia = 0, ib = 0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        while (a.cuts()[ia + 1] <= cuts[k]) ++ia;
        while (b.cuts()[ib + 1] <= cuts[k]) ++ib;
        values.push_back(op(a.values()[ia], b.values()[ib]));
    }
    return StepFunction(std::move(cuts), std::move(values));
}

/// Integral over [0, 1) of fn(a(s), b(s)), computed on the merged grid.
template <typename Fn>
double integrate_pair(const StepFunction& a, const StepFunction& b, Fn&& fn) {
    const auto cuts = merge_cuts(a.cuts(), b.cuts());
    double sum = 0.0;
    std::size_t ia = 0, ib = 0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        while (a.cuts()[ia + 1] <= cuts[k]) ++ia;
        while (b.cuts()[ib + 1] <= cuts[k]) ++ib;
        sum += (cuts[k + 1] - cuts[k]) * fn(a.values()[ia], b.values()[ib]);
    }
    return sum;
}

/// scale * nu + mu; stays in the cone for scale >= 0.
inline StepPath scaled_sum(double scale, const StepPath& nu, const StepPath& mu) {
    if (scale < 0.0) throw ValidationError("negative scale leaves the cone");
    return StepPath(combine(nu, mu, [scale](double x, double y) { return scale * x + y; }));
}

/// p_j: exact averages over the dyadic intervals [(k-1) 2^-j, k 2^-j).
inline DyadicVector project(const StepFunction& f, int j) {
    if (j < 0 || j > 30) throw ValidationError("dyadic level out of range", "/j");
    const std::size_t n = std::size_t{1} << j;
    const double scale = std::ldexp(1.0, j);
    std::vector<double> out(n, 0.0);
    std::size_t piece = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double lo = std::ldexp(static_cast<double>(k), -j);
        const double hi = std::ldexp(static_cast<double>(k + 1), -j);
        while (f.cuts()[piece + 1] <= lo) ++piece;
        double acc = 0.0;
        for (std::size_t p = piece; p < f.pieces() && f.cuts()[p] < hi; ++p) {
            const double a = std::max(lo, f.cuts()[p]);
            const double b = std::min(hi, f.cuts()[p + 1]);
            acc += (b - a) * f.values()[p];
        }
        out[k] = acc * scale;
    }
    return DyadicVector(j, std::move(out));
}

/// l_j: the step function with dyadic cuts and the entries as values.
inline StepFunction lift(const DyadicVector& v) {
    const std::size_t n = v.size();
    std::vector<double> cuts(n + 1);
    for (std::size_t k = 0; k <= n; ++k) cuts[k] = std::ldexp(static_cast<double>(k), -v.level);
    return StepFunction(std::move(cuts), v.entries);
}

/// l_j restricted to the cone; throws when entries are not nondecreasing and
/// nonnegative.
inline StepPath lift_path(const DyadicVector& v) { return StepPath(lift(v)); }

struct PairNorms {
    double l1_distance = 0.0;
    double l2_norm = 0.0;  // of the first argument
    double inner = 0.0;
};

inline PairNorms norms(const StepFunction& a, const StepFunction& b) {
    PairNorms out;
    out.l1_distance = integrate_pair(a, b, [](double x, double y) { return std::abs(x - y); });
    out.inner = integrate_pair(a, b, [](double x, double y) { return x * y; });
    out.l2_norm = std::sqrt(a.integrate([](double x) { return x * x; }));
    return out;
}

inline double l1_distance(const StepFunction& a, const StepFunction& b) {
    return integrate_pair(a, b, [](double x, double y) { return std::abs(x - y); });
}

inline double l2_norm(const StepFunction& a) {
    return std::sqrt(a.integrate([](double x) { return x * x; }));
}

/// Membership in the dual cone (C^j)*: every tail sum sum_{k >= m} v_k is
/// nonnegative (up to `tol`). Nondecreasing nonnegative vectors are
/// nonnegative combinations of tail indicators, which gives this test.
inline bool dual_cone_test(const DyadicVector& v, double tol = 1e-12) {
    double tail = 0.0;
    for (std::size_t k = v.size(); k-- > 0;) {
        tail += v[k];
        if (tail < -tol) return false;
    }
    return true;
}

struct ProjectionBound {
    double lhs = 0.0;  // |mu - mu^(j)|_{L^1}
    double rhs = 0.0;  // 2^{(3-j)/2} |mu|_{L^2}
    bool holds = false;
};

inline ProjectionBound verify_projection_bound(const StepPath& p, int j) {
    ProjectionBound out;
    const auto approx = lift(project(p, j));
    out.lhs = l1_distance(p, approx);
    out.rhs = std::pow(2.0, (3.0 - j) / 2.0) * l2_norm(p);
    out.holds = out.lhs <= out.rhs;
    return out;
}

/// Weighted least-squares projection onto nondecreasing sequences
/// (pool adjacent violators).
inline std::vector<double> isotonic_regression(std::span<const double> y, std::span<const double> w) {
    if (y.size() != w.size()) throw ValidationError("isotonic regression: size mismatch");
    struct Block {
        double mean;
        double weight;
        std::size_t count;
    };
    std::vector<Block> blocks;
    blocks.reserve(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        blocks.push_back({y[i], w[i], 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
            const Block top = blocks.back();
            blocks.pop_back();
            Block& prev = blocks.back();
            const double weight = prev.weight + top.weight;
            prev.mean = (prev.mean * prev.weight + top.mean * top.weight) / weight;
            prev.weight = weight;
            prev.count += top.count;
        }
    }
    std::vector<double> out;
    out.reserve(y.size());
    for (const auto& b : blocks) out.insert(out.end(), b.count, b.mean);
    return out;
}

inline std::vector<double> isotonic_regression(std::span<const double> y) {
    const std::vector<double> w(y.size(), 1.0);
    return isotonic_regression(y, w);
}

/// Projection onto the cone in R^n: isotonic regression then clamping at 0.
/// Clamping preserves monotonicity and is the exact Euclidean projection
/// onto {0 <= x_1 <= ... <= x_n}.
inline std::vector<double> project_monotone_nonnegative(std::span<const double> y) {
    auto out = isotonic_regression(y);
    for (auto& x : out) x = std::max(x, 0.0);
    return out;
}

}  // namespace spinhj
