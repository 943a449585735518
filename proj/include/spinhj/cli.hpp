#pragma once

// Config-driven front end behind the spin-hj executable. Everything here is
// callable without a process boundary so the tests can drive it directly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spinhj/cascade.hpp"
#include "spinhj/cone.hpp"
#include "spinhj/error.hpp"
#include "spinhj/freeenergy.hpp"
#include "spinhj/hjfd.hpp"
#include "spinhj/hopflax.hpp"
#include "spinhj/model.hpp"
#include "spinhj/random.hpp"
#include "spinhj/verify.hpp"

namespace spinhj::cli {

using json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kValidation = 2, kNumerical = 3, kIo = 4 };

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Schemas
// ---------------------------------------------------------------------------

struct FieldSpec {
    std::string name;
    std::string type;     // number, integer, u64, bool, string, path, model, init, object
    std::string doc;
    bool required = false;
    bool rangeable = false;
};

struct CommandSpec {
    std::string name;
    std::string summary;
    std::vector<FieldSpec> fields;
};

inline const std::vector<FieldSpec>& common_fields() {
    static const std::vector<FieldSpec> f{
        {"cmd", "string", "subcommand name; must match the one on the command line"},
        {"seed", "u64", "base seed; generated and reported when absent, overridden by --seed"},
        {"model", "model", "{\"coeffs\": {\"p\": beta_p^2, ...}}; default {\"coeffs\": {\"2\": 1}}"},
    };
    return f;
}

inline const std::vector<CommandSpec>& commands() {
    static const std::vector<CommandSpec> c{
        {"xi", "xi, xi', theta and the regularized xi at r, and the conjugate xi* at s = r",
         {{"r", "number", "evaluation point", true, true}}},
        {"psi", "psi(path) by the cascade recursion; optional sampler estimate",
         {{"path", "path", "order parameter", true},
          {"nodes", "integer", "Gauss-Hermite nodes (default 40)", false, true},
          {"quad_step", "number", "interpolation grid step (default 0.05)", false, true},
          {"K", "integer", "if present, also run the sampler with K atoms per vertex", false, true},
          {"replicas", "integer", "sampler replicas (default 200)", false, true}}},
        {"fe", "enriched free energy F_N(t, path) by enumeration and Monte Carlo",
         {{"N", "integer", "system size, 1..14", true, true},
          {"t", "number", "time, >= 0", true, true},
          {"path", "path", "order parameter (default \"zero\")"},
          {"replicas", "integer", "disorder x cascade replicas (default 200)", false, true},
          {"K", "integer", "cascade atoms per vertex (default 1000)", false, true}}},
        {"ass", "increment A_N = (N+1) F_{N+1} - N F_N",
         {{"N", "integer", "system size, 0..13", true, true},
          {"t", "number", "time, >= 0", true, true},
          {"path", "path", "order parameter (default \"zero\")"},
          {"replicas", "integer", "replicas per free energy (default 200)", false, true},
          {"K", "integer", "cascade atoms per vertex (default 1000)", false, true}}},
        {"hopflax", "Hopf-Lax value f(t, mu) over dyadic step paths",
         {{"t", "number", "time, >= 0", true, true},
          {"mu", "path", "initial point (default \"zero\")"},
          {"j", "integer", "nu lives on 2^j steps (default 2)", false, true},
          {"grid_step", "number", "ladder spacing of the exhaustive backend (default 0.1)", false, true},
          {"v_max", "number", "value box (default xi'(1) + mu(1) + 1)", false, true},
          {"max_grid_points", "integer", "coarsen the ladder above this count (default 200000)", false, true},
          {"nodes", "integer", "Gauss-Hermite nodes (default 40)", false, true},
          {"quad_step", "number", "interpolation grid step (default 0.05)", false, true}}},
        {"hj", "explicit monotone scheme for the level-j equation on a cone grid",
         {{"j", "integer", "level, 0..3", true, true},
          {"h", "number", "grid step", true, true},
          {"T", "number", "final time", true, true},
          {"M", "number", "cap, a multiple of h (default xi'(1) T + domain + 1, rounded up)", false, true},
          {"domain", "number", "range of q of interest used for the default cap (default 1)", false, true},
          {"dt", "number", "time step; default the largest divisor of T within 0.9 of the CFL bound", false, true},
          {"init", "init", "\"psi\" (default), {\"constant\": c} or {\"affine\": [c_1, ...]}"},
          {"csv", "string", "file for the full space-time dump (t, q_1.., value)"},
          {"compare_hopflax", "bool", "report sup |fd - hopflax| over interior points at T (default false)"},
          {"hopflax_grid_step", "number", "grid_step of the Hopf-Lax comparison (default 0.1)", false, true},
          {"residual", "object",
           "{\"nu\": path, \"t\": number, \"points\": [[q..], ...], \"h\": number}: subsolution residuals"}}},
        {"verify", "invariant suites with measured slacks",
         {{"suite", "string", "all, model, cone, cascade, freeenergy, hopflax or hjfd (default all)"}}},
        {"sweep", "CSV sweep of the command named by \"cmd\" over its one ranged parameter", {}},
    };
    return c;
}

inline const CommandSpec* find_command(const std::string& name) {
    for (const auto& c : commands()) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

inline std::string schema_text() {
    std::ostringstream os;
    os << "Config schemas (JSON objects; unknown keys are rejected):\n"
       << "  common to all commands:\n";
    for (const auto& f : common_fields()) os << "    " << f.name << " (" << f.type << "): " << f.doc << "\n";
    os << "  path: \"zero\", a number c for the constant path, or {\"cuts\": [0, .., 1], \"values\": [..]}\n"
       << "  ranged parameter (marked ~): {\"from\": a, \"to\": b, \"step\": s} or {\"values\": [..]};\n"
       << "    exactly one range turns the run into a CSV sweep\n";
    for (const auto& c : commands()) {
        os << "\n  " << c.name << ": " << c.summary << "\n";
        if (c.name == "sweep") {
            os << "    cmd (string, required): the swept command; then that command's fields\n";
            continue;
        }
        for (const auto& f : c.fields) {
            os << "    " << f.name << (f.rangeable ? "~" : "") << " (" << f.type << (f.required ? ", required" : "")
               << "): " << f.doc << "\n";
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Typed access with JSON-path errors
// ---------------------------------------------------------------------------

class Params {
public:
    Params(const json& j, std::string base = "") : j_(j), base_(std::move(base)) {}

    std::string where(const std::string& key) const { return base_ + "/" + key; }
    bool has(const std::string& key) const { return j_.contains(key); }
    const json& raw(const std::string& key) const { return j_.at(key); }
    const json& raw_object() const {
        if (!j_.is_object()) throw ValidationError("expected an object", base_.empty() ? "/" : base_);
        return j_;
    }

    double number(const std::string& key, std::optional<double> def = std::nullopt) const {
        if (!has(key)) return fallback(key, def);
        const auto& v = j_.at(key);
        if (!v.is_number()) throw ValidationError(key + " must be a number", where(key));
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ValidationError(key + " must be finite", where(key));
        return x;
    }

    long long integer(const std::string& key, std::optional<long long> def = std::nullopt) const {
        if (!has(key)) return fallback(key, def);
        const auto& v = j_.at(key);
        if (v.is_number_integer()) return v.get<long long>();
        if (v.is_number_float()) {
            const double x = v.get<double>();
            if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9e15) return static_cast<long long>(x);
        }
        throw ValidationError(key + " must be an integer", where(key));
    }

    std::uint64_t u64(const std::string& key) const {
        const auto& v = j_.at(key);
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
        throw ValidationError(key + " must be an unsigned 64-bit integer", where(key));
    }

    bool boolean(const std::string& key, bool def) const {
        if (!has(key)) return def;
        if (!j_.at(key).is_boolean()) throw ValidationError(key + " must be true or false", where(key));
        return j_.at(key).get<bool>();
    }

    std::string string(const std::string& key, std::optional<std::string> def = std::nullopt) const {
        if (!has(key)) return fallback(key, def);
        if (!j_.at(key).is_string()) throw ValidationError(key + " must be a string", where(key));
        return j_.at(key).get<std::string>();
    }

    StepPath path(const std::string& key, std::optional<StepPath> def = std::nullopt) const {
        if (!has(key)) return fallback(key, def);
        return parse_path(j_.at(key), where(key));
    }

    static StepPath parse_path(const json& v, const std::string& at) {
        if (v.is_string()) {
            if (v.get<std::string>() == "zero") return StepPath::zero();
            throw ValidationError("a path string must be \"zero\"", at);
        }
        if (v.is_number()) {
            const double c = v.get<double>();
            if (!(c >= 0.0) || !std::isfinite(c)) throw ValidationError("constant path must be finite and >= 0", at);
            return StepPath::constant(c);
        }
        if (!v.is_object()) throw ValidationError("path must be \"zero\", a number or {cuts, values}", at);
        for (const auto& [k, x] : v.items()) {
            if (k != "cuts" && k != "values") throw ValidationError("unknown key '" + k + "'", at + "/" + k);
        }
        auto vec = [&](const char* k) {
            if (!v.contains(k)) throw ValidationError(std::string("path needs ") + k, at + "/" + k);
            const auto& a = v.at(k);
            if (!a.is_array()) throw ValidationError(std::string(k) + " must be an array", at + "/" + k);
            std::vector<double> out;
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (!a[i].is_number()) {
                    throw ValidationError("entries must be numbers", at + "/" + k + "/" + std::to_string(i));
                }
                out.push_back(a[i].get<double>());
            }
            return out;
        };
        auto cuts = vec("cuts");
        auto values = vec("values");
        try {
            return StepPath(std::move(cuts), std::move(values));
        } catch (const ValidationError& e) {
            throw ValidationError(e.what(), at + e.where());
        }
    }

    static MixedPSpinModel parse_model(const json& v, const std::string& at) {
        if (!v.is_object()) throw ValidationError("model must be an object", at);
        for (const auto& [k, x] : v.items()) {
            if (k != "coeffs") throw ValidationError("unknown key '" + k + "'", at + "/" + k);
        }
        if (!v.contains("coeffs") || !v.at("coeffs").is_object()) {
            throw ValidationError("model needs a coeffs object", at + "/coeffs");
        }
        std::map<int, double> coeffs;
        for (const auto& [k, x] : v.at("coeffs").items()) {
            const std::string here = at + "/coeffs/" + k;
            const bool digits = !k.empty() && k.size() < 4 && std::all_of(k.begin(), k.end(), [](char c) {
                return c >= '0' && c <= '9';
            });
            if (!digits || std::stoi(k) < 1) throw ValidationError("degree keys must be positive integers", here);
            if (!x.is_number()) throw ValidationError("coefficient must be a number", here);
            coeffs[std::stoi(k)] = x.get<double>();
        }
        try {
            return MixedPSpinModel(coeffs);
        } catch (const ValidationError& e) {
            throw ValidationError(e.what(), at + e.where());
        }
    }

private:
    template <typename T>
    T fallback(const std::string& key, const std::optional<T>& def) const {
        if (!def) throw ValidationError("missing required field " + key, where(key));
        return *def;
    }

    const json& j_;
    std::string base_;
};

inline json path_json(const StepPath& p) { return json{{"cuts", p.cuts()}, {"values", p.values()}}; }

inline json model_json(const MixedPSpinModel& m) {
    json c = json::object();
    for (const auto& [p, b] : m.coeffs()) c[std::to_string(p)] = b;
    return json{{"coeffs", c}};
}

inline json exact(double v, const char* method) {
    return json{{"value", v}, {"provenance", "exact"}, {"method", method}};
}

inline json estimate(const McEstimate& e, std::optional<std::size_t> K = std::nullopt) {
    json out{{"mean", e.mean}, {"stderr", e.stderr}, {"provenance", "estimate"}, {"replicas", e.samples}};
    if (K) out["K"] = *K;
    out["seed"] = e.seed;
    return out;
}

/// Nonnegative integer field with bounds, narrowed to size_t.
inline std::size_t bounded(const Params& p, const std::string& key, long long def, long long lo, long long hi) {
    const long long v = p.integer(key, def);
    if (v < lo || v > hi) {
        throw ValidationError(key + " must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]", p.where(key));
    }
    return static_cast<std::size_t>(v);
}

inline QuadratureConfig quadrature_of(const Params& p) {
    QuadratureConfig q;
    q.nodes = static_cast<int>(bounded(p, "nodes", q.nodes, 2, 200));
    q.grid_step = p.number("quad_step", q.grid_step);
    if (!(q.grid_step > 0.0)) throw ValidationError("quad_step must be positive", p.where("quad_step"));
    return q;
}

inline void check_finite(const json& value, const std::string& at = "") {
    if (value.is_object()) {
        for (const auto& [k, v] : value.items()) check_finite(v, at + "/" + k);
    } else if (value.is_array()) {
        for (std::size_t i = 0; i < value.size(); ++i) check_finite(value[i], at + "/" + std::to_string(i));
    } else if (value.is_number_float() && !std::isfinite(value.get<double>())) {
        throw NumericalError("non-finite result at " + at);
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Holds state worth reusing across the rows of a sweep: Hopf-Lax solvers
/// memoize psi on their ladders.
class Session {
public:
    json run(const std::string& cmd, const json& config, std::uint64_t seed) {
        Params p(config);
        const auto model = config.contains("model") ? Params::parse_model(config.at("model"), "/model")
                                                   : MixedPSpinModel::sk();
        json report{{"cmd", cmd}, {"seed", seed}, {"model", model_json(model)}};
        json input = json::object();
        for (const auto& [k, v] : config.items()) {
            if (k != "cmd" && k != "seed" && k != "model") input[k] = v;
        }
        report["input"] = input;
        if (cmd == "xi") report["result"] = xi(model, p);
        else if (cmd == "psi") report["result"] = psi_cmd(p, seed);
        else if (cmd == "fe") report["result"] = fe(model, p, seed);
        else if (cmd == "ass") report["result"] = ass(model, p, seed);
        else if (cmd == "hopflax") report["result"] = hopflax(model, p);
        else if (cmd == "hj") report["result"] = hj(model, p);
        else if (cmd == "verify") report["result"] = verify_cmd(model, p, seed);
        else throw ValidationError("unknown command '" + cmd + "'", "/cmd");
        check_finite(report["result"], "/result");
        return report;
    }

private:
    static json xi(const MixedPSpinModel& m, const Params& p) {
        const double r = p.number("r");
        return json{{"xi", exact(m.xi(r), "polynomial")},
                    {"xi_prime", exact(m.xi_prime(r), "polynomial")},
                    {"theta", exact(m.theta(r), "polynomial")},
                    {"xi_bar", exact(m.xi_bar(r), "polynomial")},
                    {"xi_star", exact(m.xi_star(r), "bisection")}};
    }

    static json psi_cmd(const Params& p, std::uint64_t seed) {
        const auto path = p.path("path");
        json out{{"psi", exact(psi(path, quadrature_of(p)), "quadrature")}};
        if (p.has("K")) {
            const std::size_t K = bounded(p, "K", 0, 2, 1000000);
            const std::size_t reps = bounded(p, "replicas", 200, 2, 100000000);
            out["psi_mc"] = estimate(psi_mc(path, K, reps, seed), K);
            if (path.pieces() > 1) out["psi_mc_2K"] = estimate(psi_mc(path, 2 * K, reps, seed), 2 * K);
        } else if (p.has("replicas")) {
            throw ValidationError("replicas needs K", p.where("replicas"));
        }
        return out;
    }

    static FreeEnergyMc mc_of(const Params& p, std::uint64_t seed) {
        FreeEnergyMc mc;
        mc.replicas = bounded(p, "replicas", 200, 2, 100000000);
        mc.K = bounded(p, "K", 1000, 2, 1000000);
        mc.seed = seed;
        return mc;
    }

    static json fe(const MixedPSpinModel& m, const Params& p, std::uint64_t seed) {
        const int N = static_cast<int>(bounded(p, "N", 0, 1, kDefaultMaxSpins));
        const double t = p.number("t");
        const auto path = p.path("path", StepPath::zero());
        const auto mc = mc_of(p, seed);
        json out{{"F", estimate(free_energy(m, N, t, path, mc), mc.K)}};
        // One-piece paths carry no cascade weights, so K does not enter.
        if (path.pieces() > 1) {
            FreeEnergyMc doubled = mc;
            doubled.K *= 2;
            out["F_2K"] = estimate(free_energy(m, N, t, path, doubled), doubled.K);
        }
        return out;
    }

    static json ass(const MixedPSpinModel& m, const Params& p, std::uint64_t seed) {
        const int N = static_cast<int>(bounded(p, "N", 0, 0, kDefaultMaxSpins - 1));
        const double t = p.number("t");
        const auto path = p.path("path", StepPath::zero());
        const auto mc = mc_of(p, seed);
        json out{{"A", estimate(ass_increment(m, N, t, path, mc), mc.K)}};
        if (path.pieces() > 1) {
            FreeEnergyMc doubled = mc;
            doubled.K *= 2;
            out["A_2K"] = estimate(ass_increment(m, N, t, path, doubled), doubled.K);
        }
        return out;
    }

    HopfLaxSolver& solver(const MixedPSpinModel& m, const HopfLaxOptions& opt, const QuadratureConfig& q) {
        std::ostringstream key;
        key.precision(17);
        for (const auto& [d, b] : m.coeffs()) key << d << ':' << b << ',';
        key << '|' << opt.level << '|' << opt.grid_step << '|' << opt.v_max.value_or(-1.0) << '|'
            << opt.max_grid_points << '|' << q.nodes << '|' << q.grid_step;
        auto& slot = solvers_[key.str()];
        if (!slot) slot = std::make_unique<HopfLaxSolver>(m, opt, q);
        return *slot;
    }

    json hopflax(const MixedPSpinModel& m, const Params& p) {
        const double t = p.number("t");
        const auto mu = p.path("mu", StepPath::zero());
        HopfLaxOptions opt;
        opt.level = static_cast<int>(bounded(p, "j", opt.level, 0, 6));
        opt.grid_step = p.number("grid_step", opt.grid_step);
        if (p.has("v_max")) {
            opt.v_max = p.number("v_max");
            if (!(*opt.v_max > 0.0)) throw ValidationError("v_max must be positive", p.where("v_max"));
        }
        opt.max_grid_points = bounded(p, "max_grid_points", static_cast<long long>(opt.max_grid_points), 1, 100000000);
        const auto r = solver(m, opt, quadrature_of(p)).solve(t, mu);
        json diag{{"backend", r.backend}, {"grid_step", r.grid_step}, {"v_max", r.v_max}, {"sweeps", r.sweeps},
                  {"evaluations", r.evaluations}, {"converged", r.converged}, {"touches_cap", r.touches_cap}};
        if (r.backend != "initial") {
            diag["grid_value"] = r.grid_value;
            diag["ascent_value"] = r.ascent_value;
        }
        return json{{"f", exact(r.value, "dyadic step-path optimization")},
                    {"argmax", path_json(r.argmax)},
                    {"diagnostics", diag}};
    }

    static std::vector<double> initial_values(const ConeGrid& grid, const Params& p) {
        if (!p.has("init") || (p.raw("init").is_string() && p.raw("init").get<std::string>() == "psi")) {
            return grid.sample([](const DyadicVector& q) { return psi_j(q); });
        }
        const auto& v = p.raw("init");
        const std::string at = p.where("init");
        if (!v.is_object() || v.size() != 1) {
            throw ValidationError("init must be \"psi\", {\"constant\": c} or {\"affine\": [..]}", at);
        }
        if (v.contains("constant")) {
            if (!v.at("constant").is_number()) throw ValidationError("constant must be a number", at + "/constant");
            return std::vector<double>(grid.size(), v.at("constant").get<double>());
        }
        if (v.contains("affine")) {
            const auto& a = v.at("affine");
            if (!a.is_array() || a.size() != grid.dim()) {
                throw ValidationError("affine needs " + std::to_string(grid.dim()) + " coefficients", at + "/affine");
            }
            std::vector<double> c;
            for (std::size_t k = 0; k < a.size(); ++k) {
                if (!a[k].is_number()) throw ValidationError("must be a number", at + "/affine/" + std::to_string(k));
                c.push_back(a[k].get<double>());
            }
            return grid.sample([&](const DyadicVector& q) {
                double s = 0.0;
                for (std::size_t k = 0; k < c.size(); ++k) s += c[k] * q[k];
                return s * q.weight();
            });
        }
        throw ValidationError("unknown init '" + v.begin().key() + "'", at + "/" + v.begin().key());
    }

    json hj(const MixedPSpinModel& m, const Params& p) {
        const int j = static_cast<int>(bounded(p, "j", 0, 0, 3));
        const double h = p.number("h");
        const double T = p.number("T");
        if (!(h > 0.0)) throw ValidationError("h must be positive", p.where("h"));
        if (!(T >= 0.0)) throw ValidationError("T must be nonnegative", p.where("T"));
        const double lip = m.xi_prime(1.0);
        double M;
        if (p.has("M")) {
            M = p.number("M");
        } else {
            const double domain = p.number("domain", 1.0);
            if (!(domain > 0.0)) throw ValidationError("domain must be positive", p.where("domain"));
            M = std::ceil((lip * T + domain + 1.0) / h - 1e-9) * h;
        }
        const ConeGrid grid(j, h, M);
        const double dt_max = h / (2.0 * lip * std::ldexp(1.0, j));
        double dt;
        if (p.has("dt")) {
            dt = p.number("dt");
        } else {
            const double steps = std::max(1.0, std::ceil(T / (0.9 * dt_max) - 1e-12));
            dt = T > 0.0 ? T / steps : 0.9 * dt_max;
        }
        const auto init = initial_values(grid, p);
        FdOptions opt;
        opt.keep_slices = p.has("csv");
        const auto sol = fd_solve(m, grid, init, T, dt, opt);

        json out{{"grid", json{{"j", j}, {"h", h}, {"M", M}, {"points", grid.size()}}},
                 {"scheme", json{{"dt", sol.dt},
                                 {"steps", sol.times.size() - 1},
                                 {"cfl_ratio", sol.cfl_ratio},
                                 {"max_gradient", sol.max_gradient},
                                 {"gradient_near_cap", sol.gradient_near_cap}}}};
        const auto& fin = sol.final_slice();
        out["final_min"] = exact(*std::min_element(fin.begin(), fin.end()), "finite difference");
        out["final_max"] = exact(*std::max_element(fin.begin(), fin.end()), "finite difference");

        if (p.boolean("compare_hopflax", false)) {
            HopfLaxOptions hopt;
            hopt.level = j;
            hopt.grid_step = p.number("hopflax_grid_step", 0.1);
            auto& hl = solver(m, hopt, {});
            double worst = 0.0;
            std::size_t count = 0;
            for (std::size_t i = 0; i < grid.size(); ++i) {
                if (!grid.interior(i, lip * T)) continue;
                const double f = hl.solve(T, lift_path(grid.point(i))).value;
                worst = std::max(worst, std::abs(fin[i] - f));
                ++count;
            }
            out["hopflax_sup_diff"] = exact(worst, "finite difference vs dyadic step-path optimization");
            out["interior_points"] = count;
        }

        if (p.has("residual")) out["residuals"] = residuals(m, j, Params(p.raw("residual"), p.where("residual")));

        if (p.has("csv")) {
            const std::string file = p.string("csv");
            std::ofstream os(file);
            if (!os) throw IoError("cannot open " + file + " for writing");
            write_fd_csv(os, grid, sol);
            if (!os) throw IoError("write to " + file + " failed");
            out["csv"] = file;
        }
        return out;
    }

    static json residuals(const MixedPSpinModel& m, int j, const Params& r) {
        for (const auto& [k, v] : r.raw_object().items()) {
            if (k != "nu" && k != "t" && k != "points" && k != "h") throw ValidationError("unknown key '" + k + "'", r.where(k));
        }
        const auto nu = r.path("nu");
        const double t = r.number("t");
        const double h = r.number("h", 1e-4);
        if (!(t > 0.0)) throw ValidationError("t must be positive", r.where("t"));
        if (!r.has("points") || !r.raw("points").is_array()) {
            throw ValidationError("points must be an array of cone points", r.where("points"));
        }
        const auto& pts = r.raw("points");
        const std::size_t n = std::size_t{1} << j;
        json out = json::array();
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const std::string at = r.where("points") + "/" + std::to_string(i);
            if (!pts[i].is_array() || pts[i].size() != n) {
                throw ValidationError("point needs " + std::to_string(n) + " coordinates", at);
            }
            std::vector<double> q;
            for (const auto& x : pts[i]) {
                if (!x.is_number()) throw ValidationError("coordinates must be numbers", at);
                q.push_back(x.get<double>());
            }
            DyadicVector dq(j, q);
            if (!dq.is_monotone_nonnegative()) throw ValidationError("point is not in the cone", at);
            json row = exact(subsolution_residual(m, nu, j, t, dq, h), "finite difference");
            row["q"] = q;
            out.push_back(row);
        }
        return out;
    }

    static json verify_cmd(const MixedPSpinModel& m, const Params& p, std::uint64_t seed) {
        const auto rep = verify::run(p.string("suite", "all"), m, seed);
        json checks = json::array();
        for (const auto& c : rep.checks) {
            checks.push_back(json{{"suite", c.suite}, {"name", c.name}, {"passed", c.passed},
                                  {"slack", c.slack}, {"cases", c.cases}});
        }
        return json{{"passed", rep.passed()}, {"checks", checks}};
    }

    std::map<std::string, std::unique_ptr<HopfLaxSolver>> solvers_;
};

// ---------------------------------------------------------------------------
// Ranges, sweeps and the process-level entry point
// ---------------------------------------------------------------------------

inline bool is_range(const json& v) { return v.is_object() && (v.contains("from") || v.contains("values")); }

inline std::vector<json> expand_range(const json& v, const FieldSpec& f) {
    const std::string at = "/" + f.name;
    std::vector<json> out;
    if (v.contains("values")) {
        if (v.size() != 1) throw ValidationError("a values range takes no other keys", at);
        const auto& a = v.at("values");
        if (!a.is_array()) throw ValidationError("values must be an array", at + "/values");
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (!a[i].is_number()) throw ValidationError("range entries must be numbers", at + "/values/" + std::to_string(i));
            out.push_back(a[i]);
        }
    } else {
        for (const auto& [k, x] : v.items()) {
            if (k != "from" && k != "to" && k != "step") throw ValidationError("unknown range key '" + k + "'", at + "/" + k);
            if (!x.is_number()) throw ValidationError("range bounds must be numbers", at + "/" + k);
        }
        if (!v.contains("to")) throw ValidationError("range needs to", at + "/to");
        const double from = v.at("from").get<double>(), to = v.at("to").get<double>();
        const double step = v.contains("step") ? v.at("step").get<double>() : 1.0;
        if (!(step > 0.0) || !std::isfinite(from) || !std::isfinite(to)) {
            throw ValidationError("range step must be positive and bounds finite", at + "/step");
        }
        if (to >= from) {
            const auto n = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
            if (n > 1000000) throw ValidationError("range has more than 1e6 values", at);
            for (std::size_t i = 0; i < n; ++i) {
                const double x = from + static_cast<double>(i) * step;
                if (f.type == "integer") out.push_back(static_cast<long long>(std::llround(x)));
                else out.push_back(x);
            }
        }
    }
    if (out.empty()) throw ValidationError("range is empty", at);
    return out;
}

inline void flatten(const json& v, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
    if (v.is_object() && !v.empty()) {
        for (const auto& [k, x] : v.items()) flatten(x, prefix.empty() ? k : prefix + "." + k, out);
        return;
    }
    std::string cell;
    if (v.is_string()) cell = v.get<std::string>();
    else cell = v.dump();  // shortest round-trip form for numbers
    if (cell.find_first_of(",\"\n") != std::string::npos) {
        std::string q = "\"";
        for (char c : cell) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        cell = q + "\"";
    }
    out.emplace_back(prefix, cell);
}

struct Outcome {
    int code = kOk;
    std::string body;     // JSON report, CSV table, or JSON error document
    bool csv = false;
};

inline std::uint64_t fresh_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

/// Validates `config` for subcommand `sub` and runs it. Throws the library
/// error types; `main` maps them to exit codes.
inline Outcome execute(const std::string& sub, const json& config, std::optional<std::uint64_t> seed_override,
                       Session& session) {
    if (!config.is_object()) throw ValidationError("config must be a JSON object", "/");
    std::string cmd = sub;
    if (sub == "sweep") {
        if (!config.contains("cmd") || !config.at("cmd").is_string()) {
            throw ValidationError("sweep needs cmd naming the swept command", "/cmd");
        }
        cmd = config.at("cmd").get<std::string>();
        if (cmd == "sweep" || !find_command(cmd)) throw ValidationError("unknown command '" + cmd + "'", "/cmd");
    } else if (config.contains("cmd") && config.at("cmd") != sub) {
        throw ValidationError("config cmd does not match subcommand " + sub, "/cmd");
    }
    const CommandSpec& spec = *find_command(cmd);

    auto lookup = [&](const std::string& key) -> const FieldSpec* {
        for (const auto& f : common_fields()) if (f.name == key) return &f;
        for (const auto& f : spec.fields) if (f.name == key) return &f;
        return nullptr;
    };
    const FieldSpec* ranged = nullptr;
    for (const auto& [k, v] : config.items()) {
        const FieldSpec* f = lookup(k);
        if (!f) throw ValidationError("unknown key '" + k + "' for " + cmd, "/" + k);
        if ((f->type == "number" || f->type == "integer") && is_range(v)) {
            if (!f->rangeable) throw ValidationError(k + " cannot be ranged", "/" + k);
            if (ranged) throw ValidationError("only one parameter may carry a range", "/" + k);
            ranged = f;
        }
    }
    for (const auto& f : spec.fields) {
        if (f.required && !config.contains(f.name)) throw ValidationError("missing required field " + f.name, "/" + f.name);
    }
    if (sub == "sweep" && !ranged) throw ValidationError("sweep needs exactly one ranged parameter", "/");

    std::uint64_t seed;
    if (seed_override) seed = *seed_override;
    else if (config.contains("seed")) seed = Params(config).u64("seed");
    else seed = fresh_seed();

    Outcome out;
    if (!ranged) {
        const auto report = session.run(cmd, config, seed);
        out.body = report.dump(2) + "\n";
        if (cmd == "verify" && !report["result"]["passed"].get<bool>()) out.code = kVerifyFailed;
        return out;
    }

    const auto values = expand_range(config.at(ranged->name), *ranged);
    std::vector<std::string> columns{ranged->name, "seed"};
    std::vector<std::map<std::string, std::string>> rows;
    for (std::size_t i = 0; i < values.size(); ++i) {
        json row_cfg = config;
        row_cfg[ranged->name] = values[i];
        const std::uint64_t row_seed = derive_seed(seed, i);
        const auto report = session.run(cmd, row_cfg, row_seed);
        std::vector<std::pair<std::string, std::string>> cells;
        flatten(values[i], ranged->name, cells);
        cells.emplace_back("seed", std::to_string(row_seed));
        flatten(report["result"], "", cells);
        std::map<std::string, std::string> row;
        for (const auto& [k, c] : cells) {
            if (std::find(columns.begin(), columns.end(), k) == columns.end()) columns.push_back(k);
            row[k] = c;
        }
        rows.push_back(std::move(row));
    }
    std::ostringstream os;
    for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
    os << "\n";
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const auto it = row.find(columns[c]);
            os << (c ? "," : "") << (it == row.end() ? "" : it->second);
        }
        os << "\n";
    }
    out.body = os.str();
    out.csv = true;
    return out;
}

inline std::string error_document(const char* kind, const std::string& message, const std::string& path, int code) {
    json err{{"kind", kind}, {"message", message}};
    if (!path.empty()) err["path"] = path;
    err["exit_code"] = code;
    return json{{"error", err}}.dump(2) + "\n";
}

inline json read_config(const std::string& file) {
    std::ifstream is(file);
    if (!is) throw IoError("cannot read config " + file);
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what(), "/");
    }
}

/// Runs one subcommand on a config file and writes the result. Returns the
/// process exit code; error documents go to `out`, a summary line to `err`.
inline int run_file(const std::string& sub, const std::string& config_file, const std::optional<std::string>& out_file,
                    std::optional<std::uint64_t> seed, std::ostream& out, std::ostream& err) {
    auto fail = [&](const char* kind, const std::string& msg, const std::string& path, int code) {
        out << error_document(kind, msg, path, code);
        err << "spin-hj: " << kind << " error: " << msg << (path.empty() ? "" : " at " + path) << "\n";
        return code;
    };
    try {
        Session session;
        const auto result = execute(sub, read_config(config_file), seed, session);
        if (out_file) {
            std::ofstream os(*out_file, std::ios::binary);
            if (!os) throw IoError("cannot open " + *out_file + " for writing");
            os << result.body;
            if (!os) throw IoError("write to " + *out_file + " failed");
        } else {
            out << result.body;
        }
        return result.code;
    } catch (const ValidationError& e) {
        return fail("validation", e.what(), e.where(), kValidation);
    } catch (const NumericalError& e) {
        return fail("numerical", e.what(), "", kNumerical);
    } catch (const IoError& e) {
        return fail("io", e.what(), "", kIo);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), "", kNumerical);
    }
}

}  // namespace spinhj::cli
