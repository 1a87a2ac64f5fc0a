#include "rspde/cli_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "rspde/heat_kernel.hpp"
#include "rspde/obstacle.hpp"
#include "rspde/skeleton.hpp"
#include "rspde/spde.hpp"

#ifndef RSPDE_VERSION
#define RSPDE_VERSION "0.0.0"
#endif

namespace rspde {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* const kCommands[] = {"kernel-suite", "obstacle", "skeleton", "simulate",
                                 "rate",         "condition-a", "condition-b", "ldp-scan"};

std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

const json* member(const json& j, const std::string& key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

double get_number(const json& j, const std::string& key, const std::string& path, double fallback) {
    const json* v = member(j, key);
    if (!v) return fallback;
    if (!v->is_number()) throw ConfigError(join(path, key), "expected a number");
    const double d = v->get<double>();
    if (!std::isfinite(d)) throw ConfigError(join(path, key), "must be finite");
    return d;
}

std::size_t get_count(const json& j, const std::string& key, const std::string& path, std::size_t fallback) {
    const json* v = member(j, key);
    if (!v) return fallback;
    if (!v->is_number_unsigned()) throw ConfigError(join(path, key), "expected a nonnegative integer");
    return v->get<std::size_t>();
}

std::string get_string(const json& j, const std::string& key, const std::string& path, const std::string& fallback) {
    const json* v = member(j, key);
    if (!v) return fallback;
    if (!v->is_string()) throw ConfigError(join(path, key), "expected a string");
    return v->get<std::string>();
}

std::vector<double> get_list(const json& j, const std::string& key, const std::string& path,
                             const std::vector<double>& fallback) {
    const json* v = member(j, key);
    if (!v) return fallback;
    if (!v->is_array()) throw ConfigError(join(path, key), "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : *v) {
        if (!e.is_number() || !std::isfinite(e.get<double>())) throw ConfigError(join(path, key), "expected finite numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

const json& get_object(const json& j, const std::string& key, const std::string& path) {
    static const json empty = json::object();
    const json* v = member(j, key);
    if (!v) return empty;
    if (!v->is_object()) throw ConfigError(join(path, key), "expected an object");
    return *v;
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError(join(path, key), "unknown field");
    }
}

Coefficients coefficients_of(const RunConfig& c) {
    return Coefficients::with_sufficient_constants(c.drift, c.diffusion, c.r);
}

std::vector<double> initial_of(const RunConfig& c) {
    if (c.initial.kind == "values") return c.initial.values;
    if (c.initial.kind == "zero") return std::vector<double>(c.grid.nx + 1, 0.0);
    const double a = c.initial.amplitude;
    return sample_initial(c.grid, [a](double x) { return a * x * std::exp(-0.5 * x * x); });
}

Control control_of(const RunConfig& c) {
    const auto& s = c.control;
    if (s.kind == "zero") return Control(c.grid);
    if (s.kind == "lattice") {
        Control g(c.grid);
        std::copy(s.values.begin(), s.values.end(), g.values().begin());
        return g;
    }
    if (s.kind == "coarse") {
        const ControlBasis basis(c.grid, c.rate.nt_coarse, c.rate.nx_coarse, std::min(c.rate.x_max, c.grid.L));
        return basis.expand(s.values);
    }
    if (s.kind == "oscillatory") {
        PerturbationFamily fam{PerturbationFamily::Kind::oscillatory, s.amplitude, s.support, 0.0};
        return perturbed_control(Control(c.grid), fam, s.n);
    }
    return Control::from_function(c.grid, [&](double t, double x) {
        return s.amplitude * std::exp(-s.decay * x) * (1.0 + s.growth * t);
    });
}

Field obstacle_of(const RunConfig& c) {
    Field v(c.grid);
    const auto& o = c.obstacle;
    for (std::size_t i = 0; i <= c.grid.nt; ++i) {
        const double t = c.grid.t(i);
        for (std::size_t j = 1; j <= c.grid.nx; ++j) {
            const double x = c.grid.x(j);
            v(i, j) = o.kind == "bump" ? o.amplitude * t * std::max(0.0, 1.0 - std::abs(x - o.center) / o.width)
                                       : -o.amplitude * x * std::exp(-x);
        }
    }
    return v;
}

std::optional<Stepper> stepper_of(const RunConfig& c) {
    if (c.stepper == "explicit") return Stepper::explicit_projection;
    if (c.stepper == "implicit") return Stepper::implicit_lcp;
    return std::nullopt;
}

json echo_of(const RunConfig& c) {
    json j;
    j["command"] = c.command;
    j["grid"] = {{"T", c.grid.T}, {"L", c.grid.L}, {"nt", c.grid.nt}, {"nx", c.grid.nx}};
    j["coefficients"] = {
        {"drift",
         {{"kind", c.drift.kind == DriftFamily::Kind::affine ? "affine" : "saturating"}, {"a", c.drift.a}, {"b", c.drift.b}}},
        {"diffusion", {{"R", c.diffusion.R}, {"delta", c.diffusion.delta}, {"c", c.diffusion.c}, {"d", c.diffusion.d}}},
        {"r", c.r}};
    j["initial"] = {{"kind", c.initial.kind}, {"amplitude", c.initial.amplitude}};
    if (c.initial.kind == "values") j["initial"]["values"] = c.initial.values;
    j["control"] = {{"kind", c.control.kind}, {"amplitude", c.control.amplitude}, {"decay", c.control.decay},
                    {"growth", c.control.growth}, {"n", c.control.n}, {"support", c.control.support}};
    if (c.control.kind == "lattice" || c.control.kind == "coarse") j["control"]["values"] = c.control.values;
    j["epsilons"] = c.epsilons;
    j["n_paths"] = c.n_paths;
    j["seed"] = c.master_seed;
    j["out"] = c.out_dir;
    j["p"] = c.p;
    j["obstacle"] = {{"kind", c.obstacle.kind}, {"amplitude", c.obstacle.amplitude}, {"center", c.obstacle.center},
                     {"width", c.obstacle.width}};
    j["stepper"] = c.stepper;
    j["reference_csv"] = c.reference_csv;
    j["N"] = c.N;
    j["n_list"] = c.n_list;
    j["family"] = {{"kind", c.family.kind == PerturbationFamily::Kind::oscillatory ? "oscillatory" : "scaled"},
                   {"amplitude", c.family.amplitude}, {"support", c.family.support}, {"growth", c.family.growth}};
    j["ps"] = c.ps;
    j["rate"] = {{"nt_coarse", c.rate.nt_coarse}, {"nx_coarse", c.rate.nx_coarse}, {"x_max", c.rate.x_max},
                 {"schedule", c.rate.schedule}, {"iterations_per_stage", c.rate.iterations_per_stage},
                 {"gap_threshold", c.rate.gap_threshold}};
    j["event"] = {{"threshold", c.event.threshold}};
    if (c.event.node) j["event"]["node"] = {c.event.node->first, c.event.node->second};
    j["min_hits"] = c.min_hits;
    j["oracle_tolerance"] = c.oracle_tolerance;
    return j;
}

void validate_for_command(const RunConfig& c) {
    try {
        coefficients_of(c);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("coefficients", e.what());
    }
    try {
        validate_initial(c.grid, initial_of(c));
    } catch (const std::invalid_argument& e) {
        throw ConfigError("initial", e.what());
    }
    if (c.r < 0.0) {
        // A growing weight only makes sense when the data has died out before the truncation at L.
        const auto u0 = initial_of(c);
        const double peak = *std::max_element(u0.begin(), u0.end());
        double tail = 0.0;
        for (std::size_t j = (9 * c.grid.nx) / 10; j <= c.grid.nx; ++j) tail = std::max(tail, u0[j]);
        if (tail > 1e-3 * peak) throw ConfigError("initial", "r < 0 needs initial data that decays before x = L");
    }
    const std::string& cmd = c.command;
    const bool stochastic = cmd == "simulate" || cmd == "condition-b" || cmd == "ldp-scan";
    if (stochastic && !c.grid.explicit_stable) throw ConfigError("grid", "explicit stepping needs dt <= dx^2/2");
    if (stochastic && !(c.diffusion.delta > 0.0)) throw ConfigError("coefficients.diffusion.delta", "must be > 0");
    if (cmd == "kernel-suite" && !(c.p > 4.0)) throw ConfigError("p", "must be > 4");
    if (cmd == "obstacle" || cmd == "skeleton") {
        if (c.stepper == "explicit" && !c.grid.explicit_stable) {
            throw ConfigError("stepper", "explicit stepping needs dt <= dx^2/2");
        }
    }
    if (stochastic) {
        if (c.epsilons.empty()) throw ConfigError("epsilons", "must not be empty");
        for (double e : c.epsilons) {
            if (e < 0.0 || (e == 0.0 && cmd != "simulate")) throw ConfigError("epsilons", "out of range");
        }
        if (c.n_paths == 0) throw ConfigError("n_paths", "must be positive");
    }
    if (cmd == "condition-b") {
        if (c.epsilons.size() < 2) throw ConfigError("epsilons", "need at least two values");
        for (std::size_t k = 1; k < c.epsilons.size(); ++k) {
            if (!(c.epsilons[k] < c.epsilons[k - 1])) throw ConfigError("epsilons", "must decrease strictly");
        }
        if (c.n_paths < 2) throw ConfigError("n_paths", "need at least two paths");
        for (double p : c.ps) {
            if (!(p >= 1.0)) throw ConfigError("ps", "must be >= 1");
        }
    }
    if (cmd == "condition-a" || cmd == "condition-b" || cmd == "rate") {
        if (!(c.N > 0.0)) throw ConfigError("N", "must be positive");
        if (cm_norm(control_of(c)) > c.N) throw ConfigError("control", "outside S_N");
    }
    if (cmd == "condition-a") {
        if (c.n_list.size() < 2) throw ConfigError("n_list", "need at least two indices");
        for (std::size_t k = 0; k < c.n_list.size(); ++k) {
            if (!(c.n_list[k] > 0.0) || (k > 0 && !(c.n_list[k] > c.n_list[k - 1]))) {
                throw ConfigError("n_list", "must be positive and increasing");
            }
        }
        if (c.family.kind == PerturbationFamily::Kind::oscillatory && c.family.growth > 0.0 && c.family.amplitude != 0.0) {
            throw ConfigError("family.growth", "perturbation norms grow without bound");
        }
    }
    if (cmd == "rate") {
        if (c.rate.schedule.empty()) throw ConfigError("rate.schedule", "must not be empty");
        for (double l : c.rate.schedule) {
            if (!(l > 0.0)) throw ConfigError("rate.schedule", "penalty weights must be positive");
        }
        if (c.rate.nt_coarse < 2 || c.rate.nx_coarse < 2) throw ConfigError("rate", "need at least 2 x 2 coarse nodes");
        if (!(c.rate.x_max > 0.0)) throw ConfigError("rate.x_max", "must be positive");
    }
    if (cmd == "ldp-scan" && !(c.event.threshold >= 0.0)) throw ConfigError("event.threshold", "must be >= 0");
}

// Output directory session: lock file, artifact inventory, manifest.
class Session {
public:
    explicit Session(const std::string& dir) : dir_(dir) {
        fs::create_directories(dir_);
        lock_ = dir_ / ".lock";
        std::FILE* f = std::fopen(lock_.c_str(), "wx");
        if (!f) throw std::runtime_error("output directory " + dir + " is locked by another run");
        std::fclose(f);
        fs::remove(dir_ / "manifest.json");
    }
    ~Session() {
        std::error_code ec;
        fs::remove(lock_, ec);
    }
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    void write(const std::string& name, const std::string& content, std::vector<OutputFile>& inventory) const {
        std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
        out << content;
        if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
        inventory.push_back({name, content.size(), sha256_hex(content)});
    }

    void write_manifest(const RunManifest& m) const {
        std::ofstream out(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
        out << m.to_json();
    }

private:
    fs::path dir_;
    fs::path lock_;
};

std::string num17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void add(RunManifest& m, std::string name, bool passed, std::string detail) {
    m.verdicts.push_back({std::move(name), passed, std::move(detail)});
}

// ------------------------------------------------------------------ suites

void kernel_suite(const RunConfig& c, const Session& s, RunManifest& m) {
    const auto rep = estimate_suite(c.p, c.r, c.grid, c.threads);
    s.write("estimates.csv", rep.to_csv(), m.outputs);
    const std::pair<const char*, double> tol[] = {{"i", 0.15}, {"ii", 0.15}, {"iii", 0.2}};
    for (const auto& [q, t] : tol) {
        const auto& f = rep.fit(q);
        add(m, std::string("slope_") + q, std::abs(f.fitted_slope - f.expected_exponent) <= t,
            "fitted_slope=" + num(f.fitted_slope) + " expected=" + num(f.expected_exponent) +
                " constant=" + num(f.fitted_constant));
    }
    const auto& l1 = rep.fit("l1");
    add(m, "l1_bound", std::isfinite(l1.fitted_constant), "constant=" + num(l1.fitted_constant));
}

void obstacle_suite(const RunConfig& c, const Session& s, RunManifest& m) {
    ObstacleOptions opt;
    opt.stepper = stepper_of(c).value_or(c.grid.explicit_stable ? Stepper::explicit_projection : Stepper::implicit_lcp);
    const Field v = obstacle_of(c);
    const auto sol = solve_obstacle({c.grid, v, WeightParams{c.r}}, opt);
    s.write("z.csv", field_to_csv(sol.z, "z"), m.outputs);
    s.write("eta.csv", sol.eta.to_csv(), m.outputs);
    double below = 0.0;
    for (std::size_t k = 0; k < sol.z.values().size(); ++k) below = std::max(below, v.values()[k] - sol.z.values()[k]);
    add(m, "above_obstacle", below <= 1e-12, "max violation=" + num(below));
    add(m, "measure_nonnegative", sol.eta.mass.min_value() >= 0.0, "min mass=" + num(sol.eta.mass.min_value()));
    const double scale = std::max(1.0, weighted_sup_norm(v, WeightParams{0.0})) * std::max(sol.eta.total_mass(), 1e-300);
    const double res = std::abs(complementarity_residual(sol.z, v, sol.eta)) / scale;
    add(m, "complementarity", res < 1e-8, "scaled residual=" + num(res));
}

void skeleton_suite(const RunConfig& c, const Session& s, RunManifest& m) {
    const auto coeffs = coefficients_of(c);
    const Control g = control_of(c);
    SkeletonOptions opt;
    opt.stepper = stepper_of(c);
    s.write("control.csv", control_to_csv(g), m.outputs);
    try {
        const auto sol = solve_skeleton(g, initial_of(c), coeffs, opt);
        s.write("u.csv", field_to_csv(sol.u, "u"), m.outputs);
        s.write("eta.csv", sol.eta.to_csv(), m.outputs);
        s.write("convergence.json", sol.convergence_json(), m.outputs);
        add(m, "converged", true, "iterates=" + std::to_string(sol.iterates) + " final_gap=" + num(sol.final_gap));
        add(m, "nonnegative", sol.u.min_value() >= 0.0, "min=" + num(sol.u.min_value()));
    } catch (const NonConvergence& e) {
        add(m, "converged", false, e.what());
    }
}

void simulate_suite(const RunConfig& c, const Session& s, RunManifest& m) {
    const auto coeffs = coefficients_of(c);
    const auto u0 = initial_of(c);
    const Control g = control_of(c);
    const bool controlled = c.control.kind != "zero";
    Field reference = fd_reference(g, u0, coeffs).u;
    if (!c.reference_csv.empty()) {
        std::ifstream in(c.reference_csv, std::ios::binary);
        if (!in) throw ConfigError("reference_csv", "cannot open " + c.reference_csv);
        std::stringstream ss;
        ss << in.rdbuf();
        reference = field_from_csv(c.grid, ss.str());
    } else {
        s.write("reference.csv", field_to_csv(reference, "u"), m.outputs);
    }
    const WeightParams w{c.r};
    std::string moments = "epsilon,p,mean,std_error,n\n";
    json summary = {{"master_seed", c.master_seed}, {"n_paths", c.n_paths}, {"r", c.r}, {"moments", json::array()}};
    for (std::size_t e = 0; e < c.epsilons.size(); ++e) {
        const double eps = c.epsilons[e];
        const auto fields = run_paths(c.n_paths, c.master_seed, c.threads, eps, coeffs, u0, c.grid,
                                      controlled ? &g : nullptr, [](std::size_t, const SpdePath& p) { return p.u; });
        std::string rows = "path_id,t,x,u\n";
        bool identical = true;
        for (std::size_t k = 0; k < fields.size(); ++k) {
            rows += path_csv_rows(k, fields[k]);
            identical = identical && fields[k] == reference;
        }
        s.write("paths_" + std::to_string(e) + ".csv", rows, m.outputs);
        for (double p : {1.0, 2.0}) {
            const auto est = moment_norms(fields, reference, w, p);
            moments += num17(eps) + "," + num17(p) + "," + num17(est.mean) + "," + num17(est.std_error) + "," +
                       std::to_string(est.n) + "\n";
            summary["moments"].push_back(
                {{"epsilon", eps}, {"p", p}, {"mean", est.mean}, {"std_error", est.std_error}, {"n", est.n}});
        }
        if (eps == 0.0) {
            add(m, "zero_noise_matches_reference_" + std::to_string(e), identical,
                identical ? "bit-identical match" : "paths differ from the reference");
        }
        bool finite = true, nonneg = true;
        for (const auto& f : fields) {
            finite = finite && f.all_finite();
            nonneg = nonneg && f.min_value() >= 0.0;
        }
        add(m, "paths_valid_" + std::to_string(e), finite && nonneg, "finite and nonnegative");
    }
    s.write("moments.csv", moments, m.outputs);
    s.write("moments.json", summary.dump(2) + "\n", m.outputs);
}

void rate_suite(const RunConfig& c, const Session& s, RunManifest& m) {
    const auto coeffs = coefficients_of(c);
    const auto u0 = initial_of(c);
    const Control gstar = control_of(c);
    const Field h = gamma0(gstar, u0, coeffs);
    RateOptions opt = c.rate;
    opt.N_max = c.N;
    const auto res = rate_function(h, u0, coeffs, opt);
    s.write("target.csv", field_to_csv(h, "h"), m.outputs);
    s.write("argmin.csv", control_to_csv(res.argmin), m.outputs);
    json trace = json::array();
    for (const auto& [l, o] : res.penalty_trace) trace.push_back({l, o});
    const double bound = 0.5 * cm_norm(gstar) * cm_norm(gstar);
    json out = {{"value", res.value}, {"target_gap", res.target_gap}, {"feasible", res.feasible},
                {"generating_cost", bound}, {"penalty_trace", trace}};
    s.write("rate.json", out.dump(2) + "\n", m.outputs);
    add(m, "feasible", res.feasible, "target_gap=" + num(res.target_gap));
    add(m, "upper_bound", res.value <= 1.05 * bound + 1e-12, "value=" + num(res.value) + " generating=" + num(bound));
    add(m, "nonnegative", res.value >= 0.0, "value=" + num(res.value));
}

void condition_a(const RunConfig& c, const Session& s, RunManifest& m) {
    const auto rep = condition_a_suite(control_of(c), c.N, c.n_list, c.family, initial_of(c), coefficients_of(c));
    s.write(rep.name + ".csv", rep.to_csv(), m.outputs);
    add(m, rep.name, rep.passed, rep.verdict);
}

void condition_b(const RunConfig& c, const Session& s, RunManifest& m) {
    ConditionBOptions opt;
    opt.epsilons = c.epsilons;
    opt.ps = c.ps;
    opt.n_paths = c.n_paths;
    opt.master_seed = c.master_seed;
    opt.threads = c.threads;
    const auto reps = condition_b_suite(control_of(c), c.N, initial_of(c), coefficients_of(c), opt);
    for (const auto& rep : reps) {
        s.write(rep.name + ".csv", rep.to_csv(), m.outputs);
        add(m, rep.name, rep.passed, rep.verdict);
    }
}

void ldp_scan(const RunConfig& c, const Session& s, RunManifest& m) {
    ScanOptions opt;
    opt.epsilons = c.epsilons;
    opt.n_paths = c.n_paths;
    opt.min_hits = c.min_hits;
    opt.master_seed = c.master_seed;
    opt.threads = c.threads;
    const auto table = ldp_probability_scan(c.event, initial_of(c), coefficients_of(c), c.grid, opt);
    s.write("scan.csv", table.to_csv(), m.outputs);
    json summary = {{"reference_rate", table.reference_rate},
                    {"monotone", table.monotone},
                    {"gaussian_reference", table.gaussian_reference},
                    {"gaussian_variance", table.gaussian_variance},
                    {"gaussian_rate", table.gaussian_rate}};
    s.write("scan.json", summary.dump(2) + "\n", m.outputs);
    add(m, "trend", table.monotone, "eps log P monotone over uncensored rows");
    const ScanRow* smallest = nullptr;
    for (const auto& r : table.rows) {
        if (!r.censored && (!smallest || r.epsilon < smallest->epsilon)) smallest = &r;
    }
    if (!smallest) {
        add(m, "uncensored", false, "every epsilon fell below the hit guard");
    } else if (table.gaussian_reference) {
        const double rel = std::abs(smallest->eps_log_p / smallest->gaussian_eps_log_p - 1.0);
        add(m, "gaussian_oracle", rel <= c.oracle_tolerance,
            "epsilon=" + num(smallest->epsilon) + " relative error=" + num(rel) +
                " asymptotic ratio=" + num(-smallest->eps_log_p / table.gaussian_rate));
    }
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

// ------------------------------------------------------------------ config

RunConfig parse_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config", std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
    check_keys(j, "", {"command", "grid", "coefficients", "initial", "control", "epsilons", "n_paths", "seed", "out",
                       "threads", "p", "obstacle", "stepper", "reference_csv", "N", "n_list", "family", "ps", "rate",
                       "event", "min_hits", "oracle_tolerance"});

    RunConfig c;
    c.command = get_string(j, "command", "", "");
    bool known = false;
    for (const char* k : kCommands) known = known || c.command == k;
    if (!known) throw ConfigError("command", "unknown command '" + c.command + "'");

    const json& grid = get_object(j, "grid", "");
    check_keys(grid, "grid", {"T", "L", "nt", "nx"});
    try {
        c.grid = make_grid(get_number(grid, "T", "grid", 0.5), get_number(grid, "L", "grid", 5.0),
                           get_count(grid, "nt", "grid", 500), get_count(grid, "nx", "grid", 50));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError("grid", e.what());
    }

    const json& co = get_object(j, "coefficients", "");
    check_keys(co, "coefficients", {"drift", "diffusion", "r"});
    const json& dr = get_object(co, "drift", "coefficients");
    check_keys(dr, "coefficients.drift", {"kind", "a", "b"});
    const std::string dk = get_string(dr, "kind", "coefficients.drift", "affine");
    if (dk != "affine" && dk != "saturating") throw ConfigError("coefficients.drift.kind", "affine or saturating");
    c.drift.kind = dk == "affine" ? DriftFamily::Kind::affine : DriftFamily::Kind::saturating;
    c.drift.a = get_number(dr, "a", "coefficients.drift", 0.0);
    c.drift.b = get_number(dr, "b", "coefficients.drift", 0.0);
    const json& di = get_object(co, "diffusion", "coefficients");
    check_keys(di, "coefficients.diffusion", {"R", "delta", "c", "d"});
    c.diffusion.R = get_number(di, "R", "coefficients.diffusion", 1.0);
    c.diffusion.delta = get_number(di, "delta", "coefficients.diffusion", 0.5);
    c.diffusion.c = get_number(di, "c", "coefficients.diffusion", 1.0);
    c.diffusion.d = get_number(di, "d", "coefficients.diffusion", 0.0);
    c.r = get_number(co, "r", "coefficients", 0.0);

    const json& in = get_object(j, "initial", "");
    check_keys(in, "initial", {"kind", "amplitude", "values"});
    c.initial.kind = get_string(in, "kind", "initial", "zero");
    if (c.initial.kind != "zero" && c.initial.kind != "hump" && c.initial.kind != "values") {
        throw ConfigError("initial.kind", "zero, hump or values");
    }
    c.initial.amplitude = get_number(in, "amplitude", "initial", 1.0);
    c.initial.values = get_list(in, "values", "initial", {});
    if (c.initial.kind == "values" && c.initial.values.size() != c.grid.nx + 1) {
        throw ConfigError("initial.values", "need nx+1 entries");
    }

    const json& ct = get_object(j, "control", "");
    check_keys(ct, "control", {"kind", "amplitude", "decay", "growth", "n", "support", "values"});
    c.control.kind = get_string(ct, "kind", "control", "zero");
    if (c.control.kind != "zero" && c.control.kind != "separable" && c.control.kind != "oscillatory" &&
        c.control.kind != "lattice" && c.control.kind != "coarse") {
        throw ConfigError("control.kind", "zero, separable, oscillatory, lattice or coarse");
    }
    c.control.amplitude = get_number(ct, "amplitude", "control", 0.0);
    c.control.decay = get_number(ct, "decay", "control", 1.0);
    c.control.growth = get_number(ct, "growth", "control", 0.0);
    c.control.n = get_number(ct, "n", "control", 1.0);
    if (!(c.control.n > 0.0)) throw ConfigError("control.n", "must be positive");
    c.control.support = get_number(ct, "support", "control", 1.0);
    c.control.values = get_list(ct, "values", "control", {});
    if (c.control.kind == "lattice" && c.control.values.size() != c.grid.nt * c.grid.nx) {
        throw ConfigError("control.values", "need nt*nx cell values");
    }

    c.epsilons = get_list(j, "epsilons", "", {});
    c.n_paths = get_count(j, "n_paths", "", 100);
    if (const json* v = member(j, "seed")) {
        if (!v->is_number_unsigned()) throw ConfigError("seed", "expected an unsigned 64-bit integer");
        c.master_seed = v->get<std::uint64_t>();
    }
    c.out_dir = get_string(j, "out", "", "");
    c.threads = static_cast<unsigned>(get_count(j, "threads", "", 1));
    if (c.threads == 0) throw ConfigError("threads", "must be positive");

    c.p = get_number(j, "p", "", 6.0);

    const json& ob = get_object(j, "obstacle", "");
    check_keys(ob, "obstacle", {"kind", "amplitude", "center", "width"});
    c.obstacle.kind = get_string(ob, "kind", "obstacle", "bump");
    if (c.obstacle.kind != "bump" && c.obstacle.kind != "negative") throw ConfigError("obstacle.kind", "bump or negative");
    c.obstacle.amplitude = get_number(ob, "amplitude", "obstacle", 1.0);
    c.obstacle.center = get_number(ob, "center", "obstacle", 2.0);
    c.obstacle.width = get_number(ob, "width", "obstacle", 1.0);
    if (!(c.obstacle.width > 0.0)) throw ConfigError("obstacle.width", "must be positive");
    if (c.obstacle.kind == "negative" && c.obstacle.amplitude < 0.0) {
        throw ConfigError("obstacle.amplitude", "must be >= 0 for a nonpositive obstacle");
    }

    c.stepper = get_string(j, "stepper", "", "auto");
    if (c.stepper != "auto" && c.stepper != "explicit" && c.stepper != "implicit") {
        throw ConfigError("stepper", "auto, explicit or implicit");
    }
    c.reference_csv = get_string(j, "reference_csv", "", "");
    c.N = get_number(j, "N", "", 4.0);
    c.n_list = get_list(j, "n_list", "", c.n_list);

    const json& fa = get_object(j, "family", "");
    check_keys(fa, "family", {"kind", "amplitude", "support", "growth"});
    const std::string fk = get_string(fa, "kind", "family", "oscillatory");
    if (fk != "oscillatory" && fk != "scaled") throw ConfigError("family.kind", "oscillatory or scaled");
    c.family.kind = fk == "oscillatory" ? PerturbationFamily::Kind::oscillatory : PerturbationFamily::Kind::scaled;
    c.family.amplitude = get_number(fa, "amplitude", "family", 1.0);
    c.family.support = get_number(fa, "support", "family", 1.0);
    c.family.growth = get_number(fa, "growth", "family", 0.0);

    c.ps = get_list(j, "ps", "", c.ps);

    const json& ra = get_object(j, "rate", "");
    check_keys(ra, "rate", {"nt_coarse", "nx_coarse", "x_max", "schedule", "iterations_per_stage", "gap_threshold"});
    c.rate.nt_coarse = get_count(ra, "nt_coarse", "rate", c.rate.nt_coarse);
    c.rate.nx_coarse = get_count(ra, "nx_coarse", "rate", c.rate.nx_coarse);
    c.rate.x_max = get_number(ra, "x_max", "rate", c.rate.x_max);
    c.rate.schedule = get_list(ra, "schedule", "rate", c.rate.schedule);
    c.rate.iterations_per_stage = get_count(ra, "iterations_per_stage", "rate", c.rate.iterations_per_stage);
    c.rate.gap_threshold = get_number(ra, "gap_threshold", "rate", c.rate.gap_threshold);

    if (c.control.kind == "coarse") {
        if (c.rate.nt_coarse < 2 || c.rate.nx_coarse < 2) throw ConfigError("rate", "need at least 2 x 2 coarse nodes");
        if (!(c.rate.x_max > 0.0)) throw ConfigError("rate.x_max", "must be positive");
        if (c.control.values.size() != c.rate.nt_coarse * c.rate.nx_coarse) {
            throw ConfigError("control.values", "need nt_coarse*nx_coarse coefficients");
        }
    }

    const json& ev = get_object(j, "event", "");
    check_keys(ev, "event", {"threshold", "node"});
    c.event.threshold = get_number(ev, "threshold", "event", 0.0);
    if (const json* node = member(ev, "node")) {
        if (!node->is_array() || node->size() != 2 || !(*node)[0].is_number_unsigned() || !(*node)[1].is_number_unsigned()) {
            throw ConfigError("event.node", "expected [time index, space index]");
        }
        const auto i = (*node)[0].get<std::size_t>(), jx = (*node)[1].get<std::size_t>();
        if (i == 0 || i > c.grid.nt || jx > c.grid.nx) throw ConfigError("event.node", "outside the lattice");
        c.event.node = std::make_pair(i, jx);
    }
    c.min_hits = get_count(j, "min_hits", "", 30);
    c.oracle_tolerance = get_number(j, "oracle_tolerance", "", 0.2);

    validate_for_command(c);
    c.echo = echo_of(c).dump(2);
    return c;
}

void apply_overrides(RunConfig& c, std::optional<std::uint64_t> seed, std::optional<std::string> out_dir,
                     std::optional<unsigned> threads) {
    if (seed) c.master_seed = *seed;
    if (out_dir) c.out_dir = *out_dir;
    if (threads) {
        if (*threads == 0) throw ConfigError("threads", "must be positive");
        c.threads = *threads;
    }
    if (c.out_dir.empty()) throw ConfigError("out", "an output directory is required");
    c.echo = echo_of(c).dump(2);
}

// ------------------------------------------------------------------ manifest

bool RunManifest::all_passed() const {
    if (status == "error") return false;
    for (const auto& v : verdicts) {
        if (!v.passed) return false;
    }
    return true;
}

std::string RunManifest::to_json() const {
    json j;
    j["config"] = config_echo.empty() ? json::object() : json::parse(config_echo);
    j["version"] = version;
    j["started_at"] = started_at;
    j["wall_clock_seconds"] = wall_clock_seconds;
    j["threads"] = threads;
    j["status"] = status;
    j["error"] = error;
    j["verdicts"] = json::array();
    for (const auto& v : verdicts) j["verdicts"].push_back({{"name", v.name}, {"passed", v.passed}, {"detail", v.detail}});
    j["outputs"] = json::array();
    for (const auto& o : outputs) j["outputs"].push_back({{"file", o.name}, {"bytes", o.bytes}, {"sha256", o.sha256}});
    return j.dump(2) + "\n";
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int k = 0; k < len; ++k) {
        out += hex[digest[k] >> 4];
        out += hex[digest[k] & 15];
    }
    return out;
}

RunManifest run(const RunConfig& config) {
    if (config.out_dir.empty()) throw ConfigError("out", "an output directory is required");
    Session session(config.out_dir);
    RunManifest m;
    m.config_echo = config.echo.empty() ? echo_of(config).dump(2) : config.echo;
    m.version = RSPDE_VERSION;
    m.started_at = utc_now();
    m.threads = config.threads;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const std::string& cmd = config.command;
        if (cmd == "kernel-suite") kernel_suite(config, session, m);
        else if (cmd == "obstacle") obstacle_suite(config, session, m);
        else if (cmd == "skeleton") skeleton_suite(config, session, m);
        else if (cmd == "simulate") simulate_suite(config, session, m);
        else if (cmd == "rate") rate_suite(config, session, m);
        else if (cmd == "condition-a") condition_a(config, session, m);
        else if (cmd == "condition-b") condition_b(config, session, m);
        else if (cmd == "ldp-scan") ldp_scan(config, session, m);
        else throw ConfigError("command", "unknown command '" + cmd + "'");
        if (!m.all_passed()) m.status = "failed";
    } catch (const std::exception& e) {
        m.status = "error";
        m.error = e.what();
    }
    m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::sort(m.outputs.begin(), m.outputs.end(), [](const OutputFile& a, const OutputFile& b) { return a.name < b.name; });
    session.write_manifest(m);
    return m;
}

int exit_status(const RunManifest& manifest) { return manifest.all_passed() ? 0 : 1; }

}  // namespace rspde
