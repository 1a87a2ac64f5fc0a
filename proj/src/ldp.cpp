#include "rspde/ldp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "rspde/heat_kernel.hpp"
#include "rspde/parallel.hpp"
#include "rspde/spde.hpp"

namespace rspde {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double hat(double s, double node, double width) {
    return std::max(0.0, 1.0 - std::abs(s - node) / width);
}

// Least-squares slope of log(y) against log(x) over entries with y > 0.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!(y[k] > 0.0) || !(x[k] > 0.0)) continue;
        const double lx = std::log(x[k]), ly = std::log(y[k]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    const double d = static_cast<double>(n) * sxx - sx * sx;
    return (static_cast<double>(n) * sxy - sx * sy) / d;
}

void require_in_ball(const Control& g, double N, const char* what) {
    if (!(N > 0.0)) throw std::invalid_argument(std::string(what) + ": N must be positive");
    if (cm_norm(g) > N * (1.0 + 1e-12)) throw std::invalid_argument(std::string(what) + ": control outside S_N");
}

}  // namespace

// ---------------------------------------------------------------- control basis

ControlBasis::ControlBasis(const Grid& grid, std::size_t nt_coarse, std::size_t nx_coarse, double x_max)
    : grid_(grid), nt_c_(nt_coarse), nx_c_(nx_coarse), x_max_(x_max) {
    if (nt_c_ < 2 || nx_c_ < 2) throw std::invalid_argument("ControlBasis: need at least 2 x 2 coarse nodes");
    if (!(x_max_ > 0.0) || x_max_ > grid.L) throw std::invalid_argument("ControlBasis: x_max must lie in (0, L]");
    const double wt = grid.T / static_cast<double>(nt_c_ - 1);
    const double wx = x_max_ / static_cast<double>(nx_c_ - 1);
    cell_weights_.resize(grid.nt * grid.nx);
    for (std::size_t i = 0; i < grid.nt; ++i) {
        const double t = grid.t(i) + 0.5 * grid.dt;
        for (std::size_t j = 0; j < grid.nx; ++j) {
            const double x = grid.x(j) + 0.5 * grid.dx;
            if (x > x_max_) continue;
            auto& w = cell_weights_[i * grid.nx + j];
            for (std::size_t a = 0; a < nt_c_; ++a) {
                const double ht = hat(t, wt * static_cast<double>(a), wt);
                if (ht == 0.0) continue;
                for (std::size_t b = 0; b < nx_c_; ++b) {
                    const double hx = hat(x, wx * static_cast<double>(b), wx);
                    if (hx != 0.0) w.emplace_back(a * nx_c_ + b, ht * hx);
                }
            }
        }
    }
    const std::size_t n = size();
    gram_.assign(n * n, 0.0);
    const double cell = grid.dt * grid.dx;
    for (const auto& w : cell_weights_) {
        for (const auto& [p, wp] : w) {
            for (const auto& [q, wq] : w) gram_[p * n + q] += wp * wq * cell;
        }
    }
}

Control ControlBasis::expand(std::span<const double> coeffs) const {
    if (coeffs.size() != size()) throw std::invalid_argument("ControlBasis::expand: coefficient count");
    Control g(grid_);
    auto v = g.values();
    for (std::size_t c = 0; c < cell_weights_.size(); ++c) {
        double s = 0.0;
        for (const auto& [p, w] : cell_weights_[c]) s += w * coeffs[p];
        v[c] = s;
    }
    return g;
}

// ---------------------------------------------------------------- rate function

namespace {

// Gamma0 with tight tolerance and warm starts from the last solution.
class ForwardMap {
public:
    ForwardMap(std::span<const double> u0, const Coefficients& coeffs) : u0_(u0), coeffs_(coeffs) {
        options_.tol = 1e-11;
        options_.max_iter = 200;
    }

    Field operator()(const Control& g, const std::optional<Field>& warm) const {
        SkeletonOptions opt = options_;
        opt.initial_guess = warm;
        return solve_skeleton(g, u0_, coeffs_, opt).u;
    }

private:
    std::span<const double> u0_;
    const Coefficients& coeffs_;
    SkeletonOptions options_;
};

struct Iterate {
    Eigen::VectorXd c;
    Field u;
    Eigen::VectorXd residual;  // weighted L2 residual, one entry per node
    double value = 0.0;        // 1/2 c^T M c
    double gap = 0.0;          // C_r^T distance to the target
};

}  // namespace

RateResult rate_function(const Field& h, std::span<const double> u0, const Coefficients& coeffs,
                         const RateOptions& options) {
    const Grid& grid = h.grid();
    validate_initial(grid, u0);
    if (!h.all_finite()) throw std::invalid_argument("rate_function: target has non-finite entries");
    for (std::size_t i = 0; i <= grid.nt; ++i) {
        if (h(i, 0) != 0.0) throw std::invalid_argument("rate_function: target must vanish at x = 0");
        for (std::size_t j = 0; j <= grid.nx; ++j) {
            if (h(i, j) < 0.0) throw std::invalid_argument("rate_function: target must be nonnegative");
        }
    }
    for (std::size_t j = 0; j <= grid.nx; ++j) {
        if (std::abs(h(0, j) - u0[j]) > 1e-12 * (1.0 + std::abs(u0[j]))) {
            throw std::invalid_argument("rate_function: target must start from u0");
        }
    }
    if (options.schedule.empty()) throw std::invalid_argument("rate_function: empty penalty schedule");
    if (!(options.N_max > 0.0)) throw std::invalid_argument("rate_function: N_max must be positive");
    if (options.g0) require_same_grid(grid, options.g0->grid(), "rate_function");

    const ControlBasis basis(grid, options.nt_coarse, options.nx_coarse, std::min(options.x_max, grid.L));
    const std::size_t n = basis.size();
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> M(
        basis.gram().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const WeightParams w{coeffs.r()};
    const ForwardMap forward(u0, coeffs);

    std::vector<double> node_weight(grid.nx + 1);
    for (std::size_t j = 0; j <= grid.nx; ++j) node_weight[j] = std::exp(-w.r * grid.x(j)) * std::sqrt(grid.dt * grid.dx);

    auto residual_of = [&](const Field& u) {
        Eigen::VectorXd r(static_cast<Eigen::Index>((grid.nt + 1) * (grid.nx + 1)));
        for (std::size_t i = 0; i <= grid.nt; ++i) {
            for (std::size_t j = 0; j <= grid.nx; ++j) {
                r[static_cast<Eigen::Index>(i * (grid.nx + 1) + j)] = node_weight[j] * (u(i, j) - h(i, j));
            }
        }
        return r;
    };
    auto make_iterate = [&](Eigen::VectorXd c, const std::optional<Field>& warm) {
        const double norm = std::sqrt(std::max(0.0, c.dot(M * c)));
        if (norm > options.N_max) c *= options.N_max / norm;
        Iterate it;
        const std::vector<double> cv(c.data(), c.data() + c.size());
        it.u = forward(basis.expand(cv), warm);
        it.residual = residual_of(it.u);
        it.value = 0.5 * c.dot(M * c);
        it.gap = weighted_sup_norm(it.u - h, w);
        it.c = std::move(c);
        return it;
    };
    auto objective = [](const Iterate& it, double lambda) { return it.value + lambda * it.residual.squaredNorm(); };

    RateResult result;
    bool have_best = false;
    double best_value = 0.0, best_gap = 0.0;
    auto consider = [&](const Control& g, double value, double gap) {
        const bool feasible = gap <= options.gap_threshold;
        bool better;
        if (!have_best) {
            better = true;
        } else if (feasible != result.feasible) {
            better = feasible;
        } else {
            better = feasible ? value < best_value : gap < best_gap;
        }
        if (better) {
            have_best = true;
            best_value = value;
            best_gap = gap;
            result.feasible = feasible;
            result.argmin = g;
        }
    };
    auto consider_iterate = [&](const Iterate& it) {
        const std::vector<double> cv(it.c.data(), it.c.data() + it.c.size());
        consider(basis.expand(cv), it.value, it.gap);
    };

    Iterate cur = make_iterate(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)), std::nullopt);
    consider_iterate(cur);
    constexpr double fd_step = 1e-5;
    Eigen::MatrixXd J(cur.residual.size(), static_cast<Eigen::Index>(n));

    for (double lambda : options.schedule) {
        if (!(lambda > 0.0)) throw std::invalid_argument("rate_function: penalty weights must be positive");
        for (std::size_t it = 0; it < options.iterations_per_stage; ++it) {
            for (std::size_t k = 0; k < n; ++k) {
                Eigen::VectorXd c = cur.c;
                c[static_cast<Eigen::Index>(k)] += fd_step;
                const std::vector<double> cv(c.data(), c.data() + c.size());
                const Field uk = forward(basis.expand(cv), cur.u);
                J.col(static_cast<Eigen::Index>(k)) = (residual_of(uk) - cur.residual) / fd_step;
            }
            const Eigen::MatrixXd H = M + 2.0 * lambda * J.transpose() * J;
            const Eigen::VectorXd grad = M * cur.c + 2.0 * lambda * J.transpose() * cur.residual;
            const Eigen::VectorXd step = -H.ldlt().solve(grad);
            if (!step.allFinite() || step.norm() <= 1e-12 * (1.0 + cur.c.norm())) break;

            // Armijo backtracking on the penalized objective.
            const double f0 = objective(cur, lambda);
            const double slope = grad.dot(step);
            double alpha = 1.0;
            bool accepted = false;
            for (int ls = 0; ls < 12; ++ls, alpha *= 0.5) {
                Iterate trial = make_iterate(cur.c + alpha * step, cur.u);
                if (objective(trial, lambda) <= f0 + 1e-4 * alpha * slope) {
                    cur = std::move(trial);
                    accepted = true;
                    break;
                }
            }
            if (!accepted) break;
            consider_iterate(cur);
            if (alpha * step.norm() <= 1e-9 * (1.0 + cur.c.norm())) break;
        }
        result.penalty_trace.emplace_back(lambda, objective(cur, lambda));
    }

    if (options.g0) {
        const Field u = forward(*options.g0, cur.u);
        const double norm = cm_norm(*options.g0);
        consider(*options.g0, 0.5 * norm * norm, weighted_sup_norm(u - h, w));
    }

    result.value = std::max(0.0, best_value);
    result.target_gap = best_gap;
    return result;
}

// ---------------------------------------------------------------- reports

std::string ConditionReport::to_csv() const {
    std::string out = "index,discrepancy,std_error,aux\n";
    for (const auto& r : rows) {
        out += fmt17(r.index) + "," + fmt17(r.discrepancy) + "," + fmt17(r.std_error) + "," + fmt17(r.aux) + "\n";
    }
    return out;
}

std::string ScanTable::to_csv() const {
    std::string out = "epsilon,hits,n_paths,probability,eps_log_p,censored,gaussian_eps_log_p\n";
    for (const auto& r : rows) {
        out += fmt17(r.epsilon) + "," + std::to_string(r.hits) + "," + std::to_string(r.n_paths) + "," +
               fmt17(r.probability) + "," + fmt17(r.eps_log_p) + "," + (r.censored ? "1" : "0") + "," +
               fmt17(r.gaussian_eps_log_p) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------- condition (a)

Control perturbed_control(const Control& g, const PerturbationFamily& family, double n) {
    if (!(n > 0.0)) throw std::invalid_argument("perturbed_control: index must be positive");
    const Grid& grid = g.grid();
    Control out = g;
    if (family.kind == PerturbationFamily::Kind::scaled) {
        out *= 1.0 - 1.0 / n;
        return out;
    }
    const double c = family.amplitude * std::pow(n, family.growth);
    if (c == 0.0) return out;
    for (std::size_t i = 0; i < grid.nt; ++i) {
        const double s = c * std::sin(n * std::numbers::pi * (grid.t(i) + 0.5 * grid.dt) / grid.T);
        for (std::size_t j = 0; j < grid.nx; ++j) {
            if (grid.x(j) + 0.5 * grid.dx <= family.support) out(i, j) += s;
        }
    }
    return out;
}

ConditionReport condition_a_suite(const Control& g, double N, const std::vector<double>& n_list,
                                  const PerturbationFamily& family, std::span<const double> u0,
                                  const Coefficients& coeffs) {
    require_in_ball(g, N, "condition_a_suite");
    if (n_list.size() < 2) throw std::invalid_argument("condition_a_suite: need at least two indices");
    if (family.kind == PerturbationFamily::Kind::oscillatory && family.growth > 0.0 && family.amplitude != 0.0) {
        throw std::invalid_argument("condition_a_suite: perturbation norms grow without bound");
    }
    if (!std::is_sorted(n_list.begin(), n_list.end())) throw std::invalid_argument("condition_a_suite: n_list must increase");

    const WeightParams w{coeffs.r()};
    const Field base = gamma0(g, u0, coeffs);
    ConditionReport report;
    report.name = family.kind == PerturbationFamily::Kind::oscillatory ? "condition_a_oscillatory" : "condition_a_scaled";
    std::vector<double> xs, ys;
    for (double n : n_list) {
        const Control gn = perturbed_control(g, family, n);
        const double d = weighted_sup_norm(gamma0(gn, u0, coeffs) - base, w);
        report.rows.push_back({n, d, 0.0, cm_norm(gn)});
        xs.push_back(n);
        ys.push_back(d);
    }

    const bool all_zero = std::all_of(ys.begin(), ys.end(), [](double d) { return d == 0.0; });
    report.monotone = true;
    for (std::size_t k = 2; k < ys.size(); ++k) {
        if (ys[k] > ys[k - 1] * (1.0 + 1e-9)) report.monotone = false;
    }
    report.fitted_rate = all_zero ? 0.0 : loglog_slope(xs, ys);
    char buf[160];
    if (all_zero) {
        report.passed = true;
        report.verdict = "all discrepancies vanish";
    } else if (family.kind == PerturbationFamily::Kind::oscillatory) {
        const bool decay = ys.back() < 0.1 * ys.front();
        report.passed = decay && report.monotone;
        std::snprintf(buf, sizeof buf, "d_last/d_first=%.4g monotone=%d", ys.back() / ys.front(), report.monotone);
        report.verdict = buf;
    } else {
        report.passed = report.fitted_rate >= -1.3 && report.fitted_rate <= -0.7;
        std::snprintf(buf, sizeof buf, "fitted slope=%.4g", report.fitted_rate);
        report.verdict = buf;
    }
    return report;
}

// ---------------------------------------------------------------- condition (b)

std::vector<ConditionReport> condition_b_suite(const Control& g, double N, std::span<const double> u0,
                                               const Coefficients& coeffs, const ConditionBOptions& options) {
    require_in_ball(g, N, "condition_b_suite");
    if (!(coeffs.constants().delta > 0.0)) throw std::invalid_argument("condition_b_suite: delta = 0 refused");
    if (options.epsilons.size() < 2) throw std::invalid_argument("condition_b_suite: need at least two epsilons");
    for (double e : options.epsilons) {
        if (!(e > 0.0)) throw std::invalid_argument("condition_b_suite: epsilons must be positive");
    }
    if (!std::is_sorted(options.epsilons.rbegin(), options.epsilons.rend())) {
        throw std::invalid_argument("condition_b_suite: epsilons must decrease");
    }
    if (options.ps.empty()) throw std::invalid_argument("condition_b_suite: empty p list");
    for (double p : options.ps) {
        if (!(p >= 1.0)) throw std::invalid_argument("condition_b_suite: p must be >= 1");
    }
    if (options.n_paths < 2) throw std::invalid_argument("condition_b_suite: need at least two paths");

    const Grid& grid = g.grid();
    const WeightParams w{coeffs.r()};
    const Field ubar = fd_reference(g, u0, coeffs).u;
    const std::size_t ne = options.epsilons.size();

    // norms[k][e]: every path is driven by one noise lattice for all epsilons.
    std::vector<std::vector<double>> norms(options.n_paths, std::vector<double>(ne));
    parallel_for(options.n_paths, options.threads, [&](std::size_t k) {
        const NoisePath noise = sample_noise(grid, derive_seed(options.master_seed, k));
        for (std::size_t e = 0; e < ne; ++e) {
            norms[k][e] = weighted_sup_norm(simulate(options.epsilons[e], coeffs, u0, noise, &g).u - ubar, w);
        }
    });

    std::vector<ConditionReport> reports;
    for (double p : options.ps) {
        ConditionReport report;
        char name[64];
        std::snprintf(name, sizeof name, "condition_b_p%g", p);
        report.name = name;
        std::vector<double> column(options.n_paths), m;
        for (std::size_t e = 0; e < ne; ++e) {
            for (std::size_t k = 0; k < options.n_paths; ++k) column[k] = norms[k][e];
            const auto est = moment_from_norms(column, p);
            report.rows.push_back({options.epsilons[e], est.mean, est.std_error, p});
            m.push_back(est.mean);
        }
        const bool all_zero = std::all_of(m.begin(), m.end(), [](double v) { return v == 0.0; });
        // Strict decrease beyond two paired standard errors.
        report.monotone = true;
        for (std::size_t e = 1; e < ne; ++e) {
            for (std::size_t k = 0; k < options.n_paths; ++k) {
                column[k] = std::pow(norms[k][e - 1], p) - std::pow(norms[k][e], p);
            }
            double mean = 0.0;
            for (double d : column) mean += d;
            mean /= static_cast<double>(options.n_paths);
            double ss = 0.0;
            for (double d : column) ss += (d - mean) * (d - mean);
            const double se = std::sqrt(ss / static_cast<double>(options.n_paths - 1) / static_cast<double>(options.n_paths));
            if (!(mean > 2.0 * se)) report.monotone = false;
        }
        report.fitted_rate = all_zero ? 0.0 : loglog_slope(options.epsilons, m);
        char buf[160];
        if (all_zero) {
            report.passed = true;
            report.verdict = "m_p vanishes identically";
        } else {
            const double need = p == 2.0 ? options.min_slope_p2 : 0.0;
            report.passed = report.monotone && report.fitted_rate >= need;
            std::snprintf(buf, sizeof buf, "monotone=%d fitted slope=%.4g (required >= %.3g)", report.monotone,
                          report.fitted_rate, need);
            report.verdict = buf;
        }
        reports.push_back(std::move(report));
    }
    return reports;
}

// ---------------------------------------------------------------- probability scan

namespace {

double event_statistic(const Field& u, const Field& base, const ExceedanceEvent& event, WeightParams w) {
    if (event.node) return u(event.node->first, event.node->second) - base(event.node->first, event.node->second);
    return weighted_sup_norm(u - base, w);
}

void validate_event(const Grid& grid, const ExceedanceEvent& event) {
    if (!(event.threshold >= 0.0)) throw std::invalid_argument("ExceedanceEvent: threshold must be >= 0");
    if (event.node && (event.node->first > grid.nt || event.node->second > grid.nx || event.node->first == 0)) {
        throw std::invalid_argument("ExceedanceEvent: node outside the lattice interior in time");
    }
}

// Kernel-shaped control steering node (i, j): gdot(s, y) = G(t_i - s, x_j, y) sigma(y, base).
Control steering_direction(const Field& base, const Coefficients& coeffs, std::size_t i, std::size_t j) {
    const Grid& grid = base.grid();
    Control d(grid);
    const double t = grid.t(i), x = grid.x(j);
    for (std::size_t m = 0; m < i; ++m) {
        const double tau = t - (grid.t(m) + 0.5 * grid.dt);
        for (std::size_t k = 0; k < grid.nx; ++k) {
            const double y = grid.x(k) + 0.5 * grid.dx;
            const double ub = 0.5 * (base(m, k) + base(m, k + 1));
            d(m, k) = kernel(tau, x, y) * coeffs.sigma(y, ub);
        }
    }
    return d;
}

}  // namespace

double event_cost_along(const Control& direction, const ExceedanceEvent& event, std::span<const double> u0,
                        const Coefficients& coeffs, double max_scale) {
    const Grid& grid = direction.grid();
    validate_event(grid, event);
    const WeightParams w{coeffs.r()};
    const Field base = fd_reference(Control(grid), u0, coeffs).u;
    const double dnorm = cm_norm(direction);
    auto reaches = [&](double s) {
        const Control g = s * direction;
        return event_statistic(fd_reference(g, u0, coeffs).u, base, event, w) >= event.threshold;
    };
    if (event.threshold == 0.0) return 0.0;
    if (dnorm == 0.0 || !reaches(max_scale)) return std::numeric_limits<double>::infinity();
    double lo = 0.0, hi = max_scale;
    for (int it = 0; it < 60 && hi - lo > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (reaches(mid) ? hi : lo) = mid;
    }
    return 0.5 * hi * hi * dnorm * dnorm;
}

ScanTable ldp_probability_scan(const ExceedanceEvent& event, std::span<const double> u0, const Coefficients& coeffs,
                               const Grid& grid, const ScanOptions& options) {
    validate_event(grid, event);
    validate_initial(grid, u0);
    if (options.epsilons.empty()) throw std::invalid_argument("ldp_probability_scan: empty epsilon list");
    for (double e : options.epsilons) {
        if (!(e > 0.0)) throw std::invalid_argument("ldp_probability_scan: epsilons must be positive");
    }
    if (options.n_paths == 0) throw std::invalid_argument("ldp_probability_scan: n_paths must be positive");

    const WeightParams w{coeffs.r()};
    const Field base = fd_reference(Control(grid), u0, coeffs).u;
    const std::size_t ne = options.epsilons.size();

    std::vector<std::vector<unsigned char>> hit(options.n_paths, std::vector<unsigned char>(ne));
    parallel_for(options.n_paths, options.threads, [&](std::size_t k) {
        const NoisePath noise = sample_noise(grid, derive_seed(options.master_seed, k));
        for (std::size_t e = 0; e < ne; ++e) {
            const auto path = simulate(options.epsilons[e], coeffs, u0, noise);
            hit[k][e] = event_statistic(path.u, base, event, w) >= event.threshold;
        }
    });

    ScanTable table;
    const auto& drift = coeffs.drift();
    const auto& diff = coeffs.diffusion();
    if (event.node && drift.a == 0.0 && drift.b == 0.0 && diff.d == 0.0 && coeffs.additive_diffusion()) {
        table.gaussian_reference = true;
        const double amp = diff.R * diff.c;
        table.gaussian_variance = amp * amp * stochastic_convolution_variance(grid.t(event.node->first),
                                                                              grid.x(event.node->second), diff.delta);
        table.gaussian_rate = table.gaussian_variance > 0.0
                                  ? event.threshold * event.threshold / (2.0 * table.gaussian_variance)
                                  : std::numeric_limits<double>::infinity();
    }
    for (std::size_t e = 0; e < ne; ++e) {
        ScanRow row;
        row.epsilon = options.epsilons[e];
        row.n_paths = options.n_paths;
        for (std::size_t k = 0; k < options.n_paths; ++k) row.hits += hit[k][e];
        row.probability = static_cast<double>(row.hits) / static_cast<double>(row.n_paths);
        row.censored = row.hits < options.min_hits;
        row.eps_log_p = row.censored ? std::numeric_limits<double>::quiet_NaN() : row.epsilon * std::log(row.probability);
        row.gaussian_eps_log_p = std::numeric_limits<double>::quiet_NaN();
        if (table.gaussian_reference && table.gaussian_variance > 0.0) {
            const double z = event.threshold / std::sqrt(row.epsilon * table.gaussian_variance);
            row.gaussian_eps_log_p = row.epsilon * std::log(0.5 * std::erfc(z / std::numbers::sqrt2));
        }
        table.rows.push_back(row);
    }

    // Rows ordered by decreasing epsilon; the uncensored values must move one way.
    std::vector<ScanRow> live;
    for (const auto& r : table.rows) {
        if (!r.censored) live.push_back(r);
    }
    std::sort(live.begin(), live.end(), [](const ScanRow& a, const ScanRow& b) { return a.epsilon > b.epsilon; });
    bool up = true, down = true;
    for (std::size_t k = 1; k < live.size(); ++k) {
        if (live[k].eps_log_p < live[k - 1].eps_log_p) up = false;
        if (live[k].eps_log_p > live[k - 1].eps_log_p) down = false;
    }
    table.monotone = up || down;

    // Cheapest steering control among candidate target nodes.
    if (event.threshold == 0.0) {
        table.reference_rate = 0.0;
    } else {
        std::vector<std::pair<std::size_t, std::size_t>> targets;
        if (event.node) {
            targets.push_back(*event.node);
        } else {
            for (std::size_t i : {grid.nt / 2, grid.nt}) {
                for (std::size_t q = 1; q <= 8; ++q) targets.emplace_back(std::max<std::size_t>(i, 1), q * grid.nx / 9);
            }
        }
        table.reference_rate = std::numeric_limits<double>::infinity();
        for (const auto& [i, j] : targets) {
            if (j == 0) continue;
            const Control d = steering_direction(base, coeffs, i, j);
            const double n = cm_norm(d);
            if (n == 0.0) continue;
            table.reference_rate = std::min(table.reference_rate, event_cost_along((1.0 / n) * d, event, u0, coeffs));
        }
    }
    return table;
}

}  // namespace rspde
