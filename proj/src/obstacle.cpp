#include "rspde/obstacle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace rspde {

double ReflectionMeasure::total_mass() const {
    double s = 0.0;
    for (double m : mass.values()) s += m;
    return s;
}

void ObstacleProblem::validate() const {
    require_same_grid(grid, v.grid(), "ObstacleProblem");
    if (!v.all_finite()) throw std::invalid_argument("ObstacleProblem: obstacle has non-finite entries");
    for (std::size_t i = 0; i <= grid.nt; ++i) {
        if (v(i, 0) != 0.0) throw std::invalid_argument("ObstacleProblem: obstacle must vanish at x = 0");
    }
    for (std::size_t j = 0; j <= grid.nx; ++j) {
        if (v(0, j) > 0.0) throw std::invalid_argument("ObstacleProblem: obstacle must be <= 0 at t = 0");
    }
}

void reflected_euler_step(const Grid& grid, std::span<const double> u, std::span<const double> increment,
                          std::span<const double> lower, std::span<double> next, std::span<double> mass) {
    const std::size_t nx = grid.nx;
    const double lambda = grid.dt / (grid.dx * grid.dx);
    for (std::size_t j = 0; j <= nx; ++j) {
        double tilde = 0.0;
        if (j > 0 && j < nx) {
            tilde = u[j] + lambda * (u[j - 1] - 2.0 * u[j] + u[j + 1]);
            if (!increment.empty()) tilde += increment[j];
        }
        const double bound = lower.empty() ? 0.0 : lower[j];
        if (tilde < bound) {
            next[j] = bound;
            mass[j] = (bound - tilde) * grid.dx;
        } else {
            next[j] = tilde;
            mass[j] = 0.0;
        }
    }
}

namespace {

// Backward-Euler step (I - dt Lap) z = prev subject to z >= lower, solved by
// projected SOR. Boundary rows are z = 0 (projected onto the obstacle).
void implicit_lcp_step(const Grid& grid, std::span<const double> prev, std::span<const double> lower,
                       std::span<double> z, std::span<double> mass, const ObstacleOptions& opt) {
    const std::size_t nx = grid.nx;
    const double lambda = grid.dt / (grid.dx * grid.dx);
    const double diag = 1.0 + 2.0 * lambda;
    const double rho = 2.0 * lambda * std::cos(std::numbers::pi / static_cast<double>(nx)) / diag;
    const double omega = 2.0 / (1.0 + std::sqrt(std::max(0.0, 1.0 - rho * rho)));

    // Warm start from the previous row, lifted onto the obstacle.
    for (std::size_t j = 0; j <= nx; ++j) z[j] = std::max(prev[j], lower[j]);
    z[0] = std::max(0.0, lower[0]);
    z[nx] = std::max(0.0, lower[nx]);

    auto residual = [&] {
        double worst = 0.0;
        for (std::size_t j = 1; j < nx; ++j) {
            const double w = diag * z[j] - lambda * (z[j - 1] + z[j + 1]) - prev[j];
            worst = std::max(worst, std::abs(std::min(z[j] - lower[j], w)));
        }
        return worst;
    };

    std::size_t sweep = 0;
    for (; sweep < opt.lcp_max_sweeps; ++sweep) {
        for (std::size_t j = 1; j < nx; ++j) {
            const double gs = (prev[j] + lambda * (z[j - 1] + z[j + 1])) / diag;
            z[j] = std::max(lower[j], z[j] + omega * (gs - z[j]));
        }
        if ((sweep % 8) == 7 && residual() < opt.lcp_tolerance) break;
    }
    if (sweep == opt.lcp_max_sweeps && residual() >= opt.lcp_tolerance) {
        throw std::runtime_error("solve_obstacle: projected relaxation did not converge");
    }
    mass[0] = 0.0;
    mass[nx] = z[nx] * grid.dx;
    for (std::size_t j = 1; j < nx; ++j) {
        const double w = diag * z[j] - lambda * (z[j - 1] + z[j + 1]) - prev[j];
        mass[j] = std::max(0.0, w) * grid.dx;
    }
}

}  // namespace

ObstacleSolution solve_obstacle(const ObstacleProblem& problem, const ObstacleOptions& options) {
    problem.validate();
    const Grid& g = problem.grid;
    if (options.stepper == Stepper::explicit_projection && !g.explicit_stable) {
        throw std::invalid_argument("solve_obstacle: explicit stepper refused, dt > dx^2/2");
    }
    ObstacleSolution sol{Field(g), ReflectionMeasure(g)};
    for (std::size_t i = 0; i < g.nt; ++i) {
        if (options.stepper == Stepper::explicit_projection) {
            reflected_euler_step(g, sol.z.row(i), {}, problem.v.row(i + 1), sol.z.row(i + 1), sol.eta.mass.row(i + 1));
        } else {
            implicit_lcp_step(g, sol.z.row(i), problem.v.row(i + 1), sol.z.row(i + 1), sol.eta.mass.row(i + 1), options);
        }
    }
    return sol;
}

double complementarity_residual(const Field& z, const Field& v, const ReflectionMeasure& eta) {
    require_same_grid(z.grid(), v.grid(), "complementarity_residual");
    require_same_grid(z.grid(), eta.grid(), "complementarity_residual");
    const auto zv = z.values();
    const auto vv = v.values();
    const auto mv = eta.mass.values();
    double s = 0.0;
    for (std::size_t k = 0; k < zv.size(); ++k) s += (zv[k] - vv[k]) * mv[k];
    return s;
}

StabilityResult stability_check(const Field& v1, const Field& v2, WeightParams weight, const ObstacleOptions& options) {
    require_same_grid(v1.grid(), v2.grid(), "stability_check");
    StabilityResult out;
    out.obstacle_gap = weighted_sup_norm(v1 - v2, weight);
    if (out.obstacle_gap == 0.0) {
        out.exact_match = true;
        return out;
    }
    const auto s1 = solve_obstacle({v1.grid(), v1, weight}, options);
    const auto s2 = solve_obstacle({v2.grid(), v2, weight}, options);
    out.solution_gap = weighted_sup_norm(s1.z - s2.z, weight);
    out.ratio = out.solution_gap / out.obstacle_gap;
    return out;
}

double weak_form_residual(const Field& z, const ReflectionMeasure& eta, std::size_t i,
                          const std::function<double(double)>& phi, const std::function<double(double)>& phi_xx) {
    const Grid& g = z.grid();
    require_same_grid(g, eta.grid(), "weak_form_residual");
    if (i > g.nt) throw std::invalid_argument("weak_form_residual: time index out of range");
    std::vector<double> w_phi(g.nx + 1), w_phi_xx(g.nx + 1);
    for (std::size_t j = 0; j <= g.nx; ++j) {
        const double w = (j == 0 || j == g.nx) ? 0.5 * g.dx : g.dx;
        w_phi[j] = w * phi(g.x(j));
        w_phi_xx[j] = w * phi_xx(g.x(j));
    }
    auto pair = [&](std::span<const double> row, const std::vector<double>& w) {
        double s = 0.0;
        for (std::size_t j = 0; j <= g.nx; ++j) s += row[j] * w[j];
        return s;
    };
    double diffusion = 0.0;
    double reflection = 0.0;
    for (std::size_t m = 0; m < i; ++m) {
        diffusion += 0.5 * g.dt * (pair(z.row(m), w_phi_xx) + pair(z.row(m + 1), w_phi_xx));
        auto mrow = eta.mass.row(m + 1);
        for (std::size_t j = 0; j <= g.nx; ++j) reflection += mrow[j] * phi(g.x(j));
    }
    return pair(z.row(i), w_phi) - pair(z.row(0), w_phi) - diffusion - reflection;
}

}  // namespace rspde
