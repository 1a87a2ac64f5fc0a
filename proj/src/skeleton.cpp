#include "rspde/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "rspde/heat_kernel.hpp"

namespace rspde {

void validate_initial(const Grid& grid, std::span<const double> u0) {
    if (u0.size() != grid.nx + 1) throw std::invalid_argument("initial condition: size does not match grid");
    if (u0[0] != 0.0) throw std::invalid_argument("initial condition: u0(0) must be 0");
    for (double v : u0) {
        if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("initial condition: u0 must be finite and >= 0");
    }
}

namespace {

Stepper pick_stepper(const Grid& g, const std::optional<Stepper>& requested) {
    if (requested) return *requested;
    return g.explicit_stable ? Stepper::explicit_projection : Stepper::implicit_lcp;
}

Field constant_in_time(const Grid& g, std::span<const double> u0) {
    Field f(g);
    for (std::size_t i = 0; i <= g.nt; ++i) std::copy(u0.begin(), u0.end(), f.row(i).begin());
    return f;
}

Control restrict_control(const Control& g, const Grid& window, std::size_t first_step) {
    Control out(window);
    for (std::size_t i = 0; i < window.nt; ++i) {
        for (std::size_t j = 0; j < window.nx; ++j) out(i, j) = g(first_step + i, j);
    }
    return out;
}

SkeletonSolution solve_window(const Control& g, std::span<const double> u0, const Coefficients& coeffs,
                              const SkeletonOptions& options, const std::optional<Field>& guess) {
    const Grid& grid = g.grid();
    const WeightParams w{coeffs.r()};
    ObstacleOptions obstacle;
    obstacle.stepper = pick_stepper(grid, options.stepper);

    Field prev = guess ? *guess
                       : (options.seed == SkeletonOptions::Seed::zero ? Field(grid) : constant_in_time(grid, u0));
    SkeletonSolution sol;
    for (std::size_t n = 1; n <= options.max_iter; ++n) {
        PicardIterate it = picard_step(prev, g, u0, coeffs, obstacle);
        const double gap = weighted_sup_norm(it.u - prev, w);
        sol.gaps.push_back(gap);
        prev = std::move(it.u);
        if (gap < options.tol) {
            sol.u = std::move(prev);
            sol.eta = std::move(it.eta);
            sol.iterates = n;
            sol.final_gap = gap;
            return sol;
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "solve_skeleton: no convergence after %zu iterations (last gap %.3e)",
                  options.max_iter, sol.gaps.empty() ? 0.0 : sol.gaps.back());
    throw NonConvergence(buf, sol.gaps);
}

}  // namespace

PicardIterate picard_step(const Field& u_prev, const Control& g, std::span<const double> u0, const Coefficients& coeffs,
                          const ObstacleOptions& obstacle) {
    const Grid& grid = g.grid();
    require_same_grid(grid, u_prev.grid(), "picard_step");
    validate_initial(grid, u0);

    std::vector<NodeFactors> factors(grid.nx + 1);
    for (std::size_t k = 0; k <= grid.nx; ++k) factors[k] = coeffs.factors(grid.x(k));
    Field source(grid);
    for (std::size_t m = 0; m < grid.nt; ++m) {
        auto prev = u_prev.row(m);
        auto src = source.row(m);
        for (std::size_t k = 1; k <= grid.nx; ++k) {
            src[k] = coeffs.f(factors[k], prev[k]) + coeffs.sigma(factors[k], prev[k]) * g.at_node(m, k);
        }
    }
    PicardIterate out;
    out.v = heat_convolve(grid, u0, source);
    ObstacleProblem problem{grid, -1.0 * out.v, WeightParams{coeffs.r()}};
    auto obs = solve_obstacle(problem, obstacle);
    out.u = obs.z + out.v;
    out.eta = std::move(obs.eta);
    return out;
}

SkeletonSolution solve_skeleton(const Control& g, std::span<const double> u0, const Coefficients& coeffs,
                                const SkeletonOptions& options) {
    if (!(options.tol > 0.0)) throw std::invalid_argument("solve_skeleton: tol must be positive");
    const Grid& grid = g.grid();
    validate_initial(grid, u0);
    if (options.initial_guess) require_same_grid(grid, options.initial_guess->grid(), "solve_skeleton");

    const auto steps_per_window = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(options.window / grid.dt + 1e-9)));
    if (steps_per_window >= grid.nt) return solve_window(g, u0, coeffs, options, options.initial_guess);

    // Restart on consecutive windows, each seeded with the previous terminal slice.
    SkeletonSolution total;
    total.u = Field(grid);
    total.eta = ReflectionMeasure(grid);
    std::vector<double> start(u0.begin(), u0.end());
    std::copy(start.begin(), start.end(), total.u.row(0).begin());
    for (std::size_t first = 0; first < grid.nt; first += steps_per_window) {
        const std::size_t steps = std::min(steps_per_window, grid.nt - first);
        const Grid wg = make_grid(static_cast<double>(steps) * grid.dt, grid.L, steps, grid.nx);
        std::optional<Field> guess;
        if (options.initial_guess) {
            Field gw(wg);
            for (std::size_t i = 0; i <= steps; ++i) {
                auto src = options.initial_guess->row(first + i);
                std::copy(src.begin(), src.end(), gw.row(i).begin());
            }
            guess = std::move(gw);
        }
        auto part = solve_window(restrict_control(g, wg, first), start, coeffs, options, guess);
        for (std::size_t i = 1; i <= steps; ++i) {
            auto ur = part.u.row(i);
            auto mr = part.eta.mass.row(i);
            std::copy(ur.begin(), ur.end(), total.u.row(first + i).begin());
            std::copy(mr.begin(), mr.end(), total.eta.mass.row(first + i).begin());
        }
        auto last = part.u.row(steps);
        for (std::size_t j = 0; j <= grid.nx; ++j) start[j] = j == 0 ? 0.0 : std::max(0.0, last[j]);
        total.iterates += part.iterates;
        total.final_gap = std::max(total.final_gap, part.final_gap);
        total.gaps.insert(total.gaps.end(), part.gaps.begin(), part.gaps.end());
    }
    return total;
}

Field gamma0(const Control& g, std::span<const double> u0, const Coefficients& coeffs) {
    return solve_skeleton(g, u0, coeffs).u;
}

std::string SkeletonSolution::convergence_json() const {
    std::string out = "{\"iterates\":" + std::to_string(iterates);
    char buf[64];
    std::snprintf(buf, sizeof buf, ",\"final_gap\":%.17g,\"gaps\":[", final_gap);
    out += buf;
    for (std::size_t k = 0; k < gaps.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%s%.17g", k ? "," : "", gaps[k]);
        out += buf;
    }
    out += "]}";
    return out;
}

SteppedPath reflected_fd_solve(const Grid& grid, const Coefficients& coeffs, std::span<const double> u0,
                               const Control* g, std::span<const double> xi, double noise_amplitude) {
    validate_initial(grid, u0);
    if (!grid.explicit_stable) throw std::invalid_argument("reflected_fd_solve: explicit stepper refused, dt > dx^2/2");
    if (g) require_same_grid(grid, g->grid(), "reflected_fd_solve");
    const bool noisy = !xi.empty() && noise_amplitude != 0.0;
    if (noisy && xi.size() != grid.nt * (grid.nx + 1)) throw std::invalid_argument("reflected_fd_solve: noise lattice size");

    SteppedPath path{Field(grid), ReflectionMeasure(grid)};
    std::copy(u0.begin(), u0.end(), path.u.row(0).begin());
    std::vector<double> incr(grid.nx + 1, 0.0);
    const double noise_scale = noise_amplitude * std::sqrt(grid.dt / grid.dx);
    std::vector<NodeFactors> k(grid.nx + 1);
    for (std::size_t j = 0; j <= grid.nx; ++j) k[j] = coeffs.factors(grid.x(j));
    for (std::size_t i = 0; i < grid.nt; ++i) {
        auto u = path.u.row(i);
        for (std::size_t j = 1; j < grid.nx; ++j) {
            const double s = coeffs.sigma(k[j], u[j]);
            const double gdot = g ? g->at_node(i, j) : 0.0;
            incr[j] = grid.dt * (coeffs.f(k[j], u[j]) + s * gdot);
            if (noisy) incr[j] += noise_scale * s * xi[i * (grid.nx + 1) + j];
        }
        reflected_euler_step(grid, u, incr, {}, path.u.row(i + 1), path.eta.mass.row(i + 1));
    }
    return path;
}

SteppedPath fd_reference(const Control& g, std::span<const double> u0, const Coefficients& coeffs) {
    return reflected_fd_solve(g.grid(), coeffs, u0, &g, {}, 0.0);
}

}  // namespace rspde
