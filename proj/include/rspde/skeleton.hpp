#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rspde/coefficients.hpp"
#include "rspde/grid.hpp"
#include "rspde/obstacle.hpp"

namespace rspde {

/// Throws std::invalid_argument unless u0 has nx+1 finite entries, u0 >= 0 and u0(0) = 0.
void validate_initial(const Grid& grid, std::span<const double> u0);

/// Lattice samples of a function on the spatial nodes, with the value at x = 0 pinned to 0.
template <class F>
std::vector<double> sample_initial(const Grid& grid, F&& u0) {
    std::vector<double> out(grid.nx + 1);
    for (std::size_t j = 1; j <= grid.nx; ++j) out[j] = u0(grid.x(j));
    return out;
}

struct PicardIterate {
    Field v;  // mild-form part
    Field u;  // u = z + v
    ReflectionMeasure eta;
};

/// One Picard map: v_n = heat_convolve(u0, f(., u_prev) + sigma(., u_prev) gdot),
/// (z_n, eta_n) = obstacle solution with obstacle -v_n, u_n = z_n + v_n.
PicardIterate picard_step(const Field& u_prev, const Control& g, std::span<const double> u0, const Coefficients& coeffs,
                          const ObstacleOptions& obstacle = {});

struct SkeletonOptions {
    double tol = 1e-8;
    std::size_t max_iter = 60;
    /// Horizon of each restart window; the contraction constant grows with T.
    double window = 1.0;
    enum class Seed { initial_constant, zero } seed = Seed::initial_constant;
    /// Overrides `seed` when set (same grid as the control).
    std::optional<Field> initial_guess;
    /// Obstacle stepper; defaults to explicit projection when the grid allows it.
    std::optional<Stepper> stepper;
};

struct SkeletonSolution {
    Field u;
    ReflectionMeasure eta;
    std::size_t iterates = 0;
    double final_gap = 0.0;
    /// ||u_n - u_{n-1}||_{C_r^T} per iteration (windows concatenated).
    std::vector<double> gaps;

    /// JSON convergence record: {"iterates":..,"final_gap":..,"gaps":[..]}.
    std::string convergence_json() const;
};

class NonConvergence : public std::runtime_error {
public:
    NonConvergence(const std::string& what, std::vector<double> gaps)
        : std::runtime_error(what), gaps_(std::move(gaps)) {}
    const std::vector<double>& gaps() const { return gaps_; }

private:
    std::vector<double> gaps_;
};

/// Picard iteration to the fixed point of the skeleton equation.
/// Throws NonConvergence when max_iter is exceeded.
SkeletonSolution solve_skeleton(const Control& g, std::span<const double> u0, const Coefficients& coeffs,
                                const SkeletonOptions& options = {});

/// The skeleton map g -> u^g with default tolerances.
Field gamma0(const Control& g, std::span<const double> u0, const Coefficients& coeffs);

/// Lattice path of an explicit reflected Euler scheme.
struct SteppedPath {
    Field u;
    ReflectionMeasure eta;
};

/// Explicit reflected Euler for
///   du = (u_xx + f(x,u) + sigma(x,u) gdot) dt + noise_amplitude sigma(x,u) xi sqrt(dt/dx) + d eta,
/// projected onto u >= 0 each step, u = 0 at x = 0 and x = L.
/// `g` may be null (no control); `xi` holds nt*(nx+1) standard normals or is
/// empty (no noise). Throws std::invalid_argument unless dt <= dx^2/2.
SteppedPath reflected_fd_solve(const Grid& grid, const Coefficients& coeffs, std::span<const double> u0,
                               const Control* g, std::span<const double> xi, double noise_amplitude);

/// Finite-difference reference for the skeleton equation (noise-free reflected_fd_solve).
SteppedPath fd_reference(const Control& g, std::span<const double> u0, const Coefficients& coeffs);

}  // namespace rspde
