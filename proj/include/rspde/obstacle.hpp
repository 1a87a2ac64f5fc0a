#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "rspde/grid.hpp"

namespace rspde {

/// Nonnegative per-node masses of a reflection measure. mass(i, j) is the
/// measure of the cell around node x_j over the step ending at t_i, so row 0
/// is always zero.
struct ReflectionMeasure {
    Field mass;

    ReflectionMeasure() = default;
    explicit ReflectionMeasure(const Grid& grid) : mass(grid) {}

    const Grid& grid() const { return mass.grid(); }
    double total_mass() const;
    std::string to_csv() const { return field_to_csv(mass, "mass"); }
};

/// Heat equation on the truncated half-line with a lower obstacle v.
struct ObstacleProblem {
    Grid grid;
    Field v;
    WeightParams weight;

    /// Throws std::invalid_argument unless v(t,0) = 0 for all t and v(0,.) <= 0.
    void validate() const;
};

enum class Stepper {
    /// Euler step followed by projection onto {z >= v}; needs dt <= dx^2/2.
    explicit_projection,
    /// Backward Euler step posed as a linear complementarity problem and
    /// solved by projected successive over-relaxation.
    implicit_lcp,
};

struct ObstacleOptions {
    Stepper stepper = Stepper::explicit_projection;
    /// Complementarity residual at which the projected relaxation stops.
    double lcp_tolerance = 1e-10;
    std::size_t lcp_max_sweeps = 200000;
};

struct ObstacleSolution {
    Field z;
    ReflectionMeasure eta;
};

/// Solves for (z, eta): z(0,.) = 0, z(.,0) = 0, z >= v, and eta supported on {z = v}.
/// Throws std::invalid_argument for an invalid obstacle, or for an explicit
/// stepper on a grid that violates dt <= dx^2/2.
ObstacleSolution solve_obstacle(const ObstacleProblem& problem, const ObstacleOptions& options = {});

/// sum (z - v)(i,j) * mass(i,j). Throws on grid mismatch.
double complementarity_residual(const Field& z, const Field& v, const ReflectionMeasure& eta);

/// One explicit reflected step on a single time row:
///   tilde_j = u_j + dt/dx^2 (u_{j-1} - 2 u_j + u_{j+1}) + increment_j,
///   next_j  = max(tilde_j, lower_j),   mass_j = (next_j - tilde_j) dx,
/// with tilde = 0 at both ends of the domain. An empty `increment` means zero;
/// an empty `lower` means the constant barrier 0.
void reflected_euler_step(const Grid& grid, std::span<const double> u, std::span<const double> increment,
                          std::span<const double> lower, std::span<double> next, std::span<double> mass);

struct StabilityResult {
    bool exact_match = false;  // v1 == v2: the ratio is undefined
    double ratio = 0.0;        // ||z1 - z2|| / ||v1 - v2|| in C_r^T
    double obstacle_gap = 0.0;
    double solution_gap = 0.0;
};

/// Empirical Lipschitz ratio of the obstacle-to-solution map for one pair.
StabilityResult stability_check(const Field& v1, const Field& v2, WeightParams weight,
                                const ObstacleOptions& options = {});

/// Residual of the weak form at time index i for a test function phi with phi(0) = 0:
///   int z(t_i) phi dx - int_0^{t_i} int z phi'' dx ds - int_0^{t_i} int phi d eta.
/// Space integrals by the trapezoidal rule, the time integral by the trapezoidal rule.
double weak_form_residual(const Field& z, const ReflectionMeasure& eta, std::size_t i,
                          const std::function<double(double)>& phi, const std::function<double(double)>& phi_xx);

}  // namespace rspde
