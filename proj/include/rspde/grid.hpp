#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace rspde {

/// Uniform space-time lattice on [0,T] x [0,L].
///
/// Nodes are (t_i, x_j) = (i*dt, j*dx) with i in 0..nt and j in 0..nx.
/// The half-line is truncated at x = L, where a homogeneous Dirichlet
/// condition is imposed by the finite-difference steppers.
struct Grid {
    double T = 1.0;
    double L = 1.0;
    std::size_t nt = 1;
    std::size_t nx = 2;
    double dt = 1.0;
    double dx = 0.5;
    /// True when dt <= dx^2/2, the explicit-Euler stability bound.
    bool explicit_stable = false;

    double t(std::size_t i) const { return static_cast<double>(i) * dt; }
    double x(std::size_t j) const { return static_cast<double>(j) * dx; }
    std::size_t time_nodes() const { return nt + 1; }
    std::size_t space_nodes() const { return nx + 1; }

    bool operator==(const Grid& o) const {
        return T == o.T && L == o.L && nt == o.nt && nx == o.nx;
    }
};

/// Throws std::invalid_argument for nonpositive T or L, nt < 1 or nx < 2.
Grid make_grid(double T, double L, std::size_t nt, std::size_t nx);

/// Grid with both steps halved (nt and nx doubled).
Grid refine(const Grid& g, std::size_t time_factor = 2, std::size_t space_factor = 2);

/// Throws std::invalid_argument("<what>: grid mismatch") unless a == b.
void require_same_grid(const Grid& a, const Grid& b, const char* what);

/// Scalar lattice over the nodes of a Grid, row-major by time.
class Field {
public:
    Field() = default;
    explicit Field(const Grid& grid, double fill = 0.0);

    const Grid& grid() const { return grid_; }

    double& operator()(std::size_t i, std::size_t j) { return values_[i * stride_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values_[i * stride_ + j]; }

    std::span<double> row(std::size_t i) { return {values_.data() + i * stride_, stride_}; }
    std::span<const double> row(std::size_t i) const { return {values_.data() + i * stride_, stride_}; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    bool all_finite() const;
    double min_value() const;
    double max_value() const;

    Field& operator+=(const Field& o);
    Field& operator-=(const Field& o);
    Field& operator*=(double c);

    bool operator==(const Field& o) const { return grid_ == o.grid_ && values_ == o.values_; }

private:
    Grid grid_{};
    std::size_t stride_ = 0;
    std::vector<double> values_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double c, Field a);

/// Exponential weight e^{-r x} of the L_r / C_r^T norms.
struct WeightParams {
    double r = 0.0;
};

/// max over i <= up_to and all j of e^{-r x_j} |field(i,j)|.
/// up_to = nt gives the discrete C_r^T norm; a single row gives ||.||_{t,L_r}.
double weighted_sup_norm(const Field& field, WeightParams w, std::size_t up_to);
double weighted_sup_norm(const Field& field, WeightParams w);

/// Weighted sup over the single time row i.
double weighted_row_norm(const Field& field, WeightParams w, std::size_t i);

/// Piecewise-constant Cameron-Martin density: one value of gdot per cell
/// [t_i, t_{i+1}) x [x_j, x_{j+1}), i < nt, j < nx.
class Control {
public:
    Control() = default;
    explicit Control(const Grid& grid, double fill = 0.0);

    /// Cell values from a function evaluated at the cell centre.
    template <class F>
    static Control from_function(const Grid& grid, F&& f) {
        Control c(grid);
        for (std::size_t i = 0; i < grid.nt; ++i) {
            for (std::size_t j = 0; j < grid.nx; ++j) {
                c(i, j) = f(grid.t(i) + 0.5 * grid.dt, grid.x(j) + 0.5 * grid.dx);
            }
        }
        return c;
    }

    const Grid& grid() const { return grid_; }
    double& operator()(std::size_t i, std::size_t j) { return gdot_[i * grid_.nx + j]; }
    double operator()(std::size_t i, std::size_t j) const { return gdot_[i * grid_.nx + j]; }
    std::span<double> values() { return gdot_; }
    std::span<const double> values() const { return gdot_; }

    /// Density seen by lattice node j during time step i: the mean of the
    /// two cells sharing that node (the single adjacent cell at x = 0, L).
    double at_node(std::size_t i, std::size_t j) const;

    Control& operator*=(double c);
    Control& operator+=(const Control& o);
    bool operator==(const Control& o) const { return grid_ == o.grid_ && gdot_ == o.gdot_; }

private:
    Grid grid_{};
    std::vector<double> gdot_;
};

Control operator+(Control a, const Control& b);
Control operator*(double c, Control a);

/// sqrt(sum gdot^2 dt dx): the exact H-norm of the step function.
double cm_norm(const Control& g);

/// Radial projection onto S_N = {||g||_H <= N}. Throws for N <= 0.
Control project_to_SN(const Control& g, double N);

// CSV with header `t,x,value`, row-major by time, 17 significant digits.
std::string field_to_csv(const Field& f, const char* value_name = "value");
std::string control_to_csv(const Control& g);
Field field_from_csv(const Grid& grid, const std::string& text);

}  // namespace rspde
