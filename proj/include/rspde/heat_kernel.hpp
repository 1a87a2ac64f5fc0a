#pragma once

#include <span>
#include <string>
#include <vector>

#include "rspde/grid.hpp"

namespace rspde {

/// Dirichlet heat kernel of d/dt - d^2/dx^2 on the half-line (method of images):
/// (4 pi t)^{-1/2} [exp(-(x-y)^2/4t) - exp(-(x+y)^2/4t)]. Throws for t <= 0.
double kernel(double t, double x, double y);

/// Exponentially tilted kernel e^{-r(x-y)} G(t,x,y).
double kernel_r(double t, double x, double y, double r);

/// Mild-form solution on the lattice:
///   int G(t,x,y) u0(y) dy + int_0^t int G(t-s,x,y) source(s,y) dy ds.
/// Trapezoidal rule in y over [0,L]; in s the source is frozen at the left
/// endpoint of each step and the kernel is evaluated at the step midpoint,
/// so the lag closest to s = t uses t - s = dt/2.
/// `u0` has nx+1 entries. Row 0 of the result is u0 itself; column 0 is zero.
/// The trapezoid rule aliases a kernel narrower than dx: the relative error of
/// the newest lag is about 2 exp(-2 pi^2 dt / dx^2), so keep dt / dx^2 >= 0.25.
/// Refinement studies should hold dt / dx^2 fixed.
Field heat_convolve(const Grid& grid, std::span<const double> u0, const Field& source);

/// The same lattice sum evaluated term by term with explicit kernel values,
/// O(nx^2 nt^2). Kept as an independent route for cross-checks.
Field heat_convolve_direct(const Grid& grid, std::span<const double> u0, const Field& source);

/// heat_convolve with zero source.
Field heat_flow(const Grid& grid, std::span<const double> u0);

/// One sampled value of an integral estimate.
struct EstimateSample {
    std::string quantity;  // "i", "ii", "iii" or "l1"
    double p = 0.0;
    double r = 0.0;
    double lag = 0.0;      // |t-s| for i/ii, |x-y| for iii, t for l1
    double value = 0.0;
};

/// Log-log fit of one quantity against its lag.
struct EstimateFit {
    std::string quantity;
    double expected_exponent = 0.0;
    double fitted_slope = 0.0;
    /// max over lags of value / lag^expected_exponent.
    double fitted_constant = 0.0;
};

struct EstimateReport {
    double p = 0.0;
    double r = 0.0;
    std::vector<EstimateSample> samples;
    std::vector<EstimateFit> fits;  // i, ii, iii, l1 (l1: constant only, slope 0 expected)

    const EstimateFit& fit(const std::string& quantity) const;
    /// `quantity,p,r,lag,value,fitted_slope,fitted_constant`
    std::string to_csv() const;
};

/// Squared-L2 (in z over [0,inf)) of G_r(tau1,x1,.) - G_r(tau2,x2,.).
/// tau2 <= 0 drops the second kernel. Evaluated in closed form.
double kernel_difference_sq(double tau1, double x1, double tau2, double x2, double r);

/// int_0^inf G(tau,x,y) e^{r y} dy in closed form.
double kernel_exp_moment(double tau, double x, double r);

/// Samples the appendix kernel-integral quantities
///   (i)   sup_x ( int_s^t [int G_r(t-u,x,z)^2 dz]^{p/(p-2)} du )^{(p-2)/2}
///   (ii)  sup_x ( int_0^s [int |G_r(t-u,x,z)-G_r(s-u,x,z)|^2 dz]^{p/(p-2)} du )^{(p-2)/2}
///   (iii) ( int_0^s [int |G_r(s-u,x,z)-G_r(s-u,y,z)|^2 dz]^{p/(p-2)} du )^{(p-2)/2}
/// over log-spaced lags, fits log-log slopes and empirical constants, and
/// checks the L1 convolution bound with u = e^{r x}.
/// `grid` supplies the horizon T, the range of sampled x (up to L) and the
/// quadrature resolution (nt nodes in time, nx sampled positions).
/// Throws for p <= 4.
EstimateReport estimate_suite(double p, double r, const Grid& grid, unsigned threads = 1);

}  // namespace rspde
