#include "rspde/heat_kernel.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "rspde/parallel.hpp"

namespace rspde {

double kernel(double t, double x, double y) {
    if (!(t > 0.0)) throw std::invalid_argument("kernel: t must be positive");
    const double a = x - y;
    const double b = x + y;
    return (std::exp(-a * a / (4.0 * t)) - std::exp(-b * b / (4.0 * t))) / std::sqrt(4.0 * std::numbers::pi * t);
}

double kernel_r(double t, double x, double y, double r) {
    return std::exp(-r * (x - y)) * kernel(t, x, y);
}

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;

// Kernel matrix K(j,k) = scale * w_k * G(tau, x_j, y_k) with trapezoid weights w.
void fill_kernel_matrix(Matrix& K, const Grid& g, double tau, double scale) {
    const std::size_t n = g.nx + 1;
    const double norm = scale / std::sqrt(4.0 * std::numbers::pi * tau);
    const double inv4t = 1.0 / (4.0 * tau);
    for (std::size_t k = 0; k < n; ++k) {
        const double w = (k == 0 || k == g.nx) ? 0.5 : 1.0;
        const double y = g.x(k);
        for (std::size_t j = 0; j < n; ++j) {
            const double x = g.x(j);
            const double a = x - y;
            const double b = x + y;
            K(j, k) = w * norm * (std::exp(-a * a * inv4t) - std::exp(-b * b * inv4t));
        }
    }
}

}  // namespace

Field heat_convolve(const Grid& grid, std::span<const double> u0, const Field& source) {
    require_same_grid(grid, source.grid(), "heat_convolve");
    if (u0.size() != grid.nx + 1) throw std::invalid_argument("heat_convolve: u0 size does not match grid");
    // The lattice sum is evaluated through the sine expansion of the kernel on
    // [0, L2] with L2 far enough past L that the extra image terms and the
    // truncated modes are below double precision for every lag >= dt/2:
    //   G(tau,x,y) = (2/L2) sum_n sin(k_n x) sin(k_n y) exp(-k_n^2 tau).
    // In that basis the time sum becomes a per-mode recursion.
    const std::size_t n = grid.nx + 1;
    const std::size_t nt = grid.nt;
    const double L2 = grid.L + 2.0 * std::sqrt(40.0 * grid.T) + 1.0;
    const double k_max = std::sqrt(80.0 / grid.dt);
    const auto modes = static_cast<std::size_t>(std::ceil(k_max * L2 / std::numbers::pi)) + 1;

    Matrix basis(n, modes);  // sin(k_n x_j)
    Eigen::VectorXd decay(modes), half_decay(modes);
    for (std::size_t m = 0; m < modes; ++m) {
        const double k = static_cast<double>(m + 1) * std::numbers::pi / L2;
        decay(static_cast<Eigen::Index>(m)) = std::exp(-k * k * grid.dt);
        half_decay(static_cast<Eigen::Index>(m)) = std::exp(-0.5 * k * k * grid.dt);
        for (std::size_t j = 0; j < n; ++j) basis(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m)) = std::sin(k * grid.x(j));
    }
    // Trapezoid weights in y folded into the forward transform.
    Matrix forward = basis.transpose();
    for (std::size_t k = 0; k < n; ++k) {
        const double w = ((k == 0 || k == grid.nx) ? 0.5 : 1.0) * grid.dx;
        forward.col(static_cast<Eigen::Index>(k)) *= w;
    }

    Matrix S(n, nt);
    for (std::size_t m = 0; m < nt; ++m) {
        auto row = source.row(m);
        for (std::size_t k = 0; k < n; ++k) S(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)) = row[k];
    }
    const Matrix S_hat = forward * S;
    Eigen::Map<const Eigen::VectorXd> init(u0.data(), static_cast<Eigen::Index>(n));

    Matrix A(modes, nt + 1);
    A.col(0) = forward * init;
    for (std::size_t i = 1; i <= nt; ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        A.col(c) = decay.cwiseProduct(A.col(c - 1)) + grid.dt * half_decay.cwiseProduct(S_hat.col(c - 1));
    }
    const Matrix V = (2.0 / L2) * (basis * A);

    Field out(grid);
    std::copy(u0.begin(), u0.end(), out.row(0).begin());
    for (std::size_t i = 1; i <= nt; ++i) {
        auto row = out.row(i);
        for (std::size_t j = 1; j < n; ++j) row[j] = V(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
    }
    for (std::size_t i = 0; i <= nt; ++i) out(i, 0) = 0.0;
    return out;
}

Field heat_convolve_direct(const Grid& grid, std::span<const double> u0, const Field& source) {
    require_same_grid(grid, source.grid(), "heat_convolve_direct");
    if (u0.size() != grid.nx + 1) throw std::invalid_argument("heat_convolve_direct: u0 size does not match grid");
    const std::size_t n = grid.nx + 1;
    const std::size_t nt = grid.nt;

    Matrix V = Matrix::Zero(n, nt + 1);
    Matrix K(n, n);
    Eigen::Map<const Eigen::VectorXd> init(u0.data(), static_cast<Eigen::Index>(n));
    V.col(0) = init;
    for (std::size_t i = 1; i <= nt; ++i) {
        fill_kernel_matrix(K, grid, grid.t(i), grid.dx);
        V.col(static_cast<Eigen::Index>(i)).noalias() = K * init;
    }

    bool any_source = false;
    for (std::size_t i = 0; i < nt && !any_source; ++i) {
        for (double v : source.row(i)) {
            if (v != 0.0) {
                any_source = true;
                break;
            }
        }
    }
    if (any_source) {
        Matrix S(n, nt);
        for (std::size_t m = 0; m < nt; ++m) {
            auto row = source.row(m);
            for (std::size_t k = 0; k < n; ++k) S(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)) = row[k];
        }
        // V(:, i) += sum_{m < i} K_{i-m} S(:, m), grouped by lag for GEMM.
        for (std::size_t lag = 1; lag <= nt; ++lag) {
            fill_kernel_matrix(K, grid, (static_cast<double>(lag) - 0.5) * grid.dt, grid.dx * grid.dt);
            const auto cols = static_cast<Eigen::Index>(nt - lag + 1);
            V.middleCols(static_cast<Eigen::Index>(lag), cols).noalias() += K * S.leftCols(cols);
        }
    }

    Field out(grid);
    for (std::size_t i = 0; i <= nt; ++i) {
        auto row = out.row(i);
        for (std::size_t j = 1; j < n; ++j) row[j] = V(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
        row[0] = 0.0;
    }
    return out;
}

Field heat_flow(const Grid& grid, std::span<const double> u0) {
    return heat_convolve(grid, u0, Field(grid));
}

// ---------------------------------------------------------------- closed-form moments

namespace {

using ld = long double;

// coef * exp(-(z - mean)^2 / (4 tau)), with log|coef| and its sign kept apart.
struct GaussTerm {
    ld log_coef;
    int sign;
    ld mean;
    ld tau;
};

// int_0^inf exp(log_c + peak - alpha (z - centre)^2) dz
ld half_line_gaussian(ld log_c, ld alpha, ld centre, ld peak) {
    const ld e = std::erfc(-centre * std::sqrt(alpha));
    if (e == 0.0L) return 0.0L;
    return 0.5L * std::sqrt(std::numbers::pi_v<ld> / alpha) * std::exp(log_c + peak) * e;
}

// Adds the two image terms of e^{-r x} G(tau, x, .) with overall sign.
void push_kernel_terms(std::vector<GaussTerm>& out, ld tau, ld x, ld r, int sign) {
    const ld lc = -r * x - 0.5L * std::log(4.0L * std::numbers::pi_v<ld> * tau);
    out.push_back({lc, sign, x, tau});
    out.push_back({lc, -sign, -x, tau});
}

// int_0^inf (sum_k a_k(z))^2 e^{2 r z} dz
ld squared_integral(const std::vector<GaussTerm>& terms, ld r) {
    ld total = 0.0L;
    for (std::size_t k = 0; k < terms.size(); ++k) {
        for (std::size_t l = k; l < terms.size(); ++l) {
            const auto& a = terms[k];
            const auto& b = terms[l];
            // Product of the two Gaussians times e^{2 r z}, completed to a square.
            const ld tsum = a.tau + b.tau;
            const ld alpha = tsum / (4.0L * a.tau * b.tau);
            const ld mu = (a.mean * b.tau + b.mean * a.tau) / tsum;
            const ld dm = a.mean - b.mean;
            const ld peak = -dm * dm / (4.0L * tsum) + 2.0L * r * mu + r * r / alpha;
            const ld v = half_line_gaussian(a.log_coef + b.log_coef, alpha, mu + r / alpha, peak);
            total += (k == l ? 1.0L : 2.0L) * a.sign * b.sign * v;
        }
    }
    return total;
}

}  // namespace

double kernel_difference_sq(double tau1, double x1, double tau2, double x2, double r) {
    if (!(tau1 > 0.0)) throw std::invalid_argument("kernel_difference_sq: tau1 must be positive");
    std::vector<GaussTerm> terms;
    terms.reserve(4);
    push_kernel_terms(terms, tau1, x1, r, +1);
    if (tau2 > 0.0) push_kernel_terms(terms, tau2, x2, r, -1);
    return static_cast<double>(std::max(squared_integral(terms, r), 0.0L));
}

double kernel_exp_moment(double tau, double x, double r) {
    if (!(tau > 0.0)) throw std::invalid_argument("kernel_exp_moment: tau must be positive");
    const ld t = tau;
    const ld lc = -0.5L * std::log(4.0L * std::numbers::pi_v<ld> * t);
    const ld alpha = 1.0L / (4.0L * t);
    ld total = 0.0L;
    for (int s : {+1, -1}) {
        const ld m = s * static_cast<ld>(x);
        total += s * half_line_gaussian(lc, alpha, m + 2.0L * r * t, r * m + r * r * t);
    }
    return static_cast<double>(total);
}

// ---------------------------------------------------------------- estimate suite

namespace {

using Rule = boost::math::quadrature::gauss<double, 8>;

// Composite 8-point Gauss-Legendre on [a,b] with `panels` panels.
template <class F>
double composite_gauss(F&& f, double a, double b, std::size_t panels) {
    if (!(b > a)) return 0.0;
    const double h = (b - a) / static_cast<double>(panels);
    double total = 0.0;
    for (std::size_t k = 0; k < panels; ++k) {
        const double lo = a + h * static_cast<double>(k);
        total += Rule::integrate(f, lo, lo + h);
    }
    return total;
}

struct TimeQuadrature {
    double p;
    std::size_t panels;

    double q() const { return p / (p - 2.0); }
    // Exponent m of tau = h w^m that turns the tau^{-q/2} endpoint singularity into w^1.
    double power() const { return 4.0 * (p - 2.0) / (p - 4.0); }

    // int_0^h F(tau)^q dtau for F ~ tau^{-1/2} at 0.
    template <class F>
    double near_zero(F&& inner, double h) const {
        const double m = power();
        const double qq = q();
        return composite_gauss(
            [&](double w) {
                if (w <= 0.0) return 0.0;
                const double tau = h * std::pow(w, m);
                if (!(tau > 0.0)) return 0.0;
                return h * m * std::pow(w, m - 1.0) * std::pow(inner(tau), qq);
            },
            0.0, 1.0, panels);
    }

    // int_a^b F(tau)^q dtau on a logarithmic scale (a > 0).
    template <class F>
    double log_scale(F&& inner, double a, double b) const {
        if (!(b > a)) return 0.0;
        const double qq = q();
        return composite_gauss(
            [&](double v) {
                const double tau = a * std::exp(v);
                return tau * std::pow(inner(tau), qq);
            },
            0.0, std::log(b / a), panels);
    }

    double outer(double integral) const { return std::pow(integral, (p - 2.0) / 2.0); }
};

std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double f = n == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n - 1);
        v[k] = lo * std::pow(hi / lo, f);
    }
    return v;
}

EstimateFit fit_loglog(const std::string& name, double expected, const std::vector<double>& lags,
                       const std::vector<double>& values) {
    const std::size_t n = lags.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    double constant = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double lx = std::log(lags[k]);
        const double ly = std::log(values[k]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        constant = std::max(constant, values[k] / std::pow(lags[k], expected));
    }
    const double dn = static_cast<double>(n);
    const double denom = dn * sxx - sx * sx;
    EstimateFit f;
    f.quantity = name;
    f.expected_exponent = expected;
    f.fitted_slope = denom != 0.0 ? (dn * sxy - sx * sy) / denom : 0.0;
    f.fitted_constant = constant;
    return f;
}

}  // namespace

const EstimateFit& EstimateReport::fit(const std::string& quantity) const {
    for (const auto& f : fits) {
        if (f.quantity == quantity) return f;
    }
    throw std::invalid_argument("EstimateReport::fit: unknown quantity " + quantity);
}

std::string EstimateReport::to_csv() const {
    std::string out = "quantity,p,r,lag,value,fitted_slope,fitted_constant\n";
    char buf[256];
    for (const auto& s : samples) {
        const auto& f = fit(s.quantity);
        std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.quantity.c_str(), s.p, s.r, s.lag,
                      s.value, f.fitted_slope, f.fitted_constant);
        out += buf;
    }
    return out;
}

EstimateReport estimate_suite(double p, double r, const Grid& grid, unsigned threads) {
    if (!(p > 4.0)) throw std::invalid_argument("estimate_suite: p must exceed 4");
    const double T = grid.T;
    const TimeQuadrature quad{p, std::max<std::size_t>(4, grid.nt / 8)};
    const std::size_t n_x = std::max<std::size_t>(4, std::min<std::size_t>(grid.nx, 16));
    const auto xs = log_spaced(std::min(0.1, grid.L / 4.0), grid.L, n_x);
    const std::size_t n_lag = 10;
    const auto time_lags = log_spaced(1e-4 * T, 1e-2 * T, n_lag);
    const auto space_lags = log_spaced(1e-3, 1e-1, n_lag);

    std::vector<double> q1(n_lag), q2(n_lag), q3(n_lag);
    parallel_for(n_lag, threads, [&](std::size_t k) {
        const double h = time_lags[k];
        const double d = space_lags[k];
        double best1 = 0.0, best2 = 0.0, best3 = 0.0;
        for (double x : xs) {
            // (i): only t - s matters.
            const double v1 = quad.near_zero([&](double tau) { return kernel_difference_sq(tau, x, 0.0, x, r); }, h);
            best1 = std::max(best1, quad.outer(v1));

            // (ii): s = T/2, t = s + h; tau = s - u.
            const double s = 0.5 * T;
            auto inner2 = [&](double tau) { return kernel_difference_sq(tau + h, x, tau, x, r); };
            const double v2 = quad.near_zero(inner2, std::min(h, s)) + quad.log_scale(inner2, std::min(h, s), s);
            best2 = std::max(best2, quad.outer(v2));

            // (iii): s = T, y = x + d.
            auto inner3 = [&](double tau) { return kernel_difference_sq(tau, x, tau, x + d, r); };
            const double split = std::min(d * d, T);
            const double v3 = quad.near_zero(inner3, split) + quad.log_scale(inner3, split, T);
            best3 = std::max(best3, quad.outer(v3));
        }
        q1[k] = best1;
        q2[k] = best2;
        q3[k] = best3;
    });

    // L1 convolution bound with u = e^{r x}: ratio sup_x e^{-rx} int_0^t int G e^{ry} / t.
    const auto l1_times = log_spaced(T / 16.0, T, 5);
    std::vector<double> l1(l1_times.size());
    parallel_for(l1_times.size(), threads, [&](std::size_t k) {
        const double t = l1_times[k];
        double best = 0.0;
        for (double x : xs) {
            const double v = composite_gauss([&](double sigma) { return sigma > 0.0 ? kernel_exp_moment(sigma, x, r) : 0.0; },
                                             0.0, t, quad.panels);
            best = std::max(best, std::exp(-r * x) * v / t);
        }
        l1[k] = best;
    });

    EstimateReport rep;
    rep.p = p;
    rep.r = r;
    for (std::size_t k = 0; k < n_lag; ++k) rep.samples.push_back({"i", p, r, time_lags[k], q1[k]});
    for (std::size_t k = 0; k < n_lag; ++k) rep.samples.push_back({"ii", p, r, time_lags[k], q2[k]});
    for (std::size_t k = 0; k < n_lag; ++k) rep.samples.push_back({"iii", p, r, space_lags[k], q3[k]});
    for (std::size_t k = 0; k < l1.size(); ++k) rep.samples.push_back({"l1", p, r, l1_times[k], l1[k]});

    rep.fits.push_back(fit_loglog("i", (p - 4.0) / 4.0, time_lags, q1));
    rep.fits.push_back(fit_loglog("ii", (p - 4.0) / 4.0, time_lags, q2));
    rep.fits.push_back(fit_loglog("iii", (p - 4.0) / 2.0, space_lags, q3));
    EstimateFit l1fit;
    l1fit.quantity = "l1";
    l1fit.expected_exponent = 0.0;
    l1fit.fitted_slope = 0.0;
    l1fit.fitted_constant = *std::max_element(l1.begin(), l1.end());
    rep.fits.push_back(l1fit);
    return rep;
}

}  // namespace rspde
