#include "rspde/spde.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "rspde/heat_kernel.hpp"
#include "rspde/skeleton.hpp"

namespace rspde {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Uniform on (0, 1] with 53 random bits.
double to_unit(std::uint64_t h) { return (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53; }

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) ^ splitmix64(index ^ 0xa0761d6478bd642fULL));
}

NoisePath sample_noise(const Grid& grid, std::uint64_t seed) {
    NoisePath out;
    out.grid = grid;
    out.seed = seed;
    const std::size_t n = grid.nt * (grid.nx + 1);
    out.xi.resize(n);
    const std::uint64_t key = splitmix64(seed);
    for (std::size_t pair = 0; 2 * pair < n; ++pair) {
        const double u1 = to_unit(splitmix64(key ^ (2 * pair)));
        const double u2 = to_unit(splitmix64(key ^ (2 * pair + 1)));
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        out.xi[2 * pair] = radius * std::cos(angle);
        if (2 * pair + 1 < n) out.xi[2 * pair + 1] = radius * std::sin(angle);
    }
    return out;
}

SpdePath simulate(double epsilon, const Coefficients& coeffs, std::span<const double> u0, const NoisePath& noise,
                  const Control* g) {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("simulate: epsilon must be >= 0");
    if (!(coeffs.constants().delta > 0.0)) throw std::invalid_argument("simulate: stochastic runs require delta > 0");
    const Grid& grid = noise.grid;
    if (!grid.explicit_stable) throw std::invalid_argument("simulate: explicit stepper refused, dt > dx^2/2");
    auto path = reflected_fd_solve(grid, coeffs, u0, g, noise.xi, std::sqrt(epsilon));
    return SpdePath{std::move(path.u), std::move(path.eta), epsilon, noise.seed};
}

MomentEstimate moment_from_norms(std::span<const double> norms, double p) {
    if (norms.empty()) throw std::invalid_argument("moment_norms: empty collection");
    if (!(p >= 1.0)) throw std::invalid_argument("moment_norms: p must be >= 1");
    MomentEstimate m;
    m.p = p;
    m.n = norms.size();
    double sum = 0.0;
    for (double v : norms) sum += std::pow(v, p);
    m.mean = sum / static_cast<double>(m.n);
    if (m.n == 1) {
        m.degenerate = true;
        return m;
    }
    double ss = 0.0;
    for (double v : norms) {
        const double d = std::pow(v, p) - m.mean;
        ss += d * d;
    }
    m.std_error = std::sqrt(ss / static_cast<double>(m.n - 1) / static_cast<double>(m.n));
    return m;
}

MomentEstimate moment_norms(const std::vector<Field>& paths, WeightParams w, double p) {
    std::vector<double> norms;
    norms.reserve(paths.size());
    for (const auto& f : paths) norms.push_back(weighted_sup_norm(f, w));
    return moment_from_norms(norms, p);
}

MomentEstimate moment_norms(const std::vector<Field>& paths, const Field& reference, WeightParams w, double p) {
    std::vector<double> norms;
    norms.reserve(paths.size());
    for (const auto& f : paths) norms.push_back(weighted_sup_norm(f - reference, w));
    return moment_from_norms(norms, p);
}

std::string path_csv_rows(std::size_t path_id, const Field& u) {
    const Grid& g = u.grid();
    std::string out;
    char buf[128];
    for (std::size_t i = 0; i <= g.nt; ++i) {
        for (std::size_t j = 0; j <= g.nx; ++j) {
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", path_id, g.t(i), g.x(j), u(i, j));
            out += buf;
        }
    }
    return out;
}

double stochastic_convolution_variance(double t, double x, double delta) {
    if (!(t > 0.0)) return 0.0;
    // e^{-2 delta y} G^2 = e^{-2 delta x} G_{-delta}^2; tau = w^2 removes the tau^{-1/2} singularity.
    const double tilt = std::exp(-2.0 * delta * x);
    auto integrand = [&](double w) {
        if (w <= 0.0) return 0.0;
        return 2.0 * w * tilt * kernel_difference_sq(w * w, x, 0.0, x, -delta);
    };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, std::sqrt(t), 15, 1e-13);
}

}  // namespace rspde
