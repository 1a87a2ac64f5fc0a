#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "rspde/heat_kernel.hpp"

using namespace rspde;

namespace {

// Trapezoid over [0, ymax] with n panels.
template <class F>
double trapezoid(F&& f, double ymax, std::size_t n) {
    const double h = ymax / static_cast<double>(n);
    double s = 0.5 * (f(0.0) + f(ymax));
    for (std::size_t k = 1; k < n; ++k) s += f(h * static_cast<double>(k));
    return s * h;
}

}  // namespace

TEST_CASE("kernel point values") {
    CHECK(kernel(1.0, 1.0, 1.0) == doctest::Approx((1.0 - std::exp(-1.0)) / std::sqrt(4.0 * std::numbers::pi)));
    CHECK(kernel(1.0, 1.0, 1.0) == doctest::Approx(0.17831792).epsilon(1e-7));
    CHECK(kernel(1.0, 0.0, 2.0) == 0.0);
    CHECK(kernel(0.3, 2.0, 0.0) == 0.0);
    CHECK_THROWS_AS(kernel(0.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(kernel(-1.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("kernel symmetry, sign and tilt identities") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 2000; ++k) {
        const double t = std::pow(10.0, -3.0 + 4.0 * u(rng));
        const double x = 6.0 * u(rng), y = 6.0 * u(rng), r = 4.0 * u(rng) - 2.0;
        CHECK(kernel(t, x, y) >= 0.0);
        CHECK(kernel(t, x, y) == kernel(t, y, x));
        CHECK(kernel_r(t, x, y, 0.0) == kernel(t, x, y));
        CHECK(kernel_r(t, x, x, r) == kernel(t, x, x));
        CHECK(kernel_r(t, x, y, r) * std::exp(-r * y) == doctest::Approx(std::exp(-r * x) * kernel(t, x, y)).epsilon(1e-13));
    }
    CHECK(kernel_r(1.0, 2.0, 1.0, 0.5) == doctest::Approx(std::exp(-0.5) * kernel(1.0, 2.0, 1.0)).epsilon(1e-15));
}

TEST_CASE("kernel mass is at most one and tends to one away from the boundary") {
    for (double t : {0.01, 0.1, 1.0}) {
        for (double x : {0.05, 0.5, 2.0, 5.0}) {
            const double ymax = x + 12.0 * std::sqrt(t) + 1.0;
            const double mass = trapezoid([&](double y) { return kernel(t, x, y); }, ymax, 40000);
            CHECK(mass <= 1.0 + 1e-6);
            CHECK(mass == doctest::Approx(std::erf(x / (2.0 * std::sqrt(t)))).epsilon(1e-6));
        }
    }
    const double far = trapezoid([](double y) { return kernel(0.01, 5.0, y); }, 7.0, 40000);
    CHECK(far == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("Chapman-Kolmogorov identity") {
    for (double s : {0.05, 0.3}) {
        for (double t : {0.1, 0.7}) {
            for (double x : {0.3, 1.5}) {
                for (double y : {0.2, 2.0}) {
                    const double lhs = trapezoid([&](double z) { return kernel(s, x, z) * kernel(t, z, y); }, 12.0, 20000);
                    CHECK(lhs == doctest::Approx(kernel(s + t, x, y)).epsilon(1e-3));
                }
            }
        }
    }
}

TEST_CASE("closed-form squared kernel integrals match quadrature") {
    for (double r : {-0.5, 0.0, 0.5}) {
        for (double tau : {0.01, 0.2, 1.0}) {
            for (double x : {0.1, 1.0, 3.0}) {
                auto g2 = [&](double z) {
                    const double d = kernel_r(tau, x, z, r) - kernel_r(0.5 * tau, x + 0.2, z, r);
                    return d * d;
                };
                const double q = trapezoid(g2, 30.0, 60000);
                CHECK(kernel_difference_sq(tau, x, 0.5 * tau, x + 0.2, r) == doctest::Approx(q).epsilon(1e-6));
                const double q1 = trapezoid([&](double z) { return std::pow(kernel_r(tau, x, z, r), 2); }, 30.0, 60000);
                CHECK(kernel_difference_sq(tau, x, 0.0, x, r) == doctest::Approx(q1).epsilon(1e-6));
                const double m = trapezoid([&](double z) { return kernel(tau, x, z) * std::exp(r * z); }, 30.0, 60000);
                CHECK(kernel_exp_moment(tau, x, r) == doctest::Approx(m).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("heat_convolve: zero data gives the zero field") {
    const Grid g = make_grid(1.0, 5.0, 50, 20);
    const std::vector<double> u0(g.nx + 1, 0.0);
    CHECK(heat_convolve(g, u0, Field(g)) == Field(g));
    CHECK_THROWS_AS(heat_convolve(g, u0, Field(make_grid(1.0, 5.0, 51, 20))), std::invalid_argument);
    CHECK_THROWS_AS(heat_convolve(g, std::vector<double>(3, 0.0), Field(g)), std::invalid_argument);
}

TEST_CASE("heat_convolve: initial spike follows the semigroup") {
    const Grid g = make_grid(1.0, 10.0, 1000, 200);
    const double e0 = 0.05, y0 = 2.0;
    std::vector<double> u0(g.nx + 1);
    for (std::size_t j = 1; j <= g.nx; ++j) u0[j] = kernel(e0, g.x(j), y0);
    const Field u = heat_convolve(g, u0, Field(g));
    for (std::size_t i : {g.nt / 10, g.nt / 2, g.nt}) {
        double worst = 0.0, peak = 0.0;
        for (std::size_t j = 0; j <= g.nx; ++j) {
            const double exact = kernel(g.t(i) + e0, g.x(j), y0);
            worst = std::max(worst, std::abs(u(i, j) - exact));
            peak = std::max(peak, exact);
        }
        CHECK(worst / peak < 0.02);
    }
}

TEST_CASE("heat_convolve: unit source against the erf oracle") {
    const Grid g = make_grid(1.0, 12.0, 400, 120);
    const std::vector<double> u0(g.nx + 1, 0.0);
    const Field one(g, 1.0);
    const Field u = heat_convolve(g, u0, one);
    for (std::size_t i : {g.nt / 4, g.nt}) {
        for (std::size_t j : {5, 10, 20, 40}) {
            CHECK(u(i, j) == doctest::Approx(oracle::unit_source_response(g.t(i), g.x(j))).epsilon(0.01));
        }
    }
}

TEST_CASE("heat_convolve agrees with the term-by-term lattice sum") {
    const Grid g = make_grid(1.0, 6.0, 120, 30);
    std::vector<double> u0(g.nx + 1);
    for (std::size_t j = 1; j <= g.nx; ++j) u0[j] = g.x(j) * std::exp(-g.x(j));
    Field src(g);
    for (std::size_t i = 0; i <= g.nt; ++i) {
        for (std::size_t j = 0; j <= g.nx; ++j) src(i, j) = std::sin(7.0 * g.t(i)) * std::exp(-g.x(j)) + 0.3;
    }
    const Field a = heat_convolve(g, u0, src);
    const Field b = heat_convolve_direct(g, u0, src);
    CHECK(weighted_sup_norm(a - b, WeightParams{}) < 1e-12 * weighted_sup_norm(b, WeightParams{}));
    CHECK(heat_flow(g, u0) == heat_convolve(g, u0, Field(g)));
}

TEST_CASE("estimate suite rejects p <= 4 and reports the scaling exponents") {
    const Grid g = make_grid(1.0, 4.0, 64, 16);
    CHECK_THROWS_AS(estimate_suite(4.0, 0.0, g), std::invalid_argument);
    const auto rep = estimate_suite(6.0, 0.0, g);
    CHECK(rep.fit("i").expected_exponent == 0.5);
    CHECK(rep.fit("i").fitted_slope == doctest::Approx(0.5).epsilon(0.3));
    CHECK(rep.fit("iii").fitted_slope == doctest::Approx(1.0).epsilon(0.2));
    CHECK(rep.fit("l1").fitted_constant <= 1.0 + 1e-6);
    CHECK(rep.to_csv().rfind("quantity,p,r,lag,value,fitted_slope,fitted_constant\n", 0) == 0);
    CHECK_THROWS(rep.fit("iv"));
}
