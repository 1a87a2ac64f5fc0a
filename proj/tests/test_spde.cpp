#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "rspde/skeleton.hpp"
#include "rspde/spde.hpp"

using namespace rspde;

namespace {

Coefficients additive(double delta) {
    return Coefficients::with_sufficient_constants({}, {1.0, delta, 1.0, 0.0}, 0.0);
}

Coefficients multiplicative() {
    return Coefficients::with_sufficient_constants({DriftFamily::Kind::saturating, -0.5, 0.0}, {1.0, 0.4, 0.2, 0.8}, 0.0);
}

std::vector<double> hump(const Grid& g, double amplitude) {
    return sample_initial(g, [amplitude](double x) { return amplitude * x * std::exp(-0.5 * x * x); });
}

double sup_abs(const Field& f) { return weighted_sup_norm(f, WeightParams{0.0}); }

}  // namespace

TEST_CASE("noise lattices are reproducible and seed-specific") {
    const Grid g = make_grid(0.5, 5.0, 200, 20);
    const auto a = sample_noise(g, 42);
    const auto b = sample_noise(g, 42);
    const auto c = sample_noise(g, 43);
    CHECK(a.xi == b.xi);
    CHECK(a.xi != c.xi);
    CHECK(a.xi.size() == g.nt * (g.nx + 1));
    CHECK(derive_seed(5, 0) != derive_seed(5, 1));
    CHECK(derive_seed(5, 0) != derive_seed(6, 0));
    CHECK(derive_seed(5, 3) == derive_seed(5, 3));
}

TEST_CASE("noise moments and neighbour correlations over a million cells") {
    const Grid g = make_grid(1.0, 10.0, 10000, 99);
    const auto n = sample_noise(g, 2024);
    const auto& xi = n.xi;
    const double count = static_cast<double>(xi.size());
    double mean = 0.0, sq = 0.0, lag_space = 0.0, lag_time = 0.0;
    for (double v : xi) {
        mean += v;
        sq += v * v;
    }
    mean /= count;
    const double var = sq / count - mean * mean;
    for (std::size_t k = 0; k + 1 < xi.size(); ++k) lag_space += xi[k] * xi[k + 1];
    const std::size_t stride = g.nx + 1;
    for (std::size_t k = 0; k + stride < xi.size(); ++k) lag_time += xi[k] * xi[k + stride];
    CHECK(std::abs(mean) < 5e-3);
    CHECK(std::abs(var - 1.0) < 5e-3);
    CHECK(std::abs(lag_space / count) < 5e-3);
    CHECK(std::abs(lag_time / count) < 5e-3);
}

TEST_CASE("zero diffusion and zero epsilon reduce to the deterministic scheme") {
    const Grid g = make_grid(0.5, 5.0, 200, 20);
    const auto u0 = hump(g, 2.0);
    const Control ctl = Control::from_function(g, [](double t, double x) { return std::sin(6.0 * t) * std::exp(-x); });

    const auto flat = Coefficients::with_sufficient_constants({DriftFamily::Kind::affine, -0.3, 0.0}, {0.0, 0.5, 1.0, 0.0}, 0.0);
    const auto p1 = simulate(1.0, flat, u0, sample_noise(g, 1), &ctl);
    const auto p2 = simulate(1.0, flat, u0, sample_noise(g, 2), &ctl);
    CHECK(p1.u == p2.u);

    const auto coeffs = multiplicative();
    const auto zero = simulate(0.0, coeffs, u0, sample_noise(g, 9), &ctl);
    const auto ref = fd_reference(ctl, u0, coeffs);
    CHECK(zero.u == ref.u);
    CHECK(zero.eta.mass == ref.eta.mass);
}

TEST_CASE("paths are nonnegative, pinned at x = 0 and reflect with nonnegative mass") {
    const Grid g = make_grid(0.5, 5.0, 200, 20);
    const auto path = simulate(1.0, multiplicative(), hump(g, 0.5), sample_noise(g, 77));
    CHECK(path.u.min_value() >= 0.0);
    CHECK(path.eta.mass.min_value() >= 0.0);
    CHECK(path.eta.total_mass() > 0.0);
    for (std::size_t i = 0; i <= g.nt; ++i) CHECK(path.u(i, 0) == 0.0);
    // Discrete complementarity: mass only where the path sits on the barrier.
    double worst = 0.0;
    for (std::size_t k = 0; k < path.u.values().size(); ++k) worst += path.u.values()[k] * path.eta.mass.values()[k];
    CHECK(worst == 0.0);
}

TEST_CASE("variance away from the barrier matches the exact lattice variance") {
    const double delta = 0.3;
    const Grid g = make_grid(0.5, 5.0, 500, 50);
    const auto coeffs = additive(delta);
    const auto u0 = hump(g, 20.0);
    const std::size_t j = 20;  // x = 2
    const std::size_t n = 10000;
    const auto finals = run_paths(n, 31, 1, 1.0, coeffs, u0, g, nullptr,
                                  [&](std::size_t, const SpdePath& p) { return p.u(g.nt, j); });
    double mean = 0.0, sq = 0.0;
    for (double v : finals) mean += v;
    mean /= static_cast<double>(n);
    for (double v : finals) sq += (v - mean) * (v - mean);
    const double var = sq / static_cast<double>(n - 1);

    std::vector<double> sigma(g.nx + 1);
    for (std::size_t m = 0; m <= g.nx; ++m) sigma[m] = std::exp(-delta * g.x(m));
    const double exact = oracle::lattice_variance(g, sigma, g.nt, j);
    const double se = exact * std::sqrt(2.0 / static_cast<double>(n - 1));
    CAPTURE(var);
    CAPTURE(exact);
    CHECK(std::abs(var - exact) < 3.0 * se);

    // The lattice variance approaches the continuum stochastic convolution.
    CHECK(exact == doctest::Approx(stochastic_convolution_variance(g.T, g.x(j), delta)).epsilon(0.05));
}

TEST_CASE("moment estimates: degenerate cases and refusal") {
    const Grid g = make_grid(0.5, 5.0, 200, 20);
    std::vector<Field> zeros(4, Field(g));
    const auto m = moment_norms(zeros, WeightParams{0.2}, 2.0);
    CHECK(m.mean == 0.0);
    CHECK(m.std_error == 0.0);
    CHECK_FALSE(m.degenerate);

    const auto one = moment_norms(std::vector<Field>{Field(g, 2.0)}, WeightParams{0.0}, 3.0);
    CHECK(one.degenerate);
    CHECK(one.mean == doctest::Approx(8.0));
    CHECK(one.std_error == 0.0);

    CHECK_THROWS_AS(moment_norms(std::vector<Field>{}, WeightParams{}, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(moment_from_norms(std::vector<double>{1.0}, 0.5), std::invalid_argument);

    const std::vector<double> norms{1.0, 2.0, 3.0};
    const auto est = moment_from_norms(norms, 2.0);
    CHECK(est.mean == doctest::Approx(14.0 / 3.0));
    CHECK(est.std_error == doctest::Approx(std::sqrt((std::pow(1 - 14.0 / 3, 2) + std::pow(4 - 14.0 / 3, 2) +
                                                      std::pow(9 - 14.0 / 3, 2)) / 2.0 / 3.0)));
}

TEST_CASE("fluctuations grow with epsilon and moments are stable in the sample size") {
    const Grid g = make_grid(0.5, 5.0, 200, 20);
    const auto coeffs = multiplicative();
    const auto u0 = hump(g, 1.0);
    const Field ref = fd_reference(Control(g), u0, coeffs).u;
    double prev_median = 0.0;
    for (double eps : {0.01, 0.1, 1.0}) {
        auto dev = run_paths(201, 5, 1, eps, coeffs, u0, g, nullptr,
                             [&](std::size_t, const SpdePath& p) { return sup_abs(p.u - ref); });
        std::nth_element(dev.begin(), dev.begin() + 100, dev.end());
        CHECK(dev[100] > prev_median);
        prev_median = dev[100];
    }

    const auto norms = run_paths(2000, 8, 1, 1.0, coeffs, u0, g, nullptr,
                                 [&](std::size_t, const SpdePath& p) { return sup_abs(p.u); });
    for (double p : {2.0, 4.0, 8.0}) {
        CAPTURE(p);
        const auto half = moment_from_norms(std::span<const double>(norms).first(1000), p);
        const auto full = moment_from_norms(norms, p);
        CHECK(std::isfinite(full.mean));
        CHECK(full.std_error < 0.1 * full.mean);
        CHECK(std::abs(half.mean - full.mean) < 3.0 * half.std_error);
    }
}

TEST_CASE("threads do not change results") {
    const Grid g = make_grid(0.5, 5.0, 200, 20);
    const auto coeffs = multiplicative();
    const auto u0 = hump(g, 1.0);
    auto stat = [](std::size_t, const SpdePath& p) { return p.u.max_value(); };
    CHECK(run_paths(16, 3, 1, 0.5, coeffs, u0, g, nullptr, stat) == run_paths(16, 3, 3, 0.5, coeffs, u0, g, nullptr, stat));
}

TEST_CASE("invalid stochastic runs are refused") {
    const Grid g = make_grid(0.5, 5.0, 200, 20);
    const auto u0 = hump(g, 1.0);
    const auto noise = sample_noise(g, 1);
    CHECK_THROWS_AS(simulate(-0.1, multiplicative(), u0, noise), std::invalid_argument);
    CHECK_THROWS_AS(simulate(1.0, additive(0.0), u0, noise), std::invalid_argument);
    const Grid coarse = make_grid(0.5, 5.0, 10, 20);
    CHECK_THROWS_AS(simulate(1.0, multiplicative(), hump(coarse, 1.0), sample_noise(coarse, 1)), std::invalid_argument);
}

TEST_CASE("path CSV rows carry the path id") {
    const Grid g = make_grid(1.0, 1.0, 2, 2);
    const std::string rows = path_csv_rows(7, Field(g, 0.5));
    CHECK(rows.rfind("7,", 0) == 0);
    CHECK(std::count(rows.begin(), rows.end(), '\n') == 9);
}
