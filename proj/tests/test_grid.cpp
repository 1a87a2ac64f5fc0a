#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "rspde/grid.hpp"

using namespace rspde;

TEST_CASE("make_grid derives steps and the stability flag") {
    const Grid a = make_grid(1.0, 10.0, 1000, 100);
    CHECK(a.dt == doctest::Approx(0.001));
    CHECK(a.dx == doctest::Approx(0.1));
    CHECK(a.explicit_stable);

    const Grid b = make_grid(1.0, 10.0, 10, 100);
    CHECK(b.dt == doctest::Approx(0.1));
    CHECK_FALSE(b.explicit_stable);

    CHECK_THROWS_AS(make_grid(0.0, 1.0, 1, 2), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(1.0, -1.0, 1, 2), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(1.0, 1.0, 0, 2), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(1.0, 1.0, 1, 1), std::invalid_argument);
}

TEST_CASE("refine multiplies the step counts") {
    const Grid g = refine(make_grid(1.0, 2.0, 10, 4));
    CHECK(g.nt == 20);
    CHECK(g.nx == 8);
    CHECK(refine(make_grid(1.0, 2.0, 10, 4), 4, 2).nt == 40);
}

TEST_CASE("weighted sup norm: simple cases") {
    const Grid g = make_grid(1.0, 3.0, 4, 6);
    CHECK(weighted_sup_norm(Field(g), WeightParams{0.7}) == 0.0);

    const double r = 0.8;
    Field e(g);
    for (std::size_t i = 0; i <= g.nt; ++i) {
        for (std::size_t j = 0; j <= g.nx; ++j) e(i, j) = std::exp(r * g.x(j));
    }
    CHECK(weighted_sup_norm(e, WeightParams{r}) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(weighted_sup_norm(e, WeightParams{r}, g.nt + 1), std::invalid_argument);
}

TEST_CASE("weighted sup norm matches an exhaustive scan on a 5x5 grid") {
    const Grid g = make_grid(1.0, 2.0, 4, 4);
    std::mt19937_64 rng(42);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 20; ++trial) {
        const double r = 2.0 * n01(rng);
        Field f(g);
        for (double& v : f.values()) v = n01(rng);
        for (std::size_t up = 0; up <= g.nt; ++up) {
            double best = 0.0;
            for (std::size_t i = 0; i <= up; ++i) {
                for (std::size_t j = 0; j <= g.nx; ++j) best = std::max(best, std::exp(-r * 0.5 * j) * std::abs(f(i, j)));
            }
            CHECK(weighted_sup_norm(f, WeightParams{r}, up) == doctest::Approx(best).epsilon(1e-14));
        }
        CHECK(weighted_row_norm(f, WeightParams{r}, 2) <= weighted_sup_norm(f, WeightParams{r}));
    }
}

TEST_CASE("weighted sup norm is a monotone seminorm in time") {
    const Grid g = make_grid(1.0, 4.0, 10, 20);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 50; ++trial) {
        const WeightParams w{n01(rng)};
        Field u(g), v(g);
        for (double& x : u.values()) x = n01(rng);
        for (double& x : v.values()) x = n01(rng);
        const double c = 3.0 * n01(rng);
        CHECK(weighted_sup_norm(c * u, w) == doctest::Approx(std::abs(c) * weighted_sup_norm(u, w)).epsilon(1e-14));
        CHECK(weighted_sup_norm(u + v, w) <= weighted_sup_norm(u, w) + weighted_sup_norm(v, w) + 1e-12);
        for (std::size_t t = 1; t <= g.nt; ++t) CHECK(weighted_sup_norm(u, w, t) >= weighted_sup_norm(u, w, t - 1));
    }
}

TEST_CASE("Cameron-Martin norm of step controls") {
    const Grid g = make_grid(2.0, 3.0, 40, 30);
    CHECK(cm_norm(Control(g)) == 0.0);
    CHECK(cm_norm(Control(g, 1.5)) == doctest::Approx(1.5 * std::sqrt(2.0 * 3.0)).epsilon(1e-13));

    // sin^2 averages to 1/2 over whole periods at cell centres; unit support in x.
    for (int n : {1, 3, 8, 17}) {
        const auto psi = Control::from_function(g, [&](double t, double x) {
            return x <= 1.0 ? std::sin(n * std::numbers::pi * t / g.T) : 0.0;
        });
        CHECK(cm_norm(psi) == doctest::Approx(std::sqrt(g.T / 2.0)).epsilon(1e-12));
    }
}

TEST_CASE("projection onto S_N") {
    const Grid g = make_grid(1.0, 1.0, 10, 10);
    CHECK(project_to_SN(Control(g), 1.0) == Control(g));
    const Control two(g, 2.0);  // norm 2
    const Control p = project_to_SN(two, 1.0);
    for (double v : p.values()) CHECK(v == doctest::Approx(1.0));
    const Control half(g, 0.5);
    CHECK(project_to_SN(half, 1.0) == half);
    CHECK_THROWS_AS(project_to_SN(half, 0.0), std::invalid_argument);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 100; ++trial) {
        Control c(g);
        for (double& v : c.values()) v = 10.0 * n01(rng);
        const double N = std::abs(n01(rng)) + 1e-3;
        CHECK(cm_norm(project_to_SN(c, N)) <= N * (1.0 + 1e-12));
    }
}

TEST_CASE("control node values average neighbouring cells") {
    const Grid g = make_grid(1.0, 1.0, 2, 4);
    Control c(g);
    for (std::size_t j = 0; j < 4; ++j) c(1, j) = static_cast<double>(j);
    CHECK(c.at_node(1, 0) == 0.0);
    CHECK(c.at_node(1, 2) == 1.5);
    CHECK(c.at_node(1, 4) == 3.0);
}

TEST_CASE("CSV round trip is exact") {
    const Grid g = make_grid(0.3, 1.7, 3, 5);
    Field f(g);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n01;
    for (double& v : f.values()) v = n01(rng) * 1e-7 + n01(rng);
    const std::string csv = field_to_csv(f, "u");
    CHECK(csv.rfind("t,x,u\n", 0) == 0);
    CHECK(field_from_csv(g, csv) == f);
    CHECK(control_to_csv(Control(g, 1.0)).rfind("t,x,value\n", 0) == 0);
    CHECK_THROWS_AS(field_from_csv(make_grid(0.3, 1.7, 4, 5), csv), std::invalid_argument);
}

TEST_CASE("grid mismatches are rejected") {
    Field a(make_grid(1.0, 1.0, 2, 2)), b(make_grid(1.0, 1.0, 3, 2));
    CHECK_THROWS_AS(a += b, std::invalid_argument);
}
