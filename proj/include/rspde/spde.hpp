#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <string>
#include <vector>

#include "rspde/coefficients.hpp"
#include "rspde/grid.hpp"
#include "rspde/obstacle.hpp"
#include "rspde/parallel.hpp"

namespace rspde {

/// Standard normals on the update lattice: one value per time step i < nt and
/// spatial node j <= nx. Entry (i, j) depends only on (seed, i, j).
struct NoisePath {
    Grid grid;
    std::uint64_t seed = 0;
    std::vector<double> xi;

    double operator()(std::size_t i, std::size_t j) const { return xi[i * (grid.nx + 1) + j]; }
};

/// Counter-based generation: SplitMix64 hashing of (seed, pair index) feeds a
/// Box-Muller transform, so lattices are reproducible bit for bit.
NoisePath sample_noise(const Grid& grid, std::uint64_t seed);

/// Seed of path `index` under a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

struct SpdePath {
    Field u;
    ReflectionMeasure eta;
    double epsilon = 0.0;
    std::uint64_t seed = 0;
};

/// Reflected stochastic heat equation (optionally controlled by g) by explicit
/// reflected Euler with noise increment sqrt(epsilon) sigma xi sqrt(dt/dx).
/// Requires delta > 0 in the coefficient constants, epsilon >= 0 and
/// dt <= dx^2/2; throws std::invalid_argument otherwise.
SpdePath simulate(double epsilon, const Coefficients& coeffs, std::span<const double> u0, const NoisePath& noise,
                  const Control* g = nullptr);

/// Monte Carlo estimate of E[X^p] with its standard error.
struct MomentEstimate {
    double p = 0.0;
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
    /// n == 1: the standard error is meaningless and reported as 0.
    bool degenerate = false;
};

/// Moments of precomputed norms. Throws for an empty sample or p < 1.
MomentEstimate moment_from_norms(std::span<const double> norms, double p);

/// E ||u||^p_{C_r^T} over the paths.
MomentEstimate moment_norms(const std::vector<Field>& paths, WeightParams w, double p);

/// E ||u - reference||^p_{C_r^T} over the paths.
MomentEstimate moment_norms(const std::vector<Field>& paths, const Field& reference, WeightParams w, double p);

/// Simulates paths 0..n-1 with seeds derive_seed(master, k) and returns
/// per_path(k, path) for each k in index order, independent of `threads`.
template <class F>
auto run_paths(std::size_t n_paths, std::uint64_t master_seed, unsigned threads, double epsilon,
               const Coefficients& coeffs, std::span<const double> u0, const Grid& grid, const Control* g, F&& per_path)
    -> std::vector<decltype(per_path(std::size_t{}, std::declval<const SpdePath&>()))> {
    using Stat = decltype(per_path(std::size_t{}, std::declval<const SpdePath&>()));
    std::vector<Stat> out(n_paths);
    parallel_for(n_paths, threads, [&](std::size_t k) {
        const NoisePath noise = sample_noise(grid, derive_seed(master_seed, k));
        out[k] = per_path(k, simulate(epsilon, coeffs, u0, noise, g));
    });
    return out;
}

/// Rows `path_id,t,x,u` for one path (no header).
std::string path_csv_rows(std::size_t path_id, const Field& u);

/// Continuum variance of the stochastic convolution with diffusion e^{-delta y}:
/// int_0^t int_0^inf G(t-s,x,y)^2 e^{-2 delta y} dy ds (closed form in y, quadrature in s).
double stochastic_convolution_variance(double t, double x, double delta = 0.0);

}  // namespace rspde
