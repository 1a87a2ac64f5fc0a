#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rspde/coefficients.hpp"
#include "rspde/grid.hpp"
#include "rspde/skeleton.hpp"

namespace rspde {

/// Coarse control lattice: bilinear hat functions on an nt_c x nx_c node grid
/// over [0,T] x [0,x_max], expanded onto the fine cells (zero beyond x_max).
class ControlBasis {
public:
    ControlBasis(const Grid& grid, std::size_t nt_coarse, std::size_t nx_coarse, double x_max);

    std::size_t size() const { return nt_c_ * nx_c_; }
    const Grid& grid() const { return grid_; }

    Control expand(std::span<const double> coeffs) const;
    /// Gram matrix of the basis in H (row-major size() x size()): ||expand(c)||^2 = c^T M c.
    const std::vector<double>& gram() const { return gram_; }

private:
    Grid grid_;
    std::size_t nt_c_, nx_c_;
    double x_max_;
    // Fine-cell weights of each basis function: cell index -> (basis index, weight).
    std::vector<std::vector<std::pair<std::size_t, double>>> cell_weights_;
    std::vector<double> gram_;
};

struct RateOptions {
    std::size_t nt_coarse = 3;
    std::size_t nx_coarse = 3;
    double x_max = 2.0;
    /// Radius of the admissible ball S_N.
    double N_max = 10.0;
    /// Penalty weights, applied in order.
    std::vector<double> schedule{1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8};
    std::size_t iterations_per_stage = 12;
    /// Feasibility threshold on ||Gamma0(g) - h||_{C_r^T} for accepting an iterate.
    double gap_threshold = 1e-3;
    /// Optional feasible control (same grid as h) to compete with the optimizer.
    std::optional<Control> g0;
};

struct RateResult {
    double value = 0.0;  // 1/2 ||g*||_H^2
    Control argmin;
    double target_gap = 0.0;  // ||Gamma0(g*) - h||_{C_r^T}
    bool feasible = false;    // target_gap <= gap_threshold
    std::vector<std::pair<double, double>> penalty_trace;  // (penalty weight, objective)
};

/// Upper estimate of I(h) = inf { 1/2 ||g||^2 : Gamma0(g) = h } by penalty
/// continuation on the coarse control lattice. Throws std::invalid_argument
/// unless h >= 0, h(.,0) = 0 and h(0,.) = u0.
RateResult rate_function(const Field& h, std::span<const double> u0, const Coefficients& coeffs,
                         const RateOptions& options = {});

struct ConditionRow {
    double index = 0.0;        // n for condition (a), epsilon for condition (b)
    double discrepancy = 0.0;  // d_n or m_p(epsilon)
    double std_error = 0.0;    // Monte Carlo error (condition b)
    double aux = 0.0;          // ||g_n||_H for (a), p for (b)
};

struct ConditionReport {
    std::string name;
    std::vector<ConditionRow> rows;
    bool monotone = false;
    double fitted_rate = 0.0;  // log-log slope of discrepancy against index
    bool passed = false;
    std::string verdict;

    std::string to_csv() const;
};

/// Perturbation family for condition (a).
struct PerturbationFamily {
    enum class Kind {
        /// g_n = g + amplitude * n^growth * sin(n pi t / T) 1_{x <= support}: weakly null when growth = 0.
        oscillatory,
        /// g_n = (1 - 1/n) g: strongly convergent.
        scaled,
    };
    Kind kind = Kind::oscillatory;
    double amplitude = 1.0;
    double support = 1.0;
    double growth = 0.0;
};

Control perturbed_control(const Control& g, const PerturbationFamily& family, double n);

/// d_n = ||Gamma0(g_n) - Gamma0(g)||_{C_r^T} for n in n_list. Passes when d_n is
/// nonincreasing past the second entry and d_{last} < 0.1 d_{first} (oscillatory),
/// or when the fitted rate lies in [-1.3, -0.7] (scaled).
/// Throws std::invalid_argument if g is outside S_N or the family norms grow with n.
ConditionReport condition_a_suite(const Control& g, double N, const std::vector<double>& n_list,
                                  const PerturbationFamily& family, std::span<const double> u0,
                                  const Coefficients& coeffs);

struct ConditionBOptions {
    std::vector<double> epsilons{1e-1, 1e-2, 1e-3, 1e-4};
    std::vector<double> ps{2.0};
    std::size_t n_paths = 1000;
    std::uint64_t master_seed = 1;
    unsigned threads = 1;
    /// Required log-log slope of m_2 against epsilon.
    double min_slope_p2 = 0.8;
};

/// m_p(eps) = E ||u~^eps - u_bar||^p with u~ the controlled SPDE and u_bar the
/// skeleton solution on the same stepping lattice; one report per p. Paths
/// share seeds across epsilon. Throws std::invalid_argument when delta = 0.
std::vector<ConditionReport> condition_b_suite(const Control& g, double N, std::span<const double> u0,
                                               const Coefficients& coeffs, const ConditionBOptions& options);

/// Event {||u^eps - Gamma0(0)||_{C_r^T} > c}, or a pointwise exceedance
/// {(u^eps - Gamma0(0))(t_i, x_j) > c} when `node` is set.
struct ExceedanceEvent {
    double threshold = 0.0;
    std::optional<std::pair<std::size_t, std::size_t>> node;
};

struct ScanRow {
    double epsilon = 0.0;
    std::size_t hits = 0;
    std::size_t n_paths = 0;
    double probability = 0.0;
    double eps_log_p = 0.0;  // NaN when censored
    bool censored = false;
    /// eps log P of the Gaussian law (NaN without a Gaussian reference).
    double gaussian_eps_log_p = 0.0;
};

struct ScanTable {
    std::vector<ScanRow> rows;
    /// eps log P moves monotonically toward its limit as eps decreases (uncensored rows).
    bool monotone = false;
    /// 1/2 ||g||^2 of the cheapest control found whose skeleton solution reaches the event.
    double reference_rate = 0.0;
    /// Pointwise event, f = 0 and sigma = R c e^{-delta x}: the unreflected
    /// solution is Gaussian with variance epsilon * gaussian_variance.
    bool gaussian_reference = false;
    double gaussian_variance = 0.0;
    /// c^2 / (2 gaussian_variance), the small-noise limit of -eps log P.
    double gaussian_rate = 0.0;
    std::string to_csv() const;
};

struct ScanOptions {
    std::vector<double> epsilons{1.0, 0.5, 0.25, 0.125};
    std::size_t n_paths = 10000;
    std::size_t min_hits = 30;
    std::uint64_t master_seed = 1;
    unsigned threads = 1;
};

ScanTable ldp_probability_scan(const ExceedanceEvent& event, std::span<const double> u0, const Coefficients& coeffs,
                               const Grid& grid, const ScanOptions& options);

/// Scale s >= 0 minimizing cost such that the skeleton response to s*direction
/// reaches the event, found by bisection; returns 1/2 ||s direction||^2
/// (infinity if not reached within the scale bound).
double event_cost_along(const Control& direction, const ExceedanceEvent& event, std::span<const double> u0,
                        const Coefficients& coeffs, double max_scale = 64.0);

}  // namespace rspde
