#pragma once

#include <cstdint>
#include <string>

namespace rspde {

/// Drift f(x,u) = a*phi(u) + b*e^{r x}, with phi(u) = u (affine) or tanh(u) (saturating).
struct DriftFamily {
    enum class Kind { affine, saturating };
    Kind kind = Kind::affine;
    double a = 0.0;
    double b = 0.0;
};

/// Diffusion sigma(x,u) = R e^{-delta x} (c + d u), clipped to the growth
/// envelope |sigma| <= R e^{-delta x} (e^{r x} + |u|).
struct DiffusionFamily {
    double R = 0.0;
    double delta = 0.0;
    double c = 0.0;
    double d = 0.0;
};

/// Constants of the coefficient hypotheses:
///   (I)   |f(x,u) - f(x,v)|         <= C11 |u - v|
///   (II)  |f(x,u)|                  <= C12 (e^{r x} + |u|)
///   (III) |sigma(x,u) - sigma(x,v)| <= C13 e^{-delta x} |u - v|
///   (IV)  |sigma(x,u)|              <= R e^{-delta x} (e^{r x} + |u|)
struct GrowthConstants {
    double C11 = 0.0;
    double C12 = 0.0;
    double C13 = 0.0;
    double R = 0.0;
    double delta = 0.0;
    double r = 0.0;
};

/// x-dependent factors e^{r x} and R e^{-delta x}, cached per lattice node.
struct NodeFactors {
    double erx = 1.0;
    double damp = 0.0;
};

class Coefficients {
public:
    /// Validates (I)-(IV) on `samples` random (x,u,v) triples; any violation
    /// throws std::invalid_argument naming the failed clause.
    static Coefficients make(const DriftFamily& f, const DiffusionFamily& sigma, const GrowthConstants& k,
                             std::size_t samples = 10000, std::uint64_t seed = 0x5eedc0ef);

    /// Builds with constants that the families satisfy by construction.
    static Coefficients with_sufficient_constants(const DriftFamily& f, const DiffusionFamily& sigma, double r);

    double f(double x, double u) const;
    double sigma(double x, double u) const;
    NodeFactors factors(double x) const;
    double f(const NodeFactors& k, double u) const;
    double sigma(const NodeFactors& k, double u) const;

    const DriftFamily& drift() const { return drift_; }
    const DiffusionFamily& diffusion() const { return diffusion_; }
    const GrowthConstants& constants() const { return constants_; }
    double r() const { return constants_.r; }

    /// sigma vanishes identically.
    bool zero_diffusion() const { return diffusion_.R == 0.0 || (diffusion_.c == 0.0 && diffusion_.d == 0.0); }
    /// sigma does not depend on u (d = 0 and the envelope never clips).
    bool additive_diffusion() const;

private:
    DriftFamily drift_;
    DiffusionFamily diffusion_;
    GrowthConstants constants_;
};

/// Sufficient constants for the given families at weight rate r.
GrowthConstants sufficient_constants(const DriftFamily& f, const DiffusionFamily& sigma, double r);

}  // namespace rspde
