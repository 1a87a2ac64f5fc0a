#include "rspde/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace rspde {

NodeFactors Coefficients::factors(double x) const {
    return {std::exp(constants_.r * x), diffusion_.R * std::exp(-diffusion_.delta * x)};
}

double Coefficients::f(const NodeFactors& k, double u) const {
    const double phi = drift_.kind == DriftFamily::Kind::affine ? u : std::tanh(u);
    double out = drift_.a * phi;
    if (drift_.b != 0.0) out += drift_.b * k.erx;
    return out;
}

double Coefficients::sigma(const NodeFactors& k, double u) const {
    if (zero_diffusion()) return 0.0;
    const double raw = k.damp * (diffusion_.c + diffusion_.d * u);
    const double env = k.damp * (k.erx + std::abs(u));
    return std::clamp(raw, -env, env);
}

double Coefficients::f(double x, double u) const { return f(factors(x), u); }
double Coefficients::sigma(double x, double u) const { return sigma(factors(x), u); }

bool Coefficients::additive_diffusion() const {
    return diffusion_.d == 0.0 && (constants_.r >= 0.0 ? std::abs(diffusion_.c) <= 1.0 : diffusion_.c == 0.0);
}

GrowthConstants sufficient_constants(const DriftFamily& f, const DiffusionFamily& s, double r) {
    GrowthConstants k;
    k.r = r;
    k.C11 = std::abs(f.a);
    k.C12 = std::max(std::abs(f.a), std::abs(f.b));
    // Clipping to the envelope can add slope R in u.
    k.C13 = std::abs(s.R) * std::max(std::abs(s.d), 1.0);
    k.R = std::abs(s.R);
    k.delta = s.delta;
    return k;
}

Coefficients Coefficients::with_sufficient_constants(const DriftFamily& f, const DiffusionFamily& sigma, double r) {
    return make(f, sigma, sufficient_constants(f, sigma, r));
}

Coefficients Coefficients::make(const DriftFamily& f, const DiffusionFamily& sigma, const GrowthConstants& k,
                                std::size_t samples, std::uint64_t seed) {
    if (k.C11 < 0 || k.C12 < 0 || k.C13 < 0 || k.R < 0 || k.delta < 0) {
        throw std::invalid_argument("Coefficients: constants must be nonnegative");
    }
    if (!std::isfinite(k.r)) throw std::invalid_argument("Coefficients: r must be finite");
    if (sigma.R < 0 || sigma.delta < 0) throw std::invalid_argument("Coefficients: sigma amplitude and damping must be >= 0");
    if (sigma.delta < k.delta) throw std::invalid_argument("Coefficients: sigma damping weaker than the declared delta");

    Coefficients c;
    c.drift_ = f;
    c.diffusion_ = sigma;
    c.constants_ = k;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw_u = [&] {
        // Mix O(1) and large magnitudes.
        const double mag = std::pow(10.0, -2.0 + 5.0 * unit(rng));
        return unit(rng) < 0.5 ? -mag : mag;
    };
    constexpr double slack = 1e-12;
    for (std::size_t n = 0; n < samples; ++n) {
        const double x = 20.0 * unit(rng);
        const double u = draw_u();
        const double v = unit(rng) < 0.2 ? u + 1e-3 * draw_u() : draw_u();
        const double erx = std::exp(k.r * x);
        const double edx = std::exp(-k.delta * x);
        const double du = std::abs(u - v);
        auto fail = [&](const char* clause) {
            throw std::invalid_argument(std::string("Coefficients: condition ") + clause + " violated at sampled point");
        };
        // Differences carry the rounding error of their operands.
        const double fu = c.f(x, u), fv = c.f(x, v), su = c.sigma(x, u), sv = c.sigma(x, v);
        const double round_f = 1e-14 * (std::abs(fu) + std::abs(fv));
        const double round_s = 1e-14 * (std::abs(su) + std::abs(sv));
        if (std::abs(fu - fv) > k.C11 * du * (1 + slack) + slack + round_f) fail("(I)");
        if (std::abs(fu) > k.C12 * (erx + std::abs(u)) * (1 + slack)) fail("(II)");
        if (std::abs(su - sv) > k.C13 * edx * du * (1 + slack) + slack + round_s) fail("(III)");
        if (std::abs(c.sigma(x, u)) > k.R * edx * (erx + std::abs(u)) * (1 + slack)) fail("(IV)");
    }
    return c;
}

}  // namespace rspde
