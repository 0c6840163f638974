// quadrature.hpp: quadrature rules and the stable elementary integrals used by
// the phase-space path.
#pragma once

#include <complex>
#include <functional>
#include <vector>

namespace qtransport::quad {

struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }
};

// n-point Gauss-Legendre rule on [lo, hi].
Rule gauss_legendre(int n, double lo, double hi);

// n-point Gauss-Hermite rule for int exp(-x^2) f(x) dx (Golub-Welsch).
Rule gauss_hermite(int n);

struct AdaptiveOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    int max_panels = 200000;
};

struct CompositeRule {
    Rule rule;
    double error_estimate = 0.0;  // Kronrod-Gauss difference summed over panels
    bool converged = true;
};

// Vector-valued probe integrand: fills `out` with several complex values at x.
using ProbeFn = std::function<void(double x, std::vector<std::complex<double>>& out)>;

// Builds a composite 15-point Kronrod rule on [lo, hi] by bisecting panels
// until every probe component integrates to tolerance. `breaks` are forced
// panel boundaries inside (lo, hi) and `max_width` caps initial panel width.
CompositeRule adaptive_composite(const ProbeFn& probes, std::size_t probe_count, double lo, double hi,
                                 std::vector<double> breaks, double max_width, const AdaptiveOptions& opts);

// phi1(z) = int_0^1 exp(i z u) du.
std::complex<double> phi1(double z);

// Simplex integral D(X, Y) = int_{u,v >= 0, u+v <= 1} exp(i (X u + Y v)) du dv,
// evaluated without cancellation for clustered arguments.
std::complex<double> simplex_exp(double x, double y);

// psi(z) = int_0^1 (1 - u) exp(i z u) du = simplex_exp(0, z).
inline std::complex<double> ramp_exp(double z) { return simplex_exp(0.0, z); }

// (1 - cos(a t)) / a^2 with its t^2/2 limit at a = 0.
double one_minus_cos_over_sq(double a, double t);

}  // namespace qtransport::quad
