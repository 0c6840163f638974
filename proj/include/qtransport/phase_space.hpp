// phase_space.hpp: continuum propagation solution for the disorder-averaged
// state in characteristic-function form, its closed-form corollaries, the
// transport timescales and the Mach-Zehnder visibility.
//
// The averaged characteristic function evolves as
//   chi_t(s, q) = chi_0(s - q t / m, q) exp[-F_t(s, q)],
// with F_t a q'-integral of G(q') against a double time integral. The t_2
// integral and the t_1 integral are elementary and are evaluated in closed
// form (simplex integrals of exponentials); only the q' integral is numerical.
#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qtransport/disorder.hpp"
#include "qtransport/observables.hpp"
#include "qtransport/quadrature.hpp"
#include "qtransport/types.hpp"

namespace qtransport {

struct ContinuumParams {
    double mass = 0.5;
    double p0 = 1.0;
    double sigma = 10.0;
    double hbar = 1.0;
    DisorderSpec disorder;

    // p0 = hbar k0, mass from the unit system, lengths in lattice units.
    static ContinuumParams from_lattice(const LatticeSpec& lattice, const WavePacketSpec& packet,
                                        const UnitSystem& units, const DisorderSpec& disorder);

    // Throws ConfigError for p0 <= 0 or non-positive scales; warns when
    // 4 m^2 C0 / p0^4 >= 0.1.
    void validate() const;

    double de_broglie() const { return hbar / p0; }
    double velocity() const { return p0 / mass; }
    // sigma(t)^2 = sigma^2 + (hbar t / 2 m sigma)^2
    double width_at(double t) const;
};

using CharFunction = std::function<Complex(double s, double q)>;

// Characteristic function of the Gaussian packet:
// exp[(i/hbar)(p0 s - q x0)] exp[-s^2/(8 sigma^2) - q^2 sigma^2 / (2 hbar^2)].
Complex gaussian_char_value(const WavePacketSpec& packet, double s, double q, double hbar = 1.0);
CharFunction gaussian_char(const WavePacketSpec& packet, double hbar = 1.0);

struct InfluenceOptions {
    double abs_tol = 1e-11;
    double rel_tol = 1e-9;
    double range_in_inverse_ell = 8.0;   // |q'| <= range * hbar / ell
    double resonance_window = 4.0;       // extra half-width (hbar/ell) around q' = +-2 p0
    double max_error = 1e-7;             // estimated error above this is a NumericalFailure
};

// Disorder influence F_t(s, q) on a q' rule shared by every (s, q) at a fixed
// time. The rule is built adaptively on probe points covering |s| <= s_max,
// |q| <= q_max.
class DisorderInfluence {
public:
    DisorderInfluence(const ContinuumParams& params, double t, double s_max, double q_max,
                      const InfluenceOptions& opts = {});

    Complex operator()(double s, double q) const;
    // F_t(s, 0) and its first two s-derivatives at s = 0 are cheaper special cases.
    Complex at_zero_q(double s) const;
    double time() const { return t_; }
    double error_estimate() const { return error_; }
    std::size_t nodes() const { return rule_.size(); }
    const std::vector<double>& qprime_nodes() const { return rule_.nodes; }
    const std::vector<double>& weighted_spectrum() const { return g_weights_; }

    // The s-independent and s-dependent parts of the integrand at q'.
    struct Kernel {
        Complex shifted;  // multiplies exp(i q' s / hbar)
        Complex fixed;
    };
    Kernel kernel(double qp, double q) const;

private:
    ContinuumParams params_;
    double t_;
    quad::Rule rule_;
    std::vector<double> g_weights_;  // w_k G(q'_k)
    double error_ = 0.0;
};

// Error-controlled single evaluation (fresh adaptive rule). Throws
// NumericalFailure when the estimated error exceeds opts.max_error.
Complex disorder_influence(const ContinuumParams& params, double s, double q, double t,
                           const InfluenceOptions& opts = {});

// Fully numerical cross-check: q', t1 and t2 all by adaptive quadrature.
Complex disorder_influence_numeric(const ContinuumParams& params, double s, double q, double t, double tol = 1e-10);

struct CharGrid {
    std::vector<double> s;  // symmetric about 0, odd count
    std::vector<double> q;  // symmetric about 0, odd count
    CMatrix values;         // values(i, j) = chi(s_i, q_j)
    double time = 0.0;
    double hbar = 1.0;
    std::string units = "s:a q:hbar/a";

    Complex at(std::size_t i, std::size_t j) const { return values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); }
    double normalization_defect() const;  // |chi(0,0) - 1|
    double hermiticity_defect() const;    // max |chi(-s,-q) - conj chi(s,q)|
};

struct GridOptions {
    int points = 257;               // per axis, odd so that the origin is a node
    double s_halfwidth_sigmas = 8;  // in units of the s-width 2 sigma(t) of |chi|
    double q_halfwidth = 8;         // in units of hbar / sigma
    InfluenceOptions influence;
};

CharGrid evolve_char(const CharFunction& chi0, const ContinuumParams& params, double t, const GridOptions& opts = {});

// P_t(p) = (1/2 pi hbar) int ds exp(-i p s / hbar) chi_t(s, 0) on the given momenta
// (trapezoidal in s); throws ConfigError if |chi(s, 0)| >= 1e-6 at the s boundary.
MomentumDistribution momentum_dist_from_char(const CharGrid& grid, const std::vector<double>& momenta);

// r = (1/2 pi hbar) int ds dq chi(s,q) chi(-s,-q), trapezoidal. Throws
// NumericalFailure when |chi| on the grid boundary exceeds 1e-6.
double purity_from_char(const CharGrid& grid);

// Analytic-path observables for the Gaussian packet, evaluated without a grid.
struct AnalyticOptions {
    double oversample = 0.75;    // resolution factor over the estimated integrand bandwidth
    double gaussian_reach = 6.5; // trapezoid half-range in units of the Gaussian weights' scale
    InfluenceOptions influence;
};

// <p>(t) = p0 + (2/hbar^2) int dq' G(q') q' (1 - cos a_+ t)/a_+^2
double analytic_mean_momentum(const ContinuumParams& params, double t, const InfluenceOptions& opts = {});
// hbar^2/(4 sigma^2) + (2/hbar^2) int dq' G(q') q'^2 (1 - cos a_+ t)/a_+^2
double analytic_momentum_variance(const ContinuumParams& params, double t, const InfluenceOptions& opts = {});
// Purity of the Gaussian packet in the sheared variables u = s - q t / m and q.
double analytic_purity(const ContinuumParams& params, double t, const AnalyticOptions& opts = {});
// Momentum density from chi_t(s, 0) sampled densely in s.
MomentumDistribution analytic_momentum_distribution(const ContinuumParams& params, double t,
                                                    const std::vector<double>& momenta,
                                                    const InfluenceOptions& opts = {});

ObservableSeries analytic_series(const ContinuumParams& params, const std::vector<double>& times,
                                 const AnalyticOptions& opts = {});

// ----- closed-form corollaries ---------------------------------------------

struct RegimeFlags {
    bool valid = true;
    std::vector<std::string> warnings;
};

template <class T>
struct Flagged {
    T value;
    RegimeFlags flags;
};

// P0(p) + w(t) [P0(p + 2 p0) - P0(p)], w = 2 pi m t G(2 p0) / (p0 hbar).
// `p0_density` evaluates the initial momentum density.
struct BackscatterResult {
    MomentumDistribution distribution;
    double transferred_weight = 0.0;
    RegimeFlags flags;
};
BackscatterResult backscatter_approx(const std::function<double(double)>& p0_density, const std::vector<double>& momenta,
                                     const ContinuumParams& params, double t);
double backscatter_weight(const ContinuumParams& params, double t);
// d<p>/dt from backscattering: -4 pi m G(2 p0) / hbar.
double backscatter_momentum_slope(const ContinuumParams& params);

// Closed Gaussian-correlation form of the mean momentum shift.
double mean_momentum_closed(const ContinuumParams& params, double t);
// Quadrature form p0 + (t^2/hbar^2) int G(q') q' sinc^2[(q' t / 4 m hbar)(q' + 2 p0)].
double mean_momentum_quadrature(const ContinuumParams& params, double t, const InfluenceOptions& opts = {});
// Plateau p0 - 2 m^2 C0 / p0^3.
double mean_momentum_plateau(const ContinuumParams& params);

// hbar^2/(4 sigma^2) + 2 m^2 C0 / p0^2, and the relative increase 8 m^2 C0 sigma^2 / (hbar^2 p0^2).
double variance_plateau(const ContinuumParams& params);
double variance_relative_increase(const ContinuumParams& params);

// 1 - (2 m^2 C0 ell / hbar^2 p0^2)(sqrt(ell^2 + 3 sigma^2 + sigma(t)^2) - ell).
Flagged<double> purity_approx(const ContinuumParams& params, double t);

struct Timescales {
    double decorrelation = 0.0;          // ell m / p0
    double backscatter_dominance = 0.0;  // hbar m C0 / (2 pi p0^3 G(2 p0))
    double dispersion_dominance = 0.0;   // 2 m sigma^2 / hbar
    std::optional<double> transit;       // m L / p0
    bool weak_backscattering = false;    // p0 ell / hbar >= threshold
    std::optional<bool> low_dispersion;  // t_f <= t_dd
    double backscatter_ratio = 0.0;      // p0 ell / hbar
    std::optional<double> dispersion_ratio;  // t_f / t_dd = lambda L / (2 sigma^2)
};

// Regime thresholds are a factor of five by convention.
inline constexpr double kRegimeFactor = 5.0;

Timescales timescales(const ContinuumParams& params, std::optional<double> waveguide_length = std::nullopt);

struct MachZehnder {
    double plus = 0.5;
    double minus = 0.5;
    double visibility = 1.0;
};
// prob_pm = (1 +- ((r + 1)/2) sin phi) / 2.
MachZehnder mz_probabilities(double purity, double phi);

void write_char_grid_csv(std::ostream& os, const CharGrid& grid);
void write_distribution_csv(std::ostream& os, const MomentumDistribution& dist);

}  // namespace qtransport
