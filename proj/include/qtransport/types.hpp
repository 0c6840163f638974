// types.hpp: shared value types: lattice geometry, wave-packet and unit
// conventions, density matrices and errors.
//
// Units: every quantity is expressed in the natural units of the lattice
// (lengths in a, energies in J, times in hbar/J) unless a struct says otherwise.
#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qtransport {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;

// Error taxonomy; the CLI maps each class to a distinct exit code.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InvariantViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Boundary { periodic };

struct LatticeSpec {
    int sites = 100;       // M
    double spacing = 1.0;  // a
    double hopping = 1.0;  // J
    Boundary boundary = Boundary::periodic;

    void validate() const;
    double length() const { return sites * spacing; }
    // Ring momentum hbar * 2 pi n / (M a).
    double grid_momentum(int n, double hbar) const;
    bool operator==(const LatticeSpec&) const = default;
};

struct WavePacketSpec {
    double sigma = 10.0;  // position spread, |psi|^2 has variance sigma^2
    double p0 = 0.5;      // carrier momentum
    double x0 = 50.0;     // initial centre

    double reduced_de_broglie(double hbar) const { return hbar / p0; }
};

// energy_matched: m = 2 E_kin / v_g^2 with E_kin measured from the band bottom.
enum class MassConvention { band_edge, velocity_adapted, band_curvature, energy_matched };

std::string to_string(MassConvention c);
MassConvention mass_convention_from_string(const std::string& s);

struct UnitSystem {
    double hbar = 1.0;
    MassConvention convention = MassConvention::velocity_adapted;

    // Default rule: velocity-adapted above k0 a = 0.5, band-edge below.
    static UnitSystem for_carrier(const LatticeSpec& lattice, double p0, double hbar = 1.0);

    // Effective continuum mass for a carrier p0 on the given lattice.
    double mass(const LatticeSpec& lattice, double p0) const;
};

// Lattice group velocity (2 J a / hbar) sin(k a) at p = hbar k.
double group_velocity(const LatticeSpec& lattice, double p, double hbar);

// Nearest ring momentum to a target carrier momentum.
double nearest_grid_momentum(const LatticeSpec& lattice, double target, double hbar);

using DensityMatrix = CMatrix;

enum class Provenance { oracle, channels, lindblad, analytic, closed_form };
std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct AveragedStateSeries {
    std::vector<double> times;
    std::vector<DensityMatrix> states;
    Provenance provenance = Provenance::oracle;
    int realizations = 0;  // K

    void check_times() const;
};

// Structural checks on density matrices; return the measured defect.
double hermiticity_defect(const CMatrix& rho);
double trace_defect(const CMatrix& rho);

}  // namespace qtransport
