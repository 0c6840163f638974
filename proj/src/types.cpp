#include "qtransport/types.hpp"

#include <cmath>
#include <sstream>

namespace qtransport {

void LatticeSpec::validate() const {
    if (sites < 8) throw ConfigError("lattice needs at least 8 sites");
    if (!(spacing > 0.0)) throw ConfigError("lattice spacing must be positive");
    if (!(hopping > 0.0)) throw ConfigError("hopping constant must be positive");
}

double LatticeSpec::grid_momentum(int n, double hbar) const {
    return hbar * 2.0 * kPi * n / length();
}

std::string to_string(MassConvention c) {
    switch (c) {
        case MassConvention::band_edge: return "band-edge";
        case MassConvention::velocity_adapted: return "velocity-adapted";
        case MassConvention::band_curvature: return "band-curvature";
        case MassConvention::energy_matched: return "energy-matched";
    }
    return "unknown";
}

MassConvention mass_convention_from_string(const std::string& s) {
    if (s == "band-edge") return MassConvention::band_edge;
    if (s == "velocity-adapted") return MassConvention::velocity_adapted;
    if (s == "band-curvature") return MassConvention::band_curvature;
    if (s == "energy-matched") return MassConvention::energy_matched;
    throw ConfigError("unknown mass convention '" + s + "'");
}

UnitSystem UnitSystem::for_carrier(const LatticeSpec& lattice, double p0, double hbar) {
    UnitSystem u;
    u.hbar = hbar;
    const double ka = p0 * lattice.spacing / hbar;
    u.convention = std::abs(ka) > 0.5 ? MassConvention::velocity_adapted : MassConvention::band_edge;
    return u;
}

double group_velocity(const LatticeSpec& lattice, double p, double hbar) {
    return 2.0 * lattice.hopping * lattice.spacing / hbar * std::sin(p * lattice.spacing / hbar);
}

double UnitSystem::mass(const LatticeSpec& lattice, double p0) const {
    const double band_edge = hbar * hbar / (2.0 * lattice.hopping * lattice.spacing * lattice.spacing);
    switch (convention) {
        case MassConvention::band_edge: return band_edge;
        case MassConvention::velocity_adapted: {
            if (p0 == 0.0) return band_edge;
            const double v = group_velocity(lattice, p0, hbar);
            if (!(std::abs(v) > 0.0)) throw ConfigError("carrier sits at a band extremum, velocity-adapted mass undefined");
            return p0 / v;
        }
        case MassConvention::band_curvature: {
            const double c = std::cos(p0 * lattice.spacing / hbar);
            if (!(c > 0.0)) throw ConfigError("band curvature is not positive at the carrier momentum");
            return band_edge / c;
        }
        case MassConvention::energy_matched: {
            // 2 E_kin / v_g^2 = band_edge * 2 / (1 + cos ka)
            const double c = std::cos(p0 * lattice.spacing / hbar);
            if (!(1.0 + c > 1e-12)) throw ConfigError("carrier sits at the zone boundary, energy-matched mass undefined");
            return band_edge * 2.0 / (1.0 + c);
        }
    }
    return band_edge;
}

double nearest_grid_momentum(const LatticeSpec& lattice, double target, double hbar) {
    const double dp = lattice.grid_momentum(1, hbar);
    return std::round(target / dp) * dp;
}

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::oracle: return "oracle";
        case Provenance::channels: return "channels";
        case Provenance::lindblad: return "lindblad";
        case Provenance::analytic: return "analytic";
        case Provenance::closed_form: return "closed-form";
    }
    return "unknown";
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "oracle") return Provenance::oracle;
    if (s == "channels") return Provenance::channels;
    if (s == "lindblad") return Provenance::lindblad;
    if (s == "analytic") return Provenance::analytic;
    if (s == "closed-form") return Provenance::closed_form;
    throw ConfigError("unknown provenance '" + s + "'");
}

void AveragedStateSeries::check_times() const {
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) {
            std::ostringstream msg;
            msg << "sample times must be strictly increasing (index " << i << ")";
            throw InvariantViolation(msg.str());
        }
    }
}

double hermiticity_defect(const CMatrix& rho) { return (rho - rho.adjoint()).cwiseAbs().maxCoeff(); }

double trace_defect(const CMatrix& rho) { return std::abs(rho.trace() - Complex(1.0, 0.0)); }

}  // namespace qtransport
