// Shared fixtures for the unit tests.
#pragma once

#include <random>

#include "qtransport/disorder.hpp"
#include "qtransport/lattice.hpp"
#include "qtransport/phase_space.hpp"
#include "qtransport/types.hpp"

namespace qtest {

using namespace qtransport;

struct Case {
    LatticeSpec lattice;
    WavePacketSpec packet;
    DisorderSpec disorder;
    UnitSystem units;

    ContinuumParams continuum() const { return ContinuumParams::from_lattice(lattice, packet, units, disorder); }
};

// Benchmark geometries on the M = 100 ring with the carrier snapped to the grid.
inline Case benchmark(int which, MassConvention mass = MassConvention::velocity_adapted) {
    Case c;
    const double w = which == 1 ? 0.05 : 0.1;
    const double ell = which == 1 ? 2.0 : 3.0;
    const double sigma = which == 2 ? 5.0 : 10.0;
    const double target = which == 1 ? 0.5 : 4.0 / 3.0;
    c.disorder = DisorderSpec::from_box_width(w, ell, 1);
    c.packet = WavePacketSpec{sigma, nearest_grid_momentum(c.lattice, target, 1.0), 50.0};
    c.units.convention = mass;
    return c;
}

// Random Hermitian, positive, unit-trace matrix.
inline CMatrix random_density(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    CMatrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = Complex(g(rng), g(rng));
    CMatrix rho = a * a.adjoint();
    return rho / rho.trace().real();
}

inline CMatrix random_unitary(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    CMatrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = Complex(g(rng), g(rng));
    Eigen::HouseholderQR<CMatrix> qr(a);
    return qr.householderQ() * CMatrix::Identity(n, n);
}

}  // namespace qtest
