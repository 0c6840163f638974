// lattice.hpp: exact single-realization propagation on the tight-binding ring
// and brute-force disorder averaging (the reference oracle).
#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "qtransport/disorder.hpp"
#include "qtransport/types.hpp"

namespace qtransport {

// H = -J sum_n (|n><n+1| + h.c.) + diag(V_n), periodic wrap.
RMatrix build_hamiltonian(const LatticeSpec& lattice, const PotentialRealization& potential);
RMatrix build_hamiltonian(const LatticeSpec& lattice, std::span<const double> potential);

// Discretized Gaussian wave packet exp[-(x-x0)^2/(4 sigma^2) + i p0 x / hbar],
// normalized on the lattice. The envelope uses the minimal ring distance to x0.
CVector init_gaussian_packet(const LatticeSpec& lattice, const WavePacketSpec& packet, double hbar = 1.0);

// Exact propagator exp(-i H t / hbar) from one eigendecomposition.
class SpectralPropagator {
public:
    explicit SpectralPropagator(const RMatrix& hamiltonian, double hbar = 1.0);

    CVector evolve(const CVector& psi0, double t) const;
    const RVector& energies() const { return energies_; }
    const RMatrix& eigenvectors() const { return vectors_; }
    double hbar() const { return hbar_; }

private:
    RVector energies_;
    RMatrix vectors_;
    double hbar_;
};

struct StateTrajectory {
    std::vector<double> times;
    std::vector<CVector> states;
};

// Snapshots at the requested times; throws InvariantViolation if the norm or
// the energy drifts (1e-10 and 1e-9 relative respectively).
StateTrajectory propagate_realization(const RMatrix& hamiltonian, const CVector& psi0,
                                      std::span<const double> times, double hbar = 1.0);

// Oracle ensemble with the per-realization trajectories kept for resampling.
struct OracleEnsemble {
    AveragedStateSeries series;
    std::vector<StateTrajectory> trajectories;
    std::vector<std::uint64_t> seeds;
};

OracleEnsemble run_oracle_ensemble(const DisorderSpec& spec, const LatticeSpec& lattice,
                                   const WavePacketSpec& packet, int realizations,
                                   std::span<const double> times, std::uint64_t base_seed,
                                   double hbar = 1.0);

// Same ensemble on explicit potentials (used by the cross-path comparisons).
OracleEnsemble run_oracle_ensemble(const LatticeSpec& lattice, std::span<const PotentialRealization> potentials,
                                   const CVector& psi0, std::span<const double> times, double hbar = 1.0);

// rho_bar(t) = (1/K) sum_eps |psi_eps(t)><psi_eps(t)|.
AveragedStateSeries ensemble_density_series(const DisorderSpec& spec, const LatticeSpec& lattice,
                                            const WavePacketSpec& packet, int realizations,
                                            std::span<const double> times, std::uint64_t base_seed,
                                            double hbar = 1.0);

// Average of the given trajectories at snapshot index `sample`.
DensityMatrix average_density(std::span<const StateTrajectory> trajectories, std::size_t sample);

// Binary snapshot dump. Layout (little-endian): 8-byte magic "QTRHO\0v1",
// uint64 M, uint64 T, T float64 times, then T row-major M x M blocks of
// (re, im) float64 pairs.
void write_density_dump(std::ostream& os, const AveragedStateSeries& series);
AveragedStateSeries read_density_dump(std::istream& is);

}  // namespace qtransport
