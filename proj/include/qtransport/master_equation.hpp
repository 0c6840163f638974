// master_equation.hpp: coupled disorder channels (exact for a finite
// ensemble) and the second-order time-local master equation in Lindblad form.
#pragma once

#include <span>
#include <vector>

#include "qtransport/disorder.hpp"
#include "qtransport/ode.hpp"
#include "qtransport/types.hpp"

namespace qtransport {

// rho_eps = rho_bar + delta_eps with sum_eps p_eps delta_eps = 0.
struct ChannelState {
    DensityMatrix rho_bar;
    std::vector<CMatrix> offsets;
    std::vector<double> weights;

    double zero_sum_defect() const;  // || sum p_eps delta_eps ||_F
};

// Mean Hamiltonian and recentred perturbations of a finite ensemble.
struct EnsembleSplit {
    RMatrix mean_hamiltonian;
    std::vector<RVector> perturbations;  // V_eps - mean, diagonal in the site basis
    std::vector<double> weights;
};
EnsembleSplit split_ensemble(const LatticeSpec& lattice, std::span<const PotentialRealization> potentials);

struct ChannelOptions {
    OdeOptions ode{1e-11, 1e-13, 0.01, 0.5, 2'000'000};
    double zero_sum_tolerance = 1e-10;
};

struct ChannelRun {
    AveragedStateSeries series;
    ChannelState final_state;
    OdeStats stats;
    double worst_zero_sum = 0.0;
};

ChannelRun integrate_coupled_channels(const LatticeSpec& lattice, std::span<const PotentialRealization> potentials,
                                      const DensityMatrix& rho0, std::span<const double> times, double hbar = 1.0,
                                      const ChannelOptions& opts = {});

// Generator of the second-order master equation. It is quadratic in V_eps and
// depends on the ensemble only through the mean Hamiltonian and the site
// covariance Cov(n, m) = sum_eps p_eps V_eps(n) V_eps(m), whose eigenmodes
// drive the dissipator.
class LindbladGenerator {
public:
    enum class Mode { sampled, kernel };

    // Ensemble average over the given (recentred) potentials.
    static LindbladGenerator sampled(const LatticeSpec& lattice, std::span<const PotentialRealization> potentials,
                                     double hbar = 1.0);
    // Exact average through the ring-periodized two-point correlation.
    static LindbladGenerator kernel(const LatticeSpec& lattice, const DisorderSpec& disorder, double hbar = 1.0);

    Mode mode() const { return mode_; }
    int sites() const { return static_cast<int>(energies_.size()); }
    double hbar() const { return hbar_; }
    const RMatrix& mean_hamiltonian() const { return mean_h_; }
    const RVector& energies() const { return energies_; }
    // Columns are the eigenvectors of H_bar (plane waves in kernel mode).
    const CMatrix& eigenvectors() const { return basis_; }
    std::size_t mode_count() const;

    // H_bar - (i / 2 hbar) sum p [V, A(t)], A(t) = int_0^t V~(t') dt'.
    CMatrix effective_hamiltonian(double t) const;
    // L^(alpha)_{eps,t} = (V_eps + alpha V~_eps(t)) / 2 for covariance mode `j`
    // (sampled mode: the modes replace the individual realizations with the
    // same second moments). Returned in the site basis.
    CMatrix jump_operator(std::size_t j, double t, int alpha) const;
    // Weight of mode j in the ensemble average.
    double mode_weight(std::size_t j) const { return weights_[j]; }

    // d rho / dt in the site basis.
    CMatrix rhs(double t, const CMatrix& rho) const;
    // The same in the eigenbasis of H_bar.
    CMatrix rhs_eigen(double t, const CMatrix& rho_eigen) const;
    // Dissipative part only (eigenbasis), no -i[H_bar, rho] term.
    CMatrix dissipator_eigen(double t, const CMatrix& rho_eigen) const;

    CMatrix to_eigen(const CMatrix& site) const;
    CMatrix to_site(const CMatrix& eigen) const;

private:
    LindbladGenerator(Mode mode, const LatticeSpec& lattice, const RMatrix& mean_h, const RMatrix& covariance, double hbar);
    // g_jk(t) = int_0^t exp(-i (E_j - E_k) t' / hbar) dt'
    CMatrix memory(double t) const;
    // Translation-invariant dissipator pieces in the plane-wave basis.
    void kernel_terms(double t, const CMatrix* rho, CMatrix* x, CMatrix& y) const;

    Mode mode_;
    double hbar_;
    RMatrix mean_h_;
    RVector energies_;
    CMatrix basis_;
    std::vector<RMatrix> modes_;         // covariance modes in the eigenbasis (sampled mode)
    std::vector<RVector> site_modes_;    // covariance modes as site-diagonal vectors
    std::vector<double> weights_;
    std::vector<double> spectrum_;       // kernel mode: S_r / M, r = 0..M-1
};

// Reference for the effective Hamiltonian: Richardson-refined composite
// Simpson quadrature of sum p [V_eps, V~_eps(t')] over [0, t].
CMatrix effective_hamiltonian_reference(const LatticeSpec& lattice, std::span<const PotentialRealization> potentials,
                                        double t, double hbar = 1.0, int intervals = 256);

struct LindbladOptions {
    OdeOptions ode{1e-10, 1e-13, 0.05, 2.0, 2'000'000};
    bool interaction_picture = true;
    double trace_tolerance = 1e-8;
    double positivity_tolerance = 1e-6;
};

struct LindbladRun {
    AveragedStateSeries series;
    std::vector<double> min_eigenvalue;  // positivity diagnostic per output time
    OdeStats stats;
};

LindbladRun integrate_lindblad(const LindbladGenerator& generator, const DensityMatrix& rho0, std::span<const double> times,
                               const LindbladOptions& opts = {});

}  // namespace qtransport
