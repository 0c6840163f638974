// disorder.hpp: correlated disorder potentials on the lattice ring.
#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "qtransport/types.hpp"

namespace qtransport {

enum class CorrelationModel { gaussian };

// Zero-mean disorder with two-point correlation C(x) = C0 exp[-(x/ell)^2].
struct DisorderSpec {
    double c0 = 0.0;                 // energy^2
    std::optional<double> box_width; // W, with C0 = W^2 / 12 when given
    double ell = 1.0;                // correlation length
    CorrelationModel model = CorrelationModel::gaussian;
    std::uint64_t seed = 0;          // master seed of the run

    static DisorderSpec from_box_width(double w, double ell, std::uint64_t seed = 0);

    void validate() const;
};

// C(x) in energy^2.
double correlation_at(const DisorderSpec& spec, double x);

// G(q) = (1/2 pi hbar) int dx exp(-i q x / hbar) C(x).
double momentum_transfer_at(const DisorderSpec& spec, double q, double hbar = 1.0);

// C(x) summed over ring images x + j M a.
double periodized_correlation(const DisorderSpec& spec, const LatticeSpec& lattice, double x);

struct PotentialRealization {
    std::vector<double> values;  // site energies V_n
    std::uint64_t seed = 0;
    LatticeSpec lattice;
};

// Identifier of the pseudo-random generator behind sample_realization.
inline constexpr const char* kGeneratorName = "mt19937_64/box-muller";

// Gaussian random field with the ring-periodized Gaussian correlation, drawn
// by spectral synthesis. Deterministic in (spec, lattice, seed).
PotentialRealization sample_realization(const DisorderSpec& spec, const LatticeSpec& lattice,
                                        std::uint64_t seed);

// Seed of realization k derived from a base seed (splitmix64 mixing).
std::uint64_t realization_seed(std::uint64_t base_seed, std::uint64_t index);

// `count` realizations with seeds realization_seed(base_seed, k). With
// `antithetic`, odd members are the negated preceding even member, so the
// ensemble mean vanishes exactly for even counts.
std::vector<PotentialRealization> sample_ensemble(const DisorderSpec& spec, const LatticeSpec& lattice, int count,
                                                  std::uint64_t base_seed, bool antithetic = false);

struct EmpiricalStats {
    std::vector<double> mean;         // per-site ensemble mean
    std::vector<double> lag_corr;     // ring-averaged <V_n V_{n+lag}>, lag = 0..M-1
    std::vector<double> lag_stderr;   // standard error of lag_corr over realizations
    std::vector<double> mean_stderr;  // standard error of the per-site mean
    int count = 0;
};

EmpiricalStats validate_ensemble(std::span<const PotentialRealization> realizations);

void write_realization_csv(std::ostream& os, const PotentialRealization& v, const DisorderSpec& spec);

}  // namespace qtransport
