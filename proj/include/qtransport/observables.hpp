// observables.hpp: momentum distribution, momentum moments and purity shared
// by every propagation path, plus the canonical observable-series CSV.
#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qtransport/types.hpp"

namespace qtransport {

// Momenta with probabilities (lattice) or densities (continuum, with spacing).
struct MomentumDistribution {
    std::vector<double> momenta;  // ascending
    std::vector<double> values;
    bool is_density = false;      // true: values integrate with `spacing`
    double spacing = 0.0;

    double total() const;
};

// Ring momentum basis |p_n> = M^{-1/2} sum_j exp(i p_n x_j / hbar) |j>, with the
// zone re-centred on `center` so the window is (center - pi hbar/a, center + pi hbar/a].
class MomentumBasis {
public:
    MomentumBasis(const LatticeSpec& lattice, double center, double hbar = 1.0);

    const std::vector<double>& momenta() const { return momenta_; }
    // Row n holds <p_n|j>.
    const CMatrix& transform() const { return transform_; }
    double spacing() const { return spacing_; }

private:
    std::vector<double> momenta_;
    CMatrix transform_;
    double spacing_;
};

MomentumDistribution momentum_distribution(const CVector& psi, const MomentumBasis& basis);
MomentumDistribution momentum_distribution(const DensityMatrix& rho, const MomentumBasis& basis);

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

// First and central second moment. Throws InvariantViolation when weight sits
// within three grid steps of the window edges (zone wrap).
Moments momentum_moments(const MomentumDistribution& dist);

// Moments of the part of the distribution above `threshold`, renormalized.
// Separates the forward peak from a backscattered component.
Moments momentum_moments_above(const MomentumDistribution& dist, double threshold);

// Tr[rho^2]; rejects non-Hermitian or non-unit-trace input.
double purity(const DensityMatrix& rho);

struct ObservableSeries {
    std::vector<double> times;
    std::vector<double> mean_p;
    std::vector<double> var_p;
    std::vector<double> purity;
    Provenance provenance = Provenance::oracle;
    std::map<std::string, std::string> metadata;  // mass convention, seeds, K, ...

    std::size_t size() const { return times.size(); }
    void validate() const;
};

ObservableSeries observables_from_states(const AveragedStateSeries& series, const MomentumBasis& basis);

void write_series_csv(std::ostream& os, const ObservableSeries& series);
ObservableSeries read_series_csv(std::istream& is);

struct Deviation {
    double max_abs = 0.0;
    double rms = 0.0;
    double mean_signed = 0.0;  // mean of (a - b)
};

struct DeviationReport {
    std::string label_a, label_b;
    std::vector<double> times;  // comparison grid
    Deviation mean_p, var_p, purity;
    std::optional<double> statistical_band;  // 1/sqrt(K) of the Monte Carlo source
};

// Linear interpolation onto the coarser of the two grids restricted to the
// overlap; throws ConfigError on disjoint time ranges.
DeviationReport compare_series(const ObservableSeries& a, const ObservableSeries& b);

void write_deviation_report(std::ostream& os, const DeviationReport& report);

// Linear interpolation of (xs, ys) at x; xs ascending, x inside the range.
double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x);

}  // namespace qtransport
