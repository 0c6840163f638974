// experiment.hpp: benchmark configurations, built-in presets and the runner
// that executes every enabled propagation path on one time grid.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qtransport/disorder.hpp"
#include "qtransport/lattice.hpp"
#include "qtransport/master_equation.hpp"
#include "qtransport/observables.hpp"
#include "qtransport/phase_space.hpp"
#include "qtransport/types.hpp"

namespace qtransport {

enum class PathKind { oracle, channels, lindblad, analytic, closed_forms };
std::string to_string(PathKind p);
PathKind path_from_string(const std::string& s);

struct TimeGrid {
    double start = 0.0;
    double stop = 20.0;
    int points = 80;

    std::vector<double> values() const;
};

struct ExperimentConfig {
    std::string label = "custom";
    LatticeSpec lattice;
    WavePacketSpec packet;       // p0 is the target; the runner snaps it to the ring grid
    DisorderSpec disorder;
    UnitSystem units;
    int realizations = 250;      // K
    bool antithetic = false;     // pair each realization with its negative
    TimeGrid grid;
    std::set<PathKind> paths{PathKind::oracle, PathKind::lindblad, PathKind::analytic, PathKind::closed_forms};
    std::string output_dir;      // empty: no files
    std::uint64_t seed = 12345;
    LindbladGenerator::Mode lindblad_mode = LindbladGenerator::Mode::kernel;
    int bootstrap_resamples = 200;
    // Momenta above forward_threshold * p0 form the forward peak.
    double forward_threshold = 0.0;

    // Throws ConfigError.
    void validate() const;
    double carrier() const { return nearest_grid_momentum(lattice, packet.p0, units.hbar); }
    double mass() const { return units.mass(lattice, carrier()); }
    ContinuumParams continuum() const;
};

struct PresetInfo {
    std::string name;
    std::string summary;
};
std::vector<PresetInfo> list_presets();
// Throws ConfigError for unknown names. "lithium" is a design-check preset
// and is not runnable.
ExperimentConfig preset(const std::string& name);
bool is_run_preset(const std::string& name);

// key = value text; '#' starts a comment. `base = <preset>` (first key only)
// starts from a preset. Errors carry "line N:" diagnostics.
ExperimentConfig parse_config(std::istream& is, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);
void write_config(std::ostream& os, const ExperimentConfig& config);

enum class FailureClass { none, config, invariant, numerical, other };

struct PathResult {
    PathKind kind = PathKind::oracle;
    std::optional<ObservableSeries> series;
    FailureClass failure = FailureClass::none;
    std::string error;
    double seconds = 0.0;
    std::vector<std::string> warnings;
    std::map<std::string, double> diagnostics;  // path-specific measures, e.g. trace drift
};

// Seed-bootstrap standard errors of the oracle observables, per time.
struct StatisticalBand {
    std::vector<double> times;
    std::vector<double> mean_p, var_p, purity;
    int resamples = 0;
    bool paired = false;  // resampling unit is an antithetic pair
};

struct InvariantCheck {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool ok() const { return value <= tolerance; }
};

struct ReportBundle {
    ExperimentConfig config;
    double carrier = 0.0;
    double mass = 0.0;
    Timescales timescales;
    std::vector<PathResult> paths;
    std::optional<StatisticalBand> band;
    std::optional<ObservableSeries> oracle_forward;  // forward-peak moments of the oracle
    std::vector<DeviationReport> deviations;         // every series path against the oracle
    std::vector<InvariantCheck> invariants;

    const PathResult* find(PathKind kind) const;
    const ObservableSeries* series(PathKind kind) const;
    bool invariants_ok() const;
    bool any_path_failed() const;
};

struct RunOptions {
    bool parallel = true;  // paths as concurrent jobs
    AnalyticOptions analytic;
    LindbladOptions lindblad;
    ChannelOptions channels;
};

ReportBundle run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

enum class Observable { mean_p, var_p, purity };
std::string to_string(Observable o);

// Width of the statistical band in bootstrap standard errors.
inline constexpr double kBandSigmas = 2.0;

struct WindowComparison {
    double rms_deviation = 0.0;  // RMS of (path - oracle) on the oracle grid inside the window
    double mean_signed = 0.0;
    double band = 0.0;           // kBandSigmas * RMS of the bootstrap standard error
    std::size_t samples = 0;
    bool within() const { return rms_deviation <= band; }
};

// Compares on the oracle grid points with t_min <= t <= t_max; the path
// series is interpolated linearly.
WindowComparison compare_in_window(const ObservableSeries& path, const ObservableSeries& oracle,
                                   const StatisticalBand& band, Observable which, double t_min, double t_max);

// Bootstrap over realizations (or antithetic pairs) of the oracle trajectories.
StatisticalBand bootstrap_band(const OracleEnsemble& ensemble, const MomentumBasis& basis, int resamples,
                               std::uint64_t seed, bool paired);

}  // namespace qtransport
