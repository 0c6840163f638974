// report.hpp: report bundle files (CSV series, comparisons, manifest, SVG
// plot) and the SI-unit device design check.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qtransport/experiment.hpp"

namespace qtransport {

inline constexpr const char* kVersion = "1.0.0";

// Writes every bundle file into `dir` (created if needed) and returns the
// written paths in order. Contents depend only on the bundle.
std::vector<std::filesystem::path> write_bundle(const ReportBundle& bundle, const std::filesystem::path& dir);

void write_manifest(std::ostream& os, const ReportBundle& bundle);
void write_timescales_csv(std::ostream& os, const ReportBundle& bundle);
void write_band_csv(std::ostream& os, const StatisticalBand& band);
void write_deviations_csv(std::ostream& os, const ReportBundle& bundle);
void write_invariants_csv(std::ostream& os, const ReportBundle& bundle);
void write_paths_csv(std::ostream& os, const ReportBundle& bundle);
// Purity and mean momentum against time, all paths, oracle band shaded.
void write_plot_svg(std::ostream& os, const ReportBundle& bundle);
// Human-readable summary for the terminal.
void write_summary(std::ostream& os, const ReportBundle& bundle);

// ----- design check --------------------------------------------------------

inline constexpr double kHbarSI = 1.054571817e-34;  // J s
inline constexpr double kLithium7Mass = 1.16505e-26; // kg

struct DeviceParameters {
    double mass = kLithium7Mass;           // kg
    double velocity = 0.01;                // m/s
    std::optional<double> de_broglie;      // reduced wavelength hbar/p0 in m; overrides mass*velocity for p0
    double ell = 100e-6;                   // correlation length, m
    double sigma = 70e-6;                  // packet width, m
    std::optional<double> disorder_ratio;  // 4 m^2 C0 / p0^4
    std::optional<double> c0;              // J^2, alternative to the ratio
    std::optional<double> length;          // waveguide length, m

    void validate() const;  // ConfigError on non-physical input
};

// Paper-style lithium waveguide: v0 = 1 cm/s, reduced wavelength 1 um,
// ell = 100 um, sigma = 70 um, 4 m^2 C0 / p0^4 = 1e-5, L = 2 sigma^2 / lambda.
DeviceParameters lithium_device();

// Comma or newline separated key=value list: mass, velocity, de_broglie, ell,
// sigma, disorder_ratio, c0, length (SI units); `preset=lithium` starts from
// the lithium device.
DeviceParameters parse_device(const std::string& text);

enum class ConditionStatus { pass, marginal, fail };
std::string to_string(ConditionStatus s);

struct DesignReport {
    DeviceParameters device;
    // Natural units: hbar = 1, length unit = reduced de Broglie wavelength, mass unit = m.
    double length_unit = 0.0;  // m
    double time_unit = 0.0;    // s
    double energy_unit = 0.0;  // J
    ContinuumParams params;    // in natural units

    double backscatter_ratio = 0.0;  // p0 ell / hbar
    ConditionStatus weak_backscattering = ConditionStatus::pass;
    std::optional<double> dispersion_ratio;  // t_f / t_dd
    std::optional<ConditionStatus> low_dispersion;

    double t_decorrelation = 0.0;  // s
    double t_backscatter = 0.0;    // s (infinite when G(2 p0) underflows)
    double t_dispersion = 0.0;     // s
    std::optional<double> t_transit;  // s

    double evaluation_time = 0.0;  // s, end of the decorrelation period
    double purity = 1.0;
    double purity_loss = 0.0;
    double visibility = 1.0;
    std::optional<double> purity_at_transit;
    std::vector<std::string> warnings;
};

// Within this factor of equality a condition is marginal.
inline constexpr double kMarginalFactor = 1.25;

DesignReport design_check(const DeviceParameters& device);
void write_design_report(std::ostream& os, const DesignReport& report);

}  // namespace qtransport
