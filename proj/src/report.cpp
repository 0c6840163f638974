#include "qtransport/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "qtransport/diagnostics.hpp"

namespace qtransport {

namespace {

std::string failure_name(FailureClass f) {
    switch (f) {
        case FailureClass::none: return "ok";
        case FailureClass::config: return "config-error";
        case FailureClass::invariant: return "invariant-violation";
        case FailureClass::numerical: return "numerical-failure";
        case FailureClass::other: return "error";
    }
    return "error";
}

// CSV field with quotes when it contains separators.
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + '"';
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body,
                std::vector<std::filesystem::path>& written) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    body(out);
    if (!out) throw ConfigError("write to '" + path.string() + "' failed");
    written.push_back(path);
}

}  // namespace

void write_manifest(std::ostream& os, const ReportBundle& b) {
    os << std::setprecision(17);
    os << "# qtransport run manifest\n";
    os << "version = " << kVersion << '\n';
    os << "generator = " << kGeneratorName << '\n';
    os << "carrier_p0 = " << b.carrier << '\n';
    os << "mass = " << b.mass << '\n';
    os << "mass_convention = " << to_string(b.config.units.convention) << '\n';
    os << "realization_seeds = realization_seed(" << b.config.seed << ", k), k = 0.." << b.config.realizations - 1
       << (b.config.antithetic ? " (odd k: negated partner)" : "") << '\n';
    if (b.band) {
        os << "bootstrap = " << b.band->resamples << " resamples over " << (b.band->paired ? "pairs" : "realizations")
           << ", band = " << kBandSigmas << " standard errors\n";
    }
    os << "# configuration (feed back with `qtransport run <file>`)\n";
    write_config(os, b.config);
}

void write_timescales_csv(std::ostream& os, const ReportBundle& b) {
    const auto& ts = b.timescales;
    os << std::setprecision(12);
    os << "# mass_convention=" << to_string(b.config.units.convention) << " mass=" << b.mass << '\n';
    os << "quantity,value,note\n";
    os << "t_decorrelation," << ts.decorrelation << ",ell m / p0\n";
    os << "t_backscatter_dominance," << ts.backscatter_dominance << ",hbar m C0 / (2 pi p0^3 G(2 p0))\n";
    os << "t_dispersion_dominance," << ts.dispersion_dominance << ",2 m sigma^2 / hbar\n";
    if (ts.transit) os << "t_transit," << *ts.transit << ",m L / p0 with L = ring length\n";
    os << "backscatter_ratio," << ts.backscatter_ratio << ",p0 ell / hbar\n";
    os << "weak_backscattering," << (ts.weak_backscattering ? 1 : 0) << ",p0 ell / hbar >= " << kRegimeFactor << '\n';
    if (ts.dispersion_ratio) os << "dispersion_ratio," << *ts.dispersion_ratio << ",t_transit / t_dd\n";
    if (ts.low_dispersion) os << "low_dispersion," << (*ts.low_dispersion ? 1 : 0) << ",t_transit <= t_dd\n";
    // Mass-convention sensitivity of the mass-dependent scales.
    const double p0 = b.carrier;
    for (const auto conv : {MassConvention::band_edge, MassConvention::velocity_adapted, MassConvention::band_curvature,
                            MassConvention::energy_matched}) {
        UnitSystem u = b.config.units;
        u.convention = conv;
        double m = 0.0;
        try {
            m = u.mass(b.config.lattice, p0);
        } catch (const ConfigError&) {
            continue;
        }
        ContinuumParams cp = b.config.continuum();
        cp.mass = m;
        const Timescales alt = timescales(cp);
        const std::string tag = to_string(conv);
        os << "mass[" << tag << "]," << m << ",\n";
        os << "t_backscatter_dominance[" << tag << "]," << alt.backscatter_dominance << ",\n";
        os << "t_dispersion_dominance[" << tag << "]," << alt.dispersion_dominance << ",\n";
        os << "variance_increase[" << tag << "]," << variance_relative_increase(cp) << ",8 m^2 C0 sigma^2 / (hbar p0)^2\n";
    }
}

void write_band_csv(std::ostream& os, const StatisticalBand& band) {
    os << std::setprecision(17);
    os << "# resamples=" << band.resamples << " unit=" << (band.paired ? "pair" : "realization") << '\n';
    os << "time,se_mean_p,se_var_p,se_purity\n";
    for (std::size_t i = 0; i < band.times.size(); ++i) {
        os << band.times[i] << ',' << band.mean_p[i] << ',' << band.var_p[i] << ',' << band.purity[i] << '\n';
    }
}

void write_deviations_csv(std::ostream& os, const ReportBundle& b) {
    os << std::setprecision(12);
    os << "path,observable,max_abs,rms,mean_signed,band,within_band\n";
    const auto* oracle = b.series(PathKind::oracle);
    if (!oracle) return;
    for (const auto& p : b.paths) {
        if (p.kind == PathKind::oracle || !p.series) continue;
        const auto rep = compare_series(*p.series, *oracle);
        for (const auto o : {Observable::mean_p, Observable::var_p, Observable::purity}) {
            const Deviation& d = o == Observable::mean_p ? rep.mean_p : o == Observable::var_p ? rep.var_p : rep.purity;
            os << to_string(p.kind) << ',' << to_string(o) << ',' << d.max_abs << ',' << d.rms << ',' << d.mean_signed;
            if (b.band) {
                const auto w = compare_in_window(*p.series, *oracle, *b.band, o, oracle->times.front(), oracle->times.back());
                os << ',' << w.band << ',' << (w.within() ? 1 : 0);
            } else {
                os << ",,";
            }
            os << '\n';
        }
    }
}

void write_invariants_csv(std::ostream& os, const ReportBundle& b) {
    os << std::setprecision(6);
    os << "check,value,tolerance,ok\n";
    for (const auto& c : b.invariants) {
        os << csv_field(c.name) << ',' << c.value << ',' << c.tolerance << ',' << (c.ok() ? 1 : 0) << '\n';
    }
}

void write_paths_csv(std::ostream& os, const ReportBundle& b) {
    os << std::setprecision(10);
    os << "path,status,error,warnings\n";
    for (const auto& p : b.paths) {
        os << to_string(p.kind) << ',' << failure_name(p.failure) << ',' << csv_field(p.error) << ',' << p.warnings.size()
           << '\n';
    }
}

namespace {

struct Panel {
    double x0, y0, w, h;
    double tmin, tmax, ymin, ymax;
    double px(double t) const { return x0 + (t - tmin) / (tmax - tmin) * w; }
    double py(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }
};

const char* path_colour(PathKind k) {
    switch (k) {
        case PathKind::oracle: return "#000000";
        case PathKind::channels: return "#7f3c8d";
        case PathKind::lindblad: return "#11a579";
        case PathKind::analytic: return "#3969ac";
        case PathKind::closed_forms: return "#e73f74";
    }
    return "#888888";
}

void svg_panel(std::ostream& os, const ReportBundle& b, const Panel& frame, bool purity_panel, const std::string& title) {
    std::vector<const PathResult*> drawn;
    for (const auto& p : b.paths) {
        if (p.series) drawn.push_back(&p);
    }
    Panel pn = frame;
    pn.ymin = std::numeric_limits<double>::infinity();
    pn.ymax = -pn.ymin;
    for (const auto* p : drawn) {
        const auto& ys = purity_panel ? p->series->purity : p->series->mean_p;
        for (const double y : ys) {
            pn.ymin = std::min(pn.ymin, y);
            pn.ymax = std::max(pn.ymax, y);
        }
    }
    if (!std::isfinite(pn.ymin)) {
        pn.ymin = 0.0;
        pn.ymax = 1.0;
    }
    const double pad = std::max(1e-9, 0.08 * (pn.ymax - pn.ymin));
    pn.ymin -= pad;
    pn.ymax += pad;

    os << "<rect x=\"" << pn.x0 << "\" y=\"" << pn.y0 << "\" width=\"" << pn.w << "\" height=\"" << pn.h
       << "\" fill=\"none\" stroke=\"#444\"/>\n";
    os << "<text x=\"" << pn.x0 + pn.w / 2 << "\" y=\"" << pn.y0 - 8 << "\" text-anchor=\"middle\">" << title << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
        const double y = pn.ymin + (pn.ymax - pn.ymin) * i / 4.0;
        const double t = pn.tmin + (pn.tmax - pn.tmin) * i / 4.0;
        os << "<text x=\"" << pn.x0 - 6 << "\" y=\"" << pn.py(y) + 4 << "\" text-anchor=\"end\" font-size=\"10\">"
           << std::setprecision(6) << y << "</text>\n";
        os << "<text x=\"" << pn.px(t) << "\" y=\"" << pn.y0 + pn.h + 14 << "\" text-anchor=\"middle\" font-size=\"10\">"
           << std::setprecision(4) << t << "</text>\n";
    }

    const auto* oracle = b.series(PathKind::oracle);
    if (oracle && b.band) {
        const auto& y = purity_panel ? oracle->purity : oracle->mean_p;
        const auto& se = purity_panel ? b.band->purity : b.band->mean_p;
        os << "<polygon fill=\"#bbbbbb\" fill-opacity=\"0.5\" stroke=\"none\" points=\"";
        for (std::size_t i = 0; i < y.size(); ++i) os << pn.px(oracle->times[i]) << ',' << pn.py(y[i] + kBandSigmas * se[i]) << ' ';
        for (std::size_t i = y.size(); i-- > 0;) os << pn.px(oracle->times[i]) << ',' << pn.py(y[i] - kBandSigmas * se[i]) << ' ';
        os << "\"/>\n";
    }
    for (const auto* p : drawn) {
        const auto& ys = purity_panel ? p->series->purity : p->series->mean_p;
        os << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << path_colour(p->kind) << "\""
           << (p->kind == PathKind::closed_forms ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
        for (std::size_t i = 0; i < ys.size(); ++i) os << pn.px(p->series->times[i]) << ',' << pn.py(ys[i]) << ' ';
        os << "\"/>\n";
    }
}

}  // namespace

void write_plot_svg(std::ostream& os, const ReportBundle& b) {
    const double width = 900, height = 380;
    const auto& times = b.config.grid;
    os << std::setprecision(7);
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg_panel(os, b, Panel{70, 40, 340, 260, times.start, times.stop, 0, 1}, true, "purity r(t)");
    svg_panel(os, b, Panel{530, 40, 340, 260, times.start, times.stop, 0, 1}, false, "mean momentum <p>(t)");
    os << "<text x=\"" << width / 2 << "\" y=\"" << 330 << "\" text-anchor=\"middle\">time (hbar/J)</text>\n";
    double lx = 70;
    for (const auto& p : b.paths) {
        if (!p.series) continue;
        os << "<line x1=\"" << lx << "\" y1=\"355\" x2=\"" << lx + 24 << "\" y2=\"355\" stroke-width=\"2\" stroke=\""
           << path_colour(p.kind) << "\"/>\n";
        os << "<text x=\"" << lx + 30 << "\" y=\"359\">" << to_string(p.kind) << "</text>\n";
        lx += 130;
    }
    if (b.band) {
        os << "<rect x=\"" << lx << "\" y=\"349\" width=\"24\" height=\"12\" fill=\"#bbbbbb\" fill-opacity=\"0.5\"/>\n";
        os << "<text x=\"" << lx + 30 << "\" y=\"359\">oracle band (" << kBandSigmas << " SE)</text>\n";
    }
    os << "</svg>\n";
}

void write_summary(std::ostream& os, const ReportBundle& b) {
    os << std::setprecision(6);
    os << "case " << b.config.label << ": p0=" << b.carrier << " m=" << b.mass << " ("
       << to_string(b.config.units.convention) << ") K=" << b.config.realizations << '\n';
    os << "  t_dec=" << b.timescales.decorrelation << " t_bd=" << b.timescales.backscatter_dominance
       << " t_dd=" << b.timescales.dispersion_dominance << '\n';
    for (const auto& p : b.paths) {
        os << "  " << std::left << std::setw(13) << to_string(p.kind) << std::right << failure_name(p.failure);
        os << "  " << std::setprecision(3) << p.seconds << " s" << std::setprecision(6);
        if (p.series) os << "  r(end)=" << p.series->purity.back() << " <p>(end)=" << p.series->mean_p.back();
        if (!p.error.empty()) os << "  " << p.error;
        os << '\n';
    }
    if (const auto* oracle = b.series(PathKind::oracle); oracle && b.band) {
        for (const auto& p : b.paths) {
            if (p.kind == PathKind::oracle || !p.series) continue;
            for (const auto o : {Observable::purity, Observable::mean_p}) {
                const auto w = compare_in_window(*p.series, *oracle, *b.band, o, oracle->times.front(), oracle->times.back());
                os << "  " << to_string(p.kind) << " vs oracle " << to_string(o) << ": rms " << w.rms_deviation << " band "
                   << w.band << (w.within() ? " (within)" : " (outside)") << '\n';
            }
        }
    }
    for (const auto& c : b.invariants) {
        if (!c.ok()) os << "  INVARIANT VIOLATED: " << c.name << " = " << c.value << " > " << c.tolerance << '\n';
    }
}

std::vector<std::filesystem::path> write_bundle(const ReportBundle& b, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    write_file(dir / "manifest.txt", [&](std::ostream& os) { write_manifest(os, b); }, written);
    for (const auto& p : b.paths) {
        if (!p.series) continue;
        write_file(dir / ("series_" + to_string(p.kind) + ".csv"), [&](std::ostream& os) { write_series_csv(os, *p.series); },
                   written);
    }
    if (b.oracle_forward) {
        write_file(dir / "series_oracle_forward.csv", [&](std::ostream& os) { write_series_csv(os, *b.oracle_forward); },
                   written);
    }
    if (b.band) write_file(dir / "band.csv", [&](std::ostream& os) { write_band_csv(os, *b.band); }, written);
    write_file(dir / "deviations.csv", [&](std::ostream& os) { write_deviations_csv(os, b); }, written);
    write_file(dir / "timescales.csv", [&](std::ostream& os) { write_timescales_csv(os, b); }, written);
    write_file(dir / "invariants.csv", [&](std::ostream& os) { write_invariants_csv(os, b); }, written);
    write_file(dir / "paths.csv", [&](std::ostream& os) { write_paths_csv(os, b); }, written);
    write_file(dir / "plot.svg", [&](std::ostream& os) { write_plot_svg(os, b); }, written);
    return written;
}

// ----- design check --------------------------------------------------------

void DeviceParameters::validate() const {
    auto positive = [](double x, const char* what) {
        if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(std::string(what) + " must be positive and finite");
    };
    positive(mass, "mass");
    positive(velocity, "velocity");
    if (de_broglie) positive(*de_broglie, "de_broglie");
    positive(ell, "ell");
    positive(sigma, "sigma");
    if (length) positive(*length, "length");
    if (disorder_ratio && c0) throw ConfigError("give either disorder_ratio or c0, not both");
    if (!disorder_ratio && !c0) throw ConfigError("disorder strength missing (disorder_ratio or c0)");
    const double d = disorder_ratio ? *disorder_ratio : *c0;
    if (!(d >= 0.0) || !std::isfinite(d)) throw ConfigError("disorder strength must be non-negative");
}

DeviceParameters lithium_device() {
    DeviceParameters d;
    d.mass = kLithium7Mass;
    d.velocity = 0.01;
    d.de_broglie = 1e-6;
    d.ell = 100e-6;
    d.sigma = 70e-6;
    d.disorder_ratio = 1e-5;
    d.length = 2.0 * d.sigma * d.sigma / *d.de_broglie;
    return d;
}

DeviceParameters parse_device(const std::string& text) {
    DeviceParameters d;
    d.disorder_ratio.reset();
    std::string normalized = text;
    std::replace(normalized.begin(), normalized.end(), '\n', ',');
    std::stringstream items(normalized);
    std::string item;
    bool first = true;
    while (std::getline(items, item, ',')) {
        const auto hash = item.find('#');
        if (hash != std::string::npos) item.resize(hash);
        const auto b = item.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        item = item.substr(b, item.find_last_not_of(" \t\r") - b + 1);
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("design parameter '" + item + "' is not key=value");
        auto key = item.substr(0, eq);
        auto value = item.substr(eq + 1);
        key.erase(key.find_last_not_of(" \t") + 1);
        value.erase(0, value.find_first_not_of(" \t"));
        if (key == "preset") {
            if (!first) throw ConfigError("'preset' must come first");
            if (value != "lithium") throw ConfigError("unknown design preset '" + value + "'");
            d = lithium_device();
            first = false;
            continue;
        }
        first = false;
        double x = 0.0;
        try {
            std::size_t pos = 0;
            x = std::stod(value, &pos);
            if (pos != value.size()) throw std::invalid_argument(value);
        } catch (const std::logic_error&) {
            throw ConfigError("design parameter '" + key + "' expects a number, got '" + value + "'");
        }
        if (key == "mass") {
            d.mass = x;
        } else if (key == "velocity") {
            d.velocity = x;
        } else if (key == "de_broglie") {
            d.de_broglie = x;
        } else if (key == "ell") {
            d.ell = x;
        } else if (key == "sigma") {
            d.sigma = x;
        } else if (key == "disorder_ratio") {
            d.disorder_ratio = x;
            d.c0.reset();
        } else if (key == "c0") {
            d.c0 = x;
            d.disorder_ratio.reset();
        } else if (key == "length") {
            d.length = x;
        } else {
            throw ConfigError("unknown design parameter '" + key + "'");
        }
    }
    d.validate();
    return d;
}

std::string to_string(ConditionStatus s) {
    switch (s) {
        case ConditionStatus::pass: return "pass";
        case ConditionStatus::marginal: return "marginal";
        case ConditionStatus::fail: return "fail";
    }
    return "fail";
}

DesignReport design_check(const DeviceParameters& device) {
    device.validate();
    DesignReport r;
    r.device = device;
    const double p0_si = device.de_broglie ? kHbarSI / *device.de_broglie : device.mass * device.velocity;
    r.length_unit = kHbarSI / p0_si;
    r.time_unit = device.mass * r.length_unit * r.length_unit / kHbarSI;
    r.energy_unit = kHbarSI / r.time_unit;

    ContinuumParams& p = r.params;
    p.mass = 1.0;
    p.p0 = 1.0;
    p.hbar = 1.0;
    p.sigma = device.sigma / r.length_unit;
    p.disorder.ell = device.ell / r.length_unit;
    // 4 m^2 C0 / p0^4 with m = p0 = 1
    p.disorder.c0 = device.disorder_ratio ? 0.25 * *device.disorder_ratio : *device.c0 / (r.energy_unit * r.energy_unit);

    WarningCapture capture;
    const std::optional<double> length =
        device.length ? std::optional<double>(*device.length / r.length_unit) : std::nullopt;
    const Timescales ts = timescales(p, length);
    r.backscatter_ratio = ts.backscatter_ratio;
    r.weak_backscattering = ts.backscatter_ratio >= kRegimeFactor               ? ConditionStatus::pass
                            : ts.backscatter_ratio >= kRegimeFactor / kMarginalFactor ? ConditionStatus::marginal
                                                                                 : ConditionStatus::fail;
    if (ts.dispersion_ratio) {
        r.dispersion_ratio = ts.dispersion_ratio;
        const double q = *ts.dispersion_ratio;
        r.low_dispersion = q <= 1.0 / kMarginalFactor ? ConditionStatus::pass
                           : q <= kMarginalFactor     ? ConditionStatus::marginal
                                                      : ConditionStatus::fail;
    }
    r.t_decorrelation = ts.decorrelation * r.time_unit;
    r.t_backscatter = p.disorder.c0 > 0.0 ? ts.backscatter_dominance * r.time_unit : std::numeric_limits<double>::infinity();
    r.t_dispersion = ts.dispersion_dominance * r.time_unit;
    if (ts.transit) r.t_transit = *ts.transit * r.time_unit;

    // First time past the decorrelation transient of both the disorder and the envelope.
    const double t_eval = kRegimeFactor * std::max(p.disorder.ell, p.sigma) * p.mass / p.p0;
    r.evaluation_time = t_eval * r.time_unit;
    const auto approx = purity_approx(p, t_eval);
    r.purity = approx.value;
    r.purity_loss = 1.0 - approx.value;
    r.visibility = mz_probabilities(std::clamp(approx.value, 0.0, 1.0), kPi / 2).visibility;
    if (ts.transit && *ts.transit > t_eval) r.purity_at_transit = purity_approx(p, *ts.transit).value;
    r.warnings = capture.messages();
    return r;
}

void write_design_report(std::ostream& os, const DesignReport& r) {
    os << std::setprecision(6);
    os << "design check (SI input, natural units hbar = m = 1, length unit = reduced de Broglie wavelength)\n";
    os << "  length unit     " << r.length_unit << " m\n";
    os << "  time unit       " << r.time_unit << " s\n";
    os << "  energy unit     " << r.energy_unit << " J\n";
    os << "  ell / lambda    " << r.params.disorder.ell << '\n';
    os << "  sigma / lambda  " << r.params.sigma << '\n';
    os << "  4 m^2 C0 / p0^4 " << 4.0 * r.params.disorder.c0 << '\n';
    os << "benchmark conditions\n";
    os << "  weak backscattering  p0 ell / hbar = " << r.backscatter_ratio << "  [" << to_string(r.weak_backscattering)
       << "]\n";
    if (r.dispersion_ratio) {
        os << "  low dispersion       t_f / t_dd = " << *r.dispersion_ratio << "  [" << to_string(*r.low_dispersion) << "]\n";
    } else {
        os << "  low dispersion       no waveguide length given\n";
    }
    os << "timescales\n";
    os << "  t_dec  " << r.t_decorrelation << " s\n";
    os << "  t_bd   " << r.t_backscatter << " s\n";
    os << "  t_dd   " << r.t_dispersion << " s\n";
    if (r.t_transit) os << "  t_f    " << *r.t_transit << " s\n";
    os << "prediction after decorrelation (t = " << r.evaluation_time << " s)\n";
    os << "  purity       " << r.purity << '\n';
    os << "  purity loss  " << r.purity_loss << '\n';
    os << "  MZ visibility " << r.visibility << '\n';
    if (r.purity_at_transit) os << "  purity at t_f " << *r.purity_at_transit << '\n';
    for (const auto& w : r.warnings) os << "  note: " << w << '\n';
}

}  // namespace qtransport
