#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "qtransport/experiment.hpp"

namespace qtransport {

std::string to_string(PathKind p) {
    switch (p) {
        case PathKind::oracle: return "oracle";
        case PathKind::channels: return "channels";
        case PathKind::lindblad: return "lindblad";
        case PathKind::analytic: return "analytic";
        case PathKind::closed_forms: return "closed-forms";
    }
    return "unknown";
}

PathKind path_from_string(const std::string& s) {
    if (s == "oracle") return PathKind::oracle;
    if (s == "channels") return PathKind::channels;
    if (s == "lindblad") return PathKind::lindblad;
    if (s == "analytic") return PathKind::analytic;
    if (s == "closed-forms") return PathKind::closed_forms;
    throw ConfigError("unknown path '" + s + "'");
}

std::vector<double> TimeGrid::values() const {
    std::vector<double> t(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) t[static_cast<std::size_t>(i)] = start + (stop - start) * i / (points - 1);
    return t;
}

void ExperimentConfig::validate() const {
    lattice.validate();
    disorder.validate();
    if (!(units.hbar > 0.0)) throw ConfigError("hbar must be positive");
    if (!(packet.sigma >= lattice.spacing)) throw ConfigError("packet width must be at least one lattice spacing");
    if (!(packet.sigma <= lattice.length() / 10.0)) throw ConfigError("packet too wide for the lattice (sigma > M a / 10)");
    if (!(packet.p0 > 0.0)) throw ConfigError("carrier momentum must be positive");
    if (!(carrier() > 0.0)) throw ConfigError("carrier momentum rounds to zero on the ring grid");
    if (realizations < 1) throw ConfigError("ensemble size K must be at least 1");
    if (antithetic && realizations % 2 != 0) throw ConfigError("antithetic ensembles need an even K");
    if (grid.points < 2) throw ConfigError("time grid needs at least two points");
    if (!(grid.start >= 0.0) || !(grid.stop > grid.start)) throw ConfigError("time grid must satisfy 0 <= start < stop");
    if (paths.empty()) throw ConfigError("at least one path must be enabled");
    if (bootstrap_resamples < 0) throw ConfigError("bootstrap resamples must be non-negative");
    if (lindblad_mode == LindbladGenerator::Mode::kernel && paths.count(PathKind::lindblad) &&
        disorder.model != CorrelationModel::gaussian)
        throw ConfigError("kernel-mode master equation needs the Gaussian correlation model");
    (void)mass();
}

ContinuumParams ExperimentConfig::continuum() const {
    WavePacketSpec p = packet;
    p.p0 = carrier();
    return ContinuumParams::from_lattice(lattice, p, units, disorder);
}

namespace {

ExperimentConfig benchmark_case(const std::string& label, double w, double sigma, double ell, double p0_target) {
    ExperimentConfig c;
    c.label = label;
    c.disorder = DisorderSpec::from_box_width(w, ell, c.seed);
    c.packet = WavePacketSpec{sigma, p0_target, 0.5 * c.lattice.length()};
    c.units = UnitSystem::for_carrier(c.lattice, c.carrier(), 1.0);
    return c;
}

double dispersion_time(const ExperimentConfig& c) {
    return 2.0 * c.mass() * c.packet.sigma * c.packet.sigma / c.units.hbar;
}

}  // namespace

std::vector<PresetInfo> list_presets() {
    return {
        {"case-i", "W=0.05J sigma=10a ell=2a p0~hbar/2a, t in [0,20]"},
        {"case-ii", "W=0.1J sigma=5a ell=3a p0~4hbar/3a, t in [0,4 t_dd]"},
        {"case-iii", "W=0.1J sigma=10a ell=3a p0~4hbar/3a, t in [0,4 t_dd]"},
        {"free", "case-i geometry without disorder"},
        {"lithium", "design-check preset: Li-7 waveguide, ell=100um sigma=70um"},
    };
}

bool is_run_preset(const std::string& name) {
    return name == "case-i" || name == "case-ii" || name == "case-iii" || name == "free";
}

ExperimentConfig preset(const std::string& name) {
    if (name == "case-i") {
        auto c = benchmark_case(name, 0.05, 10.0, 2.0, 0.5);
        c.grid = {0.0, 20.0, 80};
        return c;
    }
    if (name == "case-ii" || name == "case-iii") {
        const double sigma = name == "case-ii" ? 5.0 : 10.0;
        auto c = benchmark_case(name, 0.1, sigma, 3.0, 4.0 / 3.0);
        c.grid = {0.0, 4.0 * dispersion_time(c), 80};
        return c;
    }
    if (name == "free") {
        auto c = benchmark_case(name, 0.0, 10.0, 2.0, 0.5);
        c.grid = {0.0, 20.0, 80};
        return c;
    }
    if (name == "lithium") throw ConfigError("preset 'lithium' is a design-check preset; use the design-check verb");
    throw ConfigError("unknown preset '" + name + "'");
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct LineError {
    std::string source;
    int line;
    [[noreturn]] void fail(const std::string& what) const {
        std::ostringstream msg;
        msg << source << ": line " << line << ": " << what;
        throw ConfigError(msg.str());
    }
};

double parse_double(const std::string& v, const LineError& at) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(x)) at.fail("expected a number, got '" + v + "'");
        return x;
    } catch (const std::logic_error&) {
        at.fail("expected a number, got '" + v + "'");
    }
}

long long parse_integer(const std::string& v, const LineError& at) {
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) at.fail("expected an integer, got '" + v + "'");
        return x;
    } catch (const std::logic_error&) {
        at.fail("expected an integer, got '" + v + "'");
    }
}

bool parse_bool(const std::string& v, const LineError& at) {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    at.fail("expected true/false, got '" + v + "'");
}

}  // namespace

ExperimentConfig parse_config(std::istream& is, const std::string& source) {
    ExperimentConfig c;
    std::optional<double> box_width, c0;
    double stop_tdd = 0.0;  // 0: unset
    bool seen_key = false;
    std::map<std::string, int> seen;
    std::string raw;
    int lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        const LineError at{source, lineno};
        std::string line = raw.substr(0, raw.find('#'));
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) at.fail("expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) at.fail("missing key");
        if (value.empty()) at.fail("missing value for '" + key + "'");
        if (seen.count(key)) {
            at.fail("duplicate key '" + key + "' (first set on line " + std::to_string(seen[key]) + ")");
        }
        seen[key] = lineno;

        try {
            if (key == "base") {
                if (seen_key) at.fail("'base' must be the first key");
                c = preset(value);
                box_width = c.disorder.box_width;
                c0.reset();
            } else if (key == "label") {
                c.label = value;
            } else if (key == "lattice.sites") {
                c.lattice.sites = static_cast<int>(parse_integer(value, at));
            } else if (key == "lattice.spacing") {
                c.lattice.spacing = parse_double(value, at);
            } else if (key == "lattice.hopping") {
                c.lattice.hopping = parse_double(value, at);
            } else if (key == "packet.sigma") {
                c.packet.sigma = parse_double(value, at);
            } else if (key == "packet.p0") {
                c.packet.p0 = parse_double(value, at);
            } else if (key == "packet.x0") {
                c.packet.x0 = parse_double(value, at);
            } else if (key == "disorder.W") {
                box_width = parse_double(value, at);
                c0.reset();
            } else if (key == "disorder.c0") {
                c0 = parse_double(value, at);
                box_width.reset();
            } else if (key == "disorder.ell") {
                c.disorder.ell = parse_double(value, at);
            } else if (key == "units.hbar") {
                c.units.hbar = parse_double(value, at);
            } else if (key == "units.mass") {
                c.units.convention = mass_convention_from_string(value);
            } else if (key == "ensemble.K") {
                c.realizations = static_cast<int>(parse_integer(value, at));
            } else if (key == "ensemble.antithetic") {
                c.antithetic = parse_bool(value, at);
            } else if (key == "seed") {
                const long long s = parse_integer(value, at);
                if (s < 0) at.fail("seed must be non-negative");
                c.seed = static_cast<std::uint64_t>(s);
            } else if (key == "time.start") {
                c.grid.start = parse_double(value, at);
            } else if (key == "time.stop") {
                c.grid.stop = parse_double(value, at);
                stop_tdd = 0.0;
            } else if (key == "time.stop_tdd") {
                stop_tdd = parse_double(value, at);
                if (!(stop_tdd > 0.0)) at.fail("time.stop_tdd must be positive");
            } else if (key == "time.points") {
                c.grid.points = static_cast<int>(parse_integer(value, at));
            } else if (key == "paths") {
                c.paths.clear();
                std::stringstream list(value);
                std::string item;
                while (std::getline(list, item, ',')) {
                    item = trim(item);
                    if (!item.empty()) c.paths.insert(path_from_string(item));
                }
            } else if (key == "output") {
                c.output_dir = value;
            } else if (key == "lindblad.mode") {
                if (value == "kernel") {
                    c.lindblad_mode = LindbladGenerator::Mode::kernel;
                } else if (value == "sampled") {
                    c.lindblad_mode = LindbladGenerator::Mode::sampled;
                } else {
                    at.fail("lindblad.mode must be 'kernel' or 'sampled'");
                }
            } else if (key == "bootstrap.resamples") {
                c.bootstrap_resamples = static_cast<int>(parse_integer(value, at));
            } else if (key == "variance.forward_threshold") {
                c.forward_threshold = parse_double(value, at);
            } else {
                at.fail("unknown key '" + key + "'");
            }
        } catch (const ConfigError& e) {
            const std::string what = e.what();
            if (what.rfind(source + ": line", 0) == 0) throw;
            at.fail(what);
        }
        seen_key = true;
    }

    const double ell = c.disorder.ell;
    if (c0) {
        c.disorder = DisorderSpec{};
        c.disorder.c0 = *c0;
    } else if (box_width) {
        c.disorder = DisorderSpec::from_box_width(*box_width, ell);
    }
    c.disorder.ell = ell;
    c.disorder.seed = c.seed;
    if (stop_tdd > 0.0) c.grid.stop = stop_tdd * dispersion_time(c);
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    return parse_config(in, path.string());
}

void write_config(std::ostream& os, const ExperimentConfig& c) {
    os << std::setprecision(17);
    os << "label = " << c.label << '\n';
    os << "lattice.sites = " << c.lattice.sites << '\n';
    os << "lattice.spacing = " << c.lattice.spacing << '\n';
    os << "lattice.hopping = " << c.lattice.hopping << '\n';
    os << "packet.sigma = " << c.packet.sigma << '\n';
    os << "packet.p0 = " << c.packet.p0 << '\n';
    os << "packet.x0 = " << c.packet.x0 << '\n';
    if (c.disorder.box_width) {
        os << "disorder.W = " << *c.disorder.box_width << '\n';
    } else {
        os << "disorder.c0 = " << c.disorder.c0 << '\n';
    }
    os << "disorder.ell = " << c.disorder.ell << '\n';
    os << "units.hbar = " << c.units.hbar << '\n';
    os << "units.mass = " << to_string(c.units.convention) << '\n';
    os << "ensemble.K = " << c.realizations << '\n';
    os << "ensemble.antithetic = " << (c.antithetic ? "true" : "false") << '\n';
    os << "seed = " << c.seed << '\n';
    os << "time.start = " << c.grid.start << '\n';
    os << "time.stop = " << c.grid.stop << '\n';
    os << "time.points = " << c.grid.points << '\n';
    os << "paths = ";
    bool first = true;
    for (const auto p : c.paths) {
        os << (first ? "" : ", ") << to_string(p);
        first = false;
    }
    os << '\n';
    if (!c.output_dir.empty()) os << "output = " << c.output_dir << '\n';
    os << "lindblad.mode = " << (c.lindblad_mode == LindbladGenerator::Mode::kernel ? "kernel" : "sampled") << '\n';
    os << "bootstrap.resamples = " << c.bootstrap_resamples << '\n';
    os << "variance.forward_threshold = " << c.forward_threshold << '\n';
}

}  // namespace qtransport
