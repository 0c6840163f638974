// qtransport: benchmark runner for disorder-averaged wave-packet transport.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qtransport/diagnostics.hpp"
#include "qtransport/experiment.hpp"
#include "qtransport/report.hpp"

namespace fs = std::filesystem;
using namespace qtransport;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInvariant = 3;
constexpr int kExitNumerical = 4;

fs::path output_root() {
    const char* env = std::getenv("QTRANSPORT_OUTPUT");
    return env && *env ? fs::path(env) : fs::path("qtransport-out");
}

ExperimentConfig resolve(const std::string& what) {
    if (is_run_preset(what)) return preset(what);
    if (fs::exists(what)) return load_config(what);
    if (what == "lithium") return preset(what);  // throws with a pointer to design-check
    throw ConfigError("'" + what + "' is neither a preset nor a readable config file");
}

std::string read_text(const std::string& arg) {
    if (fs::is_regular_file(arg)) {
        std::ifstream in(arg);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
    return arg;
}

int exit_code_for(const ReportBundle& b) {
    bool numerical = false, invariant = !b.invariants_ok(), config = false;
    for (const auto& p : b.paths) {
        invariant |= p.failure == FailureClass::invariant;
        numerical |= p.failure == FailureClass::numerical || p.failure == FailureClass::other;
        config |= p.failure == FailureClass::config;
    }
    if (invariant) return kExitInvariant;
    if (numerical) return kExitNumerical;
    if (config) return kExitConfig;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qtransport: disorder-averaged wave-packet transport benchmarks"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run a preset or a config file");
    std::string target;
    std::string out_dir;
    std::string paths;
    bool serial = false, no_files = false;
    run->add_option("target", target, "preset name or config file")->required();
    run->add_option("-o,--output", out_dir, "output directory (default: $QTRANSPORT_OUTPUT/<label>)");
    run->add_option("--paths", paths, "comma-separated paths overriding the config");
    run->add_flag("--serial", serial, "run the paths one after another");
    run->add_flag("--no-files", no_files, "print the summary only");

    auto* design = app.add_subcommand("design-check", "evaluate the benchmark conditions of a device (SI units)");
    std::string params;
    design->add_option("params", params, "key=value list, file, or 'lithium'")->required();

    app.add_subcommand("list-presets", "list built-in presets");

    auto* validate = app.add_subcommand("validate-config", "parse and validate a config file");
    std::string config_file;
    validate->add_option("file", config_file, "config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitConfig;
    }

    try {
        if (app.got_subcommand("list-presets")) {
            for (const auto& p : list_presets()) std::cout << p.name << "\t" << p.summary << '\n';
            return 0;
        }
        if (app.got_subcommand("validate-config")) {
            const auto cfg = load_config(config_file);
            std::cout << "# valid\n";
            write_config(std::cout, cfg);
            return 0;
        }
        if (app.got_subcommand("design-check")) {
            const std::string text = params == "lithium" ? "preset=lithium" : read_text(params);
            const auto report = design_check(parse_device(text));
            write_design_report(std::cout, report);
            return 0;
        }

        ExperimentConfig cfg = resolve(target);
        if (!paths.empty()) {
            std::set<PathKind> chosen;
            std::stringstream list(paths);
            std::string item;
            while (std::getline(list, item, ',')) {
                if (!item.empty()) chosen.insert(path_from_string(item));
            }
            cfg.paths = chosen;
        }
        RunOptions opts;
        opts.parallel = !serial;
        const auto bundle = run_experiment(cfg, opts);
        write_summary(std::cout, bundle);
        if (!no_files) {
            fs::path dir = !out_dir.empty() ? fs::path(out_dir)
                           : !cfg.output_dir.empty() ? output_root() / cfg.output_dir
                                                     : output_root() / cfg.label;
            const auto files = write_bundle(bundle, dir);
            std::cout << "wrote " << files.size() << " files to " << dir.string() << '\n';
        }
        for (const auto& p : bundle.paths) {
            if (p.warnings.empty()) continue;
            std::cerr << "warning [" << to_string(p.kind) << "]: " << p.warnings.front();
            if (p.warnings.size() > 1) std::cerr << " (+" << p.warnings.size() - 1 << " more)";
            std::cerr << '\n';
        }
        return exit_code_for(bundle);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InvariantViolation& e) {
        std::cerr << "invariant violation: " << e.what() << '\n';
        return kExitInvariant;
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}
