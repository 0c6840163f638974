#include "qtransport/experiment.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <iomanip>
#include <random>
#include <sstream>

#include "qtransport/diagnostics.hpp"

namespace qtransport {

std::string to_string(Observable o) {
    switch (o) {
        case Observable::mean_p: return "mean_p";
        case Observable::var_p: return "var_p";
        case Observable::purity: return "purity";
    }
    return "unknown";
}

const PathResult* ReportBundle::find(PathKind kind) const {
    for (const auto& p : paths) {
        if (p.kind == kind) return &p;
    }
    return nullptr;
}

const ObservableSeries* ReportBundle::series(PathKind kind) const {
    const auto* p = find(kind);
    return p && p->series ? &*p->series : nullptr;
}

bool ReportBundle::invariants_ok() const {
    for (const auto& c : invariants) {
        if (!c.ok()) return false;
    }
    return true;
}

bool ReportBundle::any_path_failed() const {
    for (const auto& p : paths) {
        if (p.failure != FailureClass::none) return true;
    }
    return false;
}

namespace {

const std::vector<double>& pick(const ObservableSeries& s, Observable o) {
    switch (o) {
        case Observable::mean_p: return s.mean_p;
        case Observable::var_p: return s.var_p;
        case Observable::purity: return s.purity;
    }
    return s.purity;
}

const std::vector<double>& pick(const StatisticalBand& b, Observable o) {
    switch (o) {
        case Observable::mean_p: return b.mean_p;
        case Observable::var_p: return b.var_p;
        case Observable::purity: return b.purity;
    }
    return b.purity;
}

}  // namespace

WindowComparison compare_in_window(const ObservableSeries& path, const ObservableSeries& oracle,
                                   const StatisticalBand& band, Observable which, double t_min, double t_max) {
    const auto& yo = pick(oracle, which);
    const auto& yp = pick(path, which);
    const auto& se = pick(band, which);
    if (band.times.size() != oracle.times.size()) throw ConfigError("band and oracle series use different grids");
    WindowComparison w;
    double dev2 = 0.0, se2 = 0.0;
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        const double t = oracle.times[i];
        if (t < t_min - 1e-12 || t > t_max + 1e-12) continue;
        if (t < path.times.front() - 1e-12 || t > path.times.back() + 1e-12) continue;
        const double d = interpolate(path.times, yp, t) - yo[i];
        dev2 += d * d;
        w.mean_signed += d;
        se2 += se[i] * se[i];
        ++w.samples;
    }
    if (w.samples == 0) throw ConfigError("comparison window contains no oracle samples");
    const auto n = static_cast<double>(w.samples);
    w.rms_deviation = std::sqrt(dev2 / n);
    w.mean_signed /= n;
    w.band = kBandSigmas * std::sqrt(se2 / n);
    return w;
}

StatisticalBand bootstrap_band(const OracleEnsemble& ensemble, const MomentumBasis& basis, int resamples,
                               std::uint64_t seed, bool paired) {
    const auto& trajs = ensemble.trajectories;
    const auto k = static_cast<Eigen::Index>(trajs.size());
    if (k == 0) throw ConfigError("bootstrap needs at least one trajectory");
    if (paired && k % 2 != 0) throw ConfigError("paired bootstrap needs an even number of trajectories");
    StatisticalBand band;
    band.times = ensemble.series.times;
    band.resamples = resamples;
    band.paired = paired;
    const std::size_t nt = band.times.size();
    band.mean_p.assign(nt, 0.0);
    band.var_p.assign(nt, 0.0);
    band.purity.assign(nt, 0.0);
    if (resamples < 2) return band;

    // Resampling counts are shared by all times: one resample is one seed set.
    const Eigen::Index units = paired ? k / 2 : k;
    std::mt19937_64 rng(realization_seed(seed, 0xb0075ull));
    std::uniform_int_distribution<Eigen::Index> draw(0, units - 1);
    RMatrix counts = RMatrix::Zero(k, resamples);
    for (int b = 0; b < resamples; ++b) {
        for (Eigen::Index u = 0; u < units; ++u) {
            const Eigen::Index j = draw(rng);
            if (paired) {
                counts(2 * j, b) += 1.0;
                counts(2 * j + 1, b) += 1.0;
            } else {
                counts(j, b) += 1.0;
            }
        }
    }

    const auto& mom = basis.momenta();
    const auto m = static_cast<Eigen::Index>(mom.size());
    const RVector p = Eigen::Map<const RVector>(mom.data(), m);
    const RVector p2 = p.array().square().matrix();
    const double kk = static_cast<double>(k);
    CMatrix psi(m, k);
    for (std::size_t i = 0; i < nt; ++i) {
        for (Eigen::Index a = 0; a < k; ++a) psi.col(a) = trajs[static_cast<std::size_t>(a)].states[i];
        const RMatrix prob = (basis.transform() * psi).cwiseAbs2();
        const RVector m1 = prob.transpose() * p;
        const RVector m2 = prob.transpose() * p2;
        const RMatrix overlap = (psi.adjoint() * psi).cwiseAbs2();
        const RMatrix oc = overlap * counts;

        double s_mean = 0, s_mean2 = 0, s_var = 0, s_var2 = 0, s_pur = 0, s_pur2 = 0;
        for (int b = 0; b < resamples; ++b) {
            const double mean = counts.col(b).dot(m1) / kk;
            const double var = counts.col(b).dot(m2) / kk - mean * mean;
            const double pur = counts.col(b).dot(oc.col(b)) / (kk * kk);
            s_mean += mean;
            s_mean2 += mean * mean;
            s_var += var;
            s_var2 += var * var;
            s_pur += pur;
            s_pur2 += pur * pur;
        }
        const double nb = resamples;
        auto sd = [nb](double s, double s2) { return std::sqrt(std::max(0.0, (s2 - s * s / nb) / (nb - 1.0))); };
        band.mean_p[i] = sd(s_mean, s_mean2);
        band.var_p[i] = sd(s_var, s_var2);
        band.purity[i] = sd(s_pur, s_pur2);
    }
    return band;
}

namespace {

using Clock = std::chrono::steady_clock;

std::string format_number(double x) {
    std::ostringstream os;
    os << std::setprecision(12) << x;
    return os.str();
}

void tag_series(ObservableSeries& s, const ExperimentConfig& cfg, double mass) {
    s.metadata["case"] = cfg.label;
    s.metadata["mass"] = format_number(mass);
    s.metadata["mass_convention"] = to_string(cfg.units.convention);
    s.metadata["seed"] = std::to_string(cfg.seed);
    s.metadata["K"] = std::to_string(cfg.realizations);
    s.metadata["antithetic"] = cfg.antithetic ? "true" : "false";
}

void record_state_defects(PathResult& r, const AveragedStateSeries& series) {
    double herm = 0.0, trace = 0.0;
    for (const auto& rho : series.states) {
        herm = std::max(herm, hermiticity_defect(rho));
        trace = std::max(trace, trace_defect(rho));
    }
    r.diagnostics["hermiticity_defect"] = herm;
    r.diagnostics["trace_defect"] = trace;
}

// Runs one path, classifying failures instead of propagating them.
PathResult run_path(PathKind kind, const std::function<void(PathResult&)>& body) {
    PathResult r;
    r.kind = kind;
    const auto start = Clock::now();
    {
        WarningCapture capture;
        try {
            body(r);
        } catch (const ConfigError& e) {
            r.failure = FailureClass::config;
            r.error = e.what();
        } catch (const InvariantViolation& e) {
            r.failure = FailureClass::invariant;
            r.error = e.what();
        } catch (const NumericalFailure& e) {
            r.failure = FailureClass::numerical;
            r.error = e.what();
        } catch (const std::exception& e) {
            r.failure = FailureClass::other;
            r.error = e.what();
        }
        r.warnings = capture.messages();
    }
    if (r.failure != FailureClass::none) r.series.reset();
    r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return r;
}

ObservableSeries closed_form_series(const ContinuumParams& params, const std::vector<double>& times, PathResult& r) {
    ObservableSeries s;
    s.provenance = Provenance::closed_form;
    s.times = times;
    const double var0 = params.hbar * params.hbar / (4.0 * params.sigma * params.sigma);
    const double plateau = variance_plateau(params);
    int outside = 0;
    for (const double t : times) {
        s.mean_p.push_back(mean_momentum_closed(params, t));
        s.var_p.push_back(t > 0.0 ? plateau : var0);
        const auto r6 = purity_approx(params, t);
        if (!r6.flags.valid) ++outside;
        s.purity.push_back(r6.value);
    }
    r.diagnostics["samples_outside_regime"] = outside;
    r.diagnostics["variance_plateau"] = plateau;
    r.diagnostics["mean_momentum_plateau"] = mean_momentum_plateau(params);
    return s;
}

}  // namespace

ReportBundle run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    ReportBundle bundle;
    bundle.config = config;
    bundle.carrier = config.carrier();
    bundle.mass = config.mass();
    const ContinuumParams params = config.continuum();
    bundle.timescales = timescales(params, config.lattice.length());

    const auto times = config.grid.values();
    const double hbar = config.units.hbar;
    WavePacketSpec packet = config.packet;
    packet.p0 = bundle.carrier;
    const CVector psi0 = init_gaussian_packet(config.lattice, packet, hbar);
    const DensityMatrix rho0 = psi0 * psi0.adjoint();
    const MomentumBasis basis(config.lattice, bundle.carrier, hbar);

    const bool wants_ensemble = config.paths.count(PathKind::oracle) || config.paths.count(PathKind::channels) ||
                                (config.paths.count(PathKind::lindblad) &&
                                 config.lindblad_mode == LindbladGenerator::Mode::sampled);
    std::vector<PotentialRealization> potentials;
    if (wants_ensemble) {
        potentials = sample_ensemble(config.disorder, config.lattice, config.realizations, config.seed, config.antithetic);
    }

    std::optional<StatisticalBand> band;
    std::optional<ObservableSeries> forward;

    std::vector<std::pair<PathKind, std::function<void(PathResult&)>>> jobs;
    for (const PathKind kind : config.paths) {
        switch (kind) {
            case PathKind::oracle:
                jobs.emplace_back(kind, [&](PathResult& r) {
                    const auto ens = run_oracle_ensemble(config.lattice, potentials, psi0, times, hbar);
                    record_state_defects(r, ens.series);
                    r.series = observables_from_states(ens.series, basis);
                    tag_series(*r.series, config, bundle.mass);
                    ObservableSeries fwd = *r.series;
                    fwd.metadata["moments"] = "forward-peak";
                    for (std::size_t i = 0; i < times.size(); ++i) {
                        const auto dist = momentum_distribution(ens.series.states[i], basis);
                        const auto fm = momentum_moments_above(dist, config.forward_threshold * bundle.carrier);
                        fwd.mean_p[i] = fm.mean;
                        fwd.var_p[i] = fm.variance;
                    }
                    forward = std::move(fwd);
                    band = bootstrap_band(ens, basis, config.bootstrap_resamples, config.seed, config.antithetic);
                    r.diagnostics["initial_purity_defect"] = std::abs(r.series->purity.front() - 1.0);
                });
                break;
            case PathKind::channels:
                jobs.emplace_back(kind, [&](PathResult& r) {
                    const auto run = integrate_coupled_channels(config.lattice, potentials, rho0, times, hbar,
                                                                options.channels);
                    record_state_defects(r, run.series);
                    r.diagnostics["zero_sum_defect"] = run.worst_zero_sum;
                    r.diagnostics["steps"] = static_cast<double>(run.stats.accepted);
                    r.series = observables_from_states(run.series, basis);
                    tag_series(*r.series, config, bundle.mass);
                });
                break;
            case PathKind::lindblad:
                jobs.emplace_back(kind, [&](PathResult& r) {
                    const auto gen = config.lindblad_mode == LindbladGenerator::Mode::kernel
                                         ? LindbladGenerator::kernel(config.lattice, config.disorder, hbar)
                                         : LindbladGenerator::sampled(config.lattice, potentials, hbar);
                    const auto run = integrate_lindblad(gen, rho0, times, options.lindblad);
                    record_state_defects(r, run.series);
                    double min_ev = 0.0;
                    for (const double e : run.min_eigenvalue) min_ev = std::min(min_ev, e);
                    r.diagnostics["min_eigenvalue"] = min_ev;
                    r.diagnostics["steps"] = static_cast<double>(run.stats.accepted);
                    r.series = observables_from_states(run.series, basis);
                    tag_series(*r.series, config, bundle.mass);
                    r.series->metadata["generator"] =
                        config.lindblad_mode == LindbladGenerator::Mode::kernel ? "kernel" : "sampled";
                    if (config.lindblad_mode == LindbladGenerator::Mode::kernel) r.series->metadata.erase("K");
                });
                break;
            case PathKind::analytic:
                jobs.emplace_back(kind, [&](PathResult& r) {
                    r.series = analytic_series(params, times, options.analytic);
                    tag_series(*r.series, config, bundle.mass);
                    r.series->metadata.erase("K");
                    r.series->metadata.erase("seed");
                    r.series->metadata.erase("antithetic");
                    double f00 = 0.0, chi00 = 0.0;
                    for (const double t : {times.back(), 0.5 * times.back()}) {
                        const Complex f = disorder_influence(params, 0.0, 0.0, t, options.analytic.influence);
                        f00 = std::max(f00, std::abs(f));
                        const Complex chi = gaussian_char_value(packet, 0.0, 0.0, hbar) * std::exp(-f);
                        chi00 = std::max(chi00, std::abs(chi - 1.0));
                    }
                    r.diagnostics["influence_origin"] = f00;
                    r.diagnostics["char_normalization_defect"] = chi00;
                });
                break;
            case PathKind::closed_forms:
                jobs.emplace_back(kind, [&](PathResult& r) {
                    r.series = closed_form_series(params, times, r);
                    tag_series(*r.series, config, bundle.mass);
                    r.series->metadata.erase("K");
                    r.series->metadata.erase("seed");
                    r.series->metadata.erase("antithetic");
                });
                break;
        }
    }

    if (options.parallel && jobs.size() > 1) {
        std::vector<std::future<PathResult>> futures;
        for (const auto& [kind, body] : jobs) {
            futures.push_back(std::async(std::launch::async, [kind = kind, &body = body] { return run_path(kind, body); }));
        }
        for (auto& f : futures) bundle.paths.push_back(f.get());
    } else {
        for (const auto& [kind, body] : jobs) bundle.paths.push_back(run_path(kind, body));
    }

    if (const auto* o = bundle.series(PathKind::oracle)) {
        bundle.band = band;
        bundle.oracle_forward = forward;
        for (const auto& p : bundle.paths) {
            if (p.kind == PathKind::oracle || !p.series) continue;
            bundle.deviations.push_back(compare_series(*p.series, *o));
        }
    }

    for (const auto& p : bundle.paths) {
        if (p.failure != FailureClass::none) continue;
        const std::string tag = to_string(p.kind);
        auto add = [&](const std::string& key, const std::string& name, double tol) {
            const auto it = p.diagnostics.find(key);
            if (it != p.diagnostics.end()) bundle.invariants.push_back({tag + ": " + name, it->second, tol});
        };
        add("trace_defect", "trace drift", 1e-8);
        add("hermiticity_defect", "hermiticity defect", 1e-8);
        add("initial_purity_defect", "purity at t=0", 1e-10);
        add("zero_sum_defect", "channel zero-sum defect", options.channels.zero_sum_tolerance);
        add("influence_origin", "|F_t(0,0)|", 1e-9);
        add("char_normalization_defect", "|chi_t(0,0) - 1|", 1e-8);
        if (p.series) {
            double worst = 0.0;
            for (const double r : p.series->purity) worst = std::max(worst, r - 1.0);
            bundle.invariants.push_back({tag + ": purity excess over 1", std::max(0.0, worst), 1e-8});
        }
    }
    return bundle;
}

}  // namespace qtransport
