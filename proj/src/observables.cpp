#include "qtransport/observables.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace qtransport {

double MomentumDistribution::total() const {
    const double s = std::accumulate(values.begin(), values.end(), 0.0);
    return is_density ? s * spacing : s;
}

MomentumBasis::MomentumBasis(const LatticeSpec& lattice, double center, double hbar) {
    lattice.validate();
    const int m = lattice.sites;
    spacing_ = lattice.grid_momentum(1, hbar);
    const double zone = 2.0 * kPi * hbar / lattice.spacing;
    momenta_.reserve(static_cast<std::size_t>(m));
    for (int n = 0; n < m; ++n) {
        double p = n * spacing_;
        // Fold into (center - zone/2, center + zone/2].
        p -= zone * std::ceil((p - center - 0.5 * zone) / zone - 1e-12);
        momenta_.push_back(p);
    }
    std::sort(momenta_.begin(), momenta_.end());
    transform_.resize(m, m);
    const double norm = 1.0 / std::sqrt(static_cast<double>(m));
    for (int n = 0; n < m; ++n) {
        for (int j = 0; j < m; ++j) {
            transform_(n, j) = std::polar(norm, -momenta_[static_cast<std::size_t>(n)] * j * lattice.spacing / hbar);
        }
    }
}

MomentumDistribution momentum_distribution(const CVector& psi, const MomentumBasis& basis) {
    const CVector amp = basis.transform() * psi;
    MomentumDistribution d;
    d.momenta = basis.momenta();
    d.spacing = basis.spacing();
    d.values.resize(d.momenta.size());
    for (Eigen::Index n = 0; n < amp.size(); ++n) d.values[static_cast<std::size_t>(n)] = std::norm(amp(n));
    return d;
}

MomentumDistribution momentum_distribution(const DensityMatrix& rho, const MomentumBasis& basis) {
    if (trace_defect(rho) > 1e-6) throw InvariantViolation("density matrix trace deviates from 1 by more than 1e-6");
    const CMatrix& f = basis.transform();
    const CMatrix frho = f * rho;
    MomentumDistribution d;
    d.momenta = basis.momenta();
    d.spacing = basis.spacing();
    d.values.resize(d.momenta.size());
    for (Eigen::Index n = 0; n < f.rows(); ++n) {
        d.values[static_cast<std::size_t>(n)] = f.row(n).dot(frho.row(n)).real();
    }
    return d;
}

namespace {

Moments moments_of(const std::vector<double>& p, const std::vector<double>& w) {
    double total = 0.0, first = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        total += w[i];
        first += w[i] * p[i];
    }
    if (!(total > 0.0)) throw InvariantViolation("momentum distribution carries no weight");
    Moments out;
    out.mean = first / total;
    double second = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) second += w[i] * (p[i] - out.mean) * (p[i] - out.mean);
    out.variance = second / total;
    return out;
}

}  // namespace

Moments momentum_moments(const MomentumDistribution& dist) {
    const std::size_t n = dist.values.size();
    if (!dist.is_density && n > 6) {
        double edge = 0.0;
        for (std::size_t i = 0; i < 3; ++i) edge += std::abs(dist.values[i]) + std::abs(dist.values[n - 1 - i]);
        if (edge > 1e-6 * dist.total()) {
            throw InvariantViolation("momentum support reaches the zone boundary; re-centre the window");
        }
    }
    return moments_of(dist.momenta, dist.values);
}

Moments momentum_moments_above(const MomentumDistribution& dist, double threshold) {
    std::vector<double> p, w;
    for (std::size_t i = 0; i < dist.values.size(); ++i) {
        if (dist.momenta[i] > threshold) {
            p.push_back(dist.momenta[i]);
            w.push_back(dist.values[i]);
        }
    }
    return moments_of(p, w);
}

double purity(const DensityMatrix& rho) {
    if (rho.rows() != rho.cols() || rho.rows() == 0) throw InvariantViolation("density matrix must be square");
    if (hermiticity_defect(rho) > 1e-8) throw InvariantViolation("density matrix is not Hermitian");
    if (trace_defect(rho) > 1e-6) throw InvariantViolation("density matrix trace deviates from 1");
    return rho.cwiseAbs2().sum();
}

void ObservableSeries::validate() const {
    const std::size_t n = times.size();
    if (mean_p.size() != n || var_p.size() != n || purity.size() != n) throw InvariantViolation("series columns differ in length");
    for (std::size_t i = 1; i < n; ++i) {
        if (!(times[i] > times[i - 1])) throw InvariantViolation("series times must be strictly increasing");
    }
    for (const double r : purity) {
        if (!(r > 0.0) || r > 1.0 + 1e-8) throw InvariantViolation("purity outside (0, 1]");
    }
}

ObservableSeries observables_from_states(const AveragedStateSeries& series, const MomentumBasis& basis) {
    ObservableSeries out;
    out.times = series.times;
    out.provenance = series.provenance;
    out.metadata["K"] = std::to_string(series.realizations);
    for (const auto& rho : series.states) {
        const Moments mom = momentum_moments(momentum_distribution(rho, basis));
        out.mean_p.push_back(mom.mean);
        out.var_p.push_back(mom.variance);
        out.purity.push_back(purity(rho));
    }
    return out;
}

void write_series_csv(std::ostream& os, const ObservableSeries& series) {
    os << std::setprecision(17);
    for (const auto& [key, value] : series.metadata) os << "# " << key << '=' << value << '\n';
    os << "time,mean_p,var_p,purity,provenance\n";
    const std::string tag = to_string(series.provenance);
    for (std::size_t i = 0; i < series.size(); ++i) {
        os << series.times[i] << ',' << series.mean_p[i] << ',' << series.var_p[i] << ',' << series.purity[i] << ','
           << tag << '\n';
    }
}

ObservableSeries read_series_csv(std::istream& is) {
    ObservableSeries out;
    std::string line;
    bool header_seen = false;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq != std::string::npos && line.size() > 2) out.metadata[line.substr(2, eq - 2)] = line.substr(eq + 1);
            continue;
        }
        if (!header_seen) {
            if (line != "time,mean_p,var_p,purity,provenance") throw ConfigError("unexpected series header at line " + std::to_string(line_no));
            header_seen = true;
            continue;
        }
        std::stringstream ss(line);
        std::string cell[5];
        for (auto& c : cell) {
            if (!std::getline(ss, c, ',')) throw ConfigError("short series row at line " + std::to_string(line_no));
        }
        try {
            out.times.push_back(std::stod(cell[0]));
            out.mean_p.push_back(std::stod(cell[1]));
            out.var_p.push_back(std::stod(cell[2]));
            out.purity.push_back(std::stod(cell[3]));
        } catch (const std::exception&) {
            throw ConfigError("malformed number at line " + std::to_string(line_no));
        }
        out.provenance = provenance_from_string(cell[4]);
    }
    if (!header_seen) throw ConfigError("series file has no header");
    return out;
}

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (xs.empty()) throw ConfigError("cannot interpolate an empty series");
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
    const std::size_t lo = hi - 1;
    const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return (1.0 - w) * ys[lo] + w * ys[hi];
}

DeviationReport compare_series(const ObservableSeries& a, const ObservableSeries& b) {
    if (a.size() == 0 || b.size() == 0) throw ConfigError("cannot compare empty series");
    const double lo = std::max(a.times.front(), b.times.front());
    const double hi = std::min(a.times.back(), b.times.back());
    if (lo > hi) throw ConfigError("series have disjoint time ranges");

    auto in_overlap = [&](const ObservableSeries& s) {
        std::vector<double> t;
        for (const double x : s.times) {
            if (x >= lo - 1e-12 && x <= hi + 1e-12) t.push_back(x);
        }
        return t;
    };
    const auto ta = in_overlap(a);
    const auto tb = in_overlap(b);

    DeviationReport rep;
    rep.label_a = to_string(a.provenance);
    rep.label_b = to_string(b.provenance);
    rep.times = ta.size() <= tb.size() ? ta : tb;

    auto dev = [&](const std::vector<double>& ya, const std::vector<double>& yb) {
        Deviation d;
        double sq = 0.0;
        for (const double t : rep.times) {
            const double diff = interpolate(a.times, ya, t) - interpolate(b.times, yb, t);
            d.max_abs = std::max(d.max_abs, std::abs(diff));
            sq += diff * diff;
            d.mean_signed += diff;
        }
        const auto n = static_cast<double>(rep.times.size());
        d.rms = std::sqrt(sq / n);
        d.mean_signed /= n;
        return d;
    };
    rep.mean_p = dev(a.mean_p, b.mean_p);
    rep.var_p = dev(a.var_p, b.var_p);
    rep.purity = dev(a.purity, b.purity);

    for (const auto* s : {&a, &b}) {
        if (s->provenance == Provenance::oracle) {
            const auto it = s->metadata.find("K");
            if (it != s->metadata.end()) {
                const double k = std::stod(it->second);
                if (k > 0) rep.statistical_band = 1.0 / std::sqrt(k);
            }
        }
    }
    return rep;
}

void write_deviation_report(std::ostream& os, const DeviationReport& r) {
    os << std::setprecision(10);
    os << "observable,max_abs,rms,mean_signed  # " << r.label_a << " - " << r.label_b << " over " << r.times.size()
       << " samples";
    if (r.statistical_band) os << ", statistical band 1/sqrt(K)=" << *r.statistical_band;
    os << '\n';
    os << "mean_p," << r.mean_p.max_abs << ',' << r.mean_p.rms << ',' << r.mean_p.mean_signed << '\n';
    os << "var_p," << r.var_p.max_abs << ',' << r.var_p.rms << ',' << r.var_p.mean_signed << '\n';
    os << "purity," << r.purity.max_abs << ',' << r.purity.rms << ',' << r.purity.mean_signed << '\n';
}

}  // namespace qtransport
