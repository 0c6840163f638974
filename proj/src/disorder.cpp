#include "qtransport/disorder.hpp"

#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include <unsupported/Eigen/FFT>

namespace qtransport {

DisorderSpec DisorderSpec::from_box_width(double w, double ell, std::uint64_t seed) {
    DisorderSpec s;
    s.box_width = w;
    s.c0 = w * w / 12.0;
    s.ell = ell;
    s.seed = seed;
    return s;
}

void DisorderSpec::validate() const {
    if (!(c0 >= 0.0) || !std::isfinite(c0)) throw ConfigError("disorder amplitude C0 must be finite and non-negative");
    if (!(ell > 0.0)) throw ConfigError("correlation length must be positive");
    if (box_width) {
        const double w2 = *box_width * *box_width / 12.0;
        if (std::abs(c0 - w2) > 1e-12 * std::max(c0, w2)) throw ConfigError("C0 and W are inconsistent (C0 = W^2/12)");
    }
}

double correlation_at(const DisorderSpec& spec, double x) {
    const double u = x / spec.ell;
    return spec.c0 * std::exp(-u * u);
}

double momentum_transfer_at(const DisorderSpec& spec, double q, double hbar) {
    const double u = 0.5 * q * spec.ell / hbar;
    return spec.c0 * spec.ell / (2.0 * std::sqrt(kPi) * hbar) * std::exp(-u * u);
}

double periodized_correlation(const DisorderSpec& spec, const LatticeSpec& lattice, double x) {
    const double period = lattice.length();
    double sum = correlation_at(spec, x);
    // Images beyond j in either direction are below exp(-(j L / ell)^2) relative.
    for (int j = 1; j < 64; ++j) {
        const double term = correlation_at(spec, x + j * period) + correlation_at(spec, x - j * period);
        sum += term;
        if (term <= 1e-18 * spec.c0) break;
    }
    return sum;
}

std::uint64_t realization_seed(std::uint64_t base_seed, std::uint64_t index) {
    std::uint64_t z = base_seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

// Box-Muller on top of mt19937_64; avoids the implementation-defined
// std::normal_distribution so realizations are portable bit for bit.
class PortableNormal {
public:
    explicit PortableNormal(std::uint64_t seed) : engine_(seed) {}

    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * kPi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * kPi * u2);
    }

private:
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace

PotentialRealization sample_realization(const DisorderSpec& spec, const LatticeSpec& lattice,
                                        std::uint64_t seed) {
    spec.validate();
    lattice.validate();
    if (spec.ell < 0.5 * lattice.spacing) throw ConfigError("correlation length below a/2 cannot be resolved on the lattice");

    const int m = lattice.sites;
    PotentialRealization out;
    out.seed = seed;
    out.lattice = lattice;
    out.values.assign(static_cast<std::size_t>(m), 0.0);
    if (spec.c0 == 0.0) return out;

    // Lattice power spectrum of the ring-periodized correlation.
    std::vector<double> corr(static_cast<std::size_t>(m));
    for (int n = 0; n < m; ++n) {
        const int lag = std::min(n, m - n);
        corr[static_cast<std::size_t>(n)] = periodized_correlation(spec, lattice, lag * lattice.spacing);
    }
    Eigen::FFT<double> fft;
    std::vector<Complex> spectrum;
    fft.fwd(spectrum, corr);

    PortableNormal normal(seed);
    std::vector<double> white(static_cast<std::size_t>(m));
    for (auto& w : white) w = normal();
    std::vector<Complex> modes;
    fft.fwd(modes, white);
    for (int k = 0; k < m; ++k) {
        const double s = std::max(spectrum[static_cast<std::size_t>(k)].real(), 0.0);
        modes[static_cast<std::size_t>(k)] *= std::sqrt(s);
    }
    std::vector<Complex> field;
    fft.inv(field, modes);
    for (int n = 0; n < m; ++n) out.values[static_cast<std::size_t>(n)] = field[static_cast<std::size_t>(n)].real();
    return out;
}

std::vector<PotentialRealization> sample_ensemble(const DisorderSpec& spec, const LatticeSpec& lattice, int count,
                                                  std::uint64_t base_seed, bool antithetic) {
    if (count < 1) throw ConfigError("ensemble size must be at least 1");
    std::vector<PotentialRealization> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        if (antithetic && k % 2 == 1) {
            PotentialRealization mirror = out.back();
            for (double& v : mirror.values) v = -v;
            out.push_back(std::move(mirror));
            continue;
        }
        out.push_back(sample_realization(spec, lattice, realization_seed(base_seed, static_cast<std::uint64_t>(k))));
    }
    return out;
}

EmpiricalStats validate_ensemble(std::span<const PotentialRealization> realizations) {
    if (realizations.size() < 2) throw ConfigError("ensemble statistics need at least two realizations");
    const LatticeSpec& lattice = realizations.front().lattice;
    const auto m = static_cast<std::size_t>(lattice.sites);
    for (const auto& r : realizations) {
        if (!(r.lattice == lattice) || r.values.size() != m) throw ConfigError("realizations live on different lattices");
    }

    const double count = static_cast<double>(realizations.size());
    EmpiricalStats st;
    st.count = static_cast<int>(realizations.size());
    st.mean.assign(m, 0.0);
    st.mean_stderr.assign(m, 0.0);
    st.lag_corr.assign(m, 0.0);
    st.lag_stderr.assign(m, 0.0);

    std::vector<double> sq_mean(m, 0.0), sq_lag(m, 0.0);
    for (const auto& r : realizations) {
        for (std::size_t n = 0; n < m; ++n) {
            st.mean[n] += r.values[n];
            sq_mean[n] += r.values[n] * r.values[n];
        }
        for (std::size_t lag = 0; lag < m; ++lag) {
            double c = 0.0;
            for (std::size_t n = 0; n < m; ++n) c += r.values[n] * r.values[(n + lag) % m];
            c /= static_cast<double>(m);
            st.lag_corr[lag] += c;
            sq_lag[lag] += c * c;
        }
    }
    auto finish = [count](double& mean, double sq, double& stderr) {
        mean /= count;
        const double var = std::max(sq / count - mean * mean, 0.0) * count / (count - 1.0);
        stderr = std::sqrt(var / count);
    };
    for (std::size_t n = 0; n < m; ++n) {
        finish(st.mean[n], sq_mean[n], st.mean_stderr[n]);
        finish(st.lag_corr[n], sq_lag[n], st.lag_stderr[n]);
    }
    return st;
}

void write_realization_csv(std::ostream& os, const PotentialRealization& v, const DisorderSpec& spec) {
    os << std::setprecision(17);
    os << "# model=gaussian-correlated c0=" << spec.c0 << " ell=" << spec.ell;
    if (spec.box_width) os << " W=" << *spec.box_width;
    os << "\n# lattice M=" << v.lattice.sites << " a=" << v.lattice.spacing << " J=" << v.lattice.hopping
       << " boundary=periodic\n";
    os << "# seed=" << v.seed << " generator=" << kGeneratorName << "\n";
    os << "site_index,potential_energy\n";
    for (std::size_t n = 0; n < v.values.size(); ++n) os << n << ',' << v.values[n] << '\n';
}

}  // namespace qtransport
