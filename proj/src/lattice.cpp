#include "qtransport/lattice.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "qtransport/diagnostics.hpp"

namespace qtransport {

RMatrix build_hamiltonian(const LatticeSpec& lattice, std::span<const double> potential) {
    lattice.validate();
    const int m = lattice.sites;
    if (static_cast<int>(potential.size()) != m) throw ConfigError("potential length does not match the lattice");
    RMatrix h = RMatrix::Zero(m, m);
    for (int n = 0; n < m; ++n) {
        const int next = (n + 1) % m;
        h(n, next) -= lattice.hopping;
        h(next, n) -= lattice.hopping;
        h(n, n) = potential[static_cast<std::size_t>(n)];
    }
    return h;
}

RMatrix build_hamiltonian(const LatticeSpec& lattice, const PotentialRealization& potential) {
    if (!(potential.lattice == lattice)) throw ConfigError("potential was sampled on a different lattice");
    return build_hamiltonian(lattice, std::span<const double>(potential.values));
}

CVector init_gaussian_packet(const LatticeSpec& lattice, const WavePacketSpec& packet, double hbar) {
    lattice.validate();
    const double a = lattice.spacing;
    const double ring = lattice.length();
    if (!(packet.sigma >= a)) throw ConfigError("packet width must be at least one lattice spacing");
    if (packet.sigma > ring / 10.0) throw ConfigError("packet too wide for the lattice (sigma > M a / 10)");

    const double dp = lattice.grid_momentum(1, hbar);
    const double n0 = packet.p0 / dp;
    if (std::abs(n0 - std::round(n0)) > 1e-9) {
        std::ostringstream msg;
        msg << "carrier momentum " << packet.p0 << " is not on the ring momentum grid (nearest "
            << std::round(n0) * dp << ")";
        throw ConfigError(msg.str());
    }
    if (packet.p0 * packet.sigma / hbar < 3.0) warn("packet momentum width is not small against p0 (p0 sigma / hbar < 3)");

    const int m = lattice.sites;
    CVector psi(m);
    for (int n = 0; n < m; ++n) {
        const double x = n * a;
        double d = std::remainder(x - packet.x0, ring);
        const double env = std::exp(-d * d / (4.0 * packet.sigma * packet.sigma));
        psi(n) = env * std::polar(1.0, packet.p0 * x / hbar);
    }
    psi /= psi.norm();
    return psi;
}

SpectralPropagator::SpectralPropagator(const RMatrix& hamiltonian, double hbar) : hbar_(hbar) {
    if (hamiltonian.rows() != hamiltonian.cols()) throw ConfigError("Hamiltonian must be square");
    const double asym = (hamiltonian - hamiltonian.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, hamiltonian.cwiseAbs().maxCoeff())) throw ConfigError("Hamiltonian is not Hermitian");
    Eigen::SelfAdjointEigenSolver<RMatrix> solver(hamiltonian);
    if (solver.info() != Eigen::Success) throw NumericalFailure("Hamiltonian diagonalization failed");
    energies_ = solver.eigenvalues();
    vectors_ = solver.eigenvectors();
}

CVector SpectralPropagator::evolve(const CVector& psi0, double t) const {
    if (t == 0.0) return psi0;
    CVector c = vectors_.transpose().cast<Complex>() * psi0;
    for (Eigen::Index i = 0; i < c.size(); ++i) c(i) *= std::polar(1.0, -energies_(i) * t / hbar_);
    return vectors_.cast<Complex>() * c;
}

StateTrajectory propagate_realization(const RMatrix& hamiltonian, const CVector& psi0,
                                      std::span<const double> times, double hbar) {
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (times[i] < times[i - 1]) throw ConfigError("propagation times must be sorted");
    }
    const SpectralPropagator prop(hamiltonian, hbar);
    const CMatrix vc = prop.eigenvectors().cast<Complex>();
    const CVector coeff = vc.transpose() * psi0;
    const double norm0 = psi0.squaredNorm();
    const double energy0 = (psi0.adjoint() * hamiltonian.cast<Complex>() * psi0)(0).real();
    const double energy_scale = std::max(std::abs(energy0), hamiltonian.cwiseAbs().maxCoeff());

    StateTrajectory out;
    out.times.assign(times.begin(), times.end());
    out.states.reserve(times.size());
    CVector c(coeff.size());
    for (const double t : times) {
        if (t == 0.0) {
            out.states.push_back(psi0);
            continue;
        }
        for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = coeff(i) * std::polar(1.0, -prop.energies()(i) * t / hbar);
        CVector psi = vc * c;
        const double norm = psi.squaredNorm();
        const double energy = (psi.adjoint() * hamiltonian.cast<Complex>() * psi)(0).real();
        if (std::abs(norm - norm0) > 1e-10) {
            std::ostringstream msg;
            msg << "norm drift " << norm - norm0 << " at t=" << t;
            throw InvariantViolation(msg.str());
        }
        if (std::abs(energy - energy0) > 1e-9 * energy_scale) {
            std::ostringstream msg;
            msg << "energy drift " << energy - energy0 << " at t=" << t;
            throw InvariantViolation(msg.str());
        }
        out.states.push_back(std::move(psi));
    }
    return out;
}

DensityMatrix average_density(std::span<const StateTrajectory> trajectories, std::size_t sample) {
    if (trajectories.empty()) throw ConfigError("empty ensemble");
    const Eigen::Index m = trajectories.front().states.at(sample).size();
    CMatrix psi(m, static_cast<Eigen::Index>(trajectories.size()));
    for (std::size_t k = 0; k < trajectories.size(); ++k) psi.col(static_cast<Eigen::Index>(k)) = trajectories[k].states.at(sample);
    CMatrix rho = psi * psi.adjoint() / static_cast<double>(trajectories.size());
    return rho;
}

OracleEnsemble run_oracle_ensemble(const LatticeSpec& lattice, std::span<const PotentialRealization> potentials,
                                   const CVector& psi0, std::span<const double> times, double hbar) {
    if (potentials.empty()) throw ConfigError("oracle ensemble needs at least one realization");
    OracleEnsemble out;
    out.trajectories.reserve(potentials.size());
    for (const auto& v : potentials) {
        out.trajectories.push_back(propagate_realization(build_hamiltonian(lattice, v), psi0, times, hbar));
        out.seeds.push_back(v.seed);
    }
    out.series.times.assign(times.begin(), times.end());
    out.series.provenance = Provenance::oracle;
    out.series.realizations = static_cast<int>(potentials.size());
    out.series.check_times();
    out.series.states.reserve(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) out.series.states.push_back(average_density(out.trajectories, i));
    return out;
}

OracleEnsemble run_oracle_ensemble(const DisorderSpec& spec, const LatticeSpec& lattice,
                                   const WavePacketSpec& packet, int realizations,
                                   std::span<const double> times, std::uint64_t base_seed, double hbar) {
    if (realizations < 1) throw ConfigError("K must be at least 1");
    std::vector<PotentialRealization> potentials;
    potentials.reserve(static_cast<std::size_t>(realizations));
    for (int k = 0; k < realizations; ++k) {
        potentials.push_back(sample_realization(spec, lattice, realization_seed(base_seed, static_cast<std::uint64_t>(k))));
    }
    return run_oracle_ensemble(lattice, potentials, init_gaussian_packet(lattice, packet, hbar), times, hbar);
}

AveragedStateSeries ensemble_density_series(const DisorderSpec& spec, const LatticeSpec& lattice,
                                            const WavePacketSpec& packet, int realizations,
                                            std::span<const double> times, std::uint64_t base_seed,
                                            double hbar) {
    return run_oracle_ensemble(spec, lattice, packet, realizations, times, base_seed, hbar).series;
}

namespace {

constexpr char kDumpMagic[8] = {'Q', 'T', 'R', 'H', 'O', '\0', 'v', '1'};

template <class T>
void put_le(std::ostream& os, T value) {
    static_assert(sizeof(T) == 8);
    std::uint64_t bits;
    std::memcpy(&bits, &value, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char buf[8];
    std::memcpy(buf, &bits, 8);
    os.write(buf, 8);
}

template <class T>
T get_le(std::istream& is) {
    char buf[8];
    if (!is.read(buf, 8)) throw ConfigError("truncated density dump");
    std::uint64_t bits;
    std::memcpy(&bits, buf, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    T value;
    std::memcpy(&value, &bits, 8);
    return value;
}

}  // namespace

void write_density_dump(std::ostream& os, const AveragedStateSeries& series) {
    const std::uint64_t m = series.states.empty() ? 0 : static_cast<std::uint64_t>(series.states.front().rows());
    os.write(kDumpMagic, 8);
    put_le<std::uint64_t>(os, m);
    put_le<std::uint64_t>(os, series.times.size());
    for (const double t : series.times) put_le(os, t);
    for (const auto& rho : series.states) {
        for (Eigen::Index r = 0; r < rho.rows(); ++r) {
            for (Eigen::Index c = 0; c < rho.cols(); ++c) {
                put_le(os, rho(r, c).real());
                put_le(os, rho(r, c).imag());
            }
        }
    }
}

AveragedStateSeries read_density_dump(std::istream& is) {
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kDumpMagic, 8) != 0) throw ConfigError("not a density dump");
    const auto m = static_cast<Eigen::Index>(get_le<std::uint64_t>(is));
    const auto count = get_le<std::uint64_t>(is);
    AveragedStateSeries out;
    for (std::uint64_t i = 0; i < count; ++i) out.times.push_back(get_le<double>(is));
    for (std::uint64_t i = 0; i < count; ++i) {
        CMatrix rho(m, m);
        for (Eigen::Index r = 0; r < m; ++r) {
            for (Eigen::Index c = 0; c < m; ++c) {
                const double re = get_le<double>(is);
                const double im = get_le<double>(is);
                rho(r, c) = Complex(re, im);
            }
        }
        out.states.push_back(std::move(rho));
    }
    return out;
}

}  // namespace qtransport
