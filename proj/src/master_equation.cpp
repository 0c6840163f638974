#include "qtransport/master_equation.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include "qtransport/diagnostics.hpp"
#include "qtransport/lattice.hpp"
#include "qtransport/quadrature.hpp"

namespace qtransport {

namespace {

constexpr Complex kI{0.0, 1.0};

void hermitize(CMatrix& m) { m = 0.5 * (m + m.adjoint()).eval(); }

}  // namespace

double ChannelState::zero_sum_defect() const {
    if (offsets.empty()) return 0.0;
    CMatrix sum = CMatrix::Zero(offsets.front().rows(), offsets.front().cols());
    for (std::size_t e = 0; e < offsets.size(); ++e) sum += weights[e] * offsets[e];
    return sum.norm();
}

EnsembleSplit split_ensemble(const LatticeSpec& lattice, std::span<const PotentialRealization> potentials) {
    if (potentials.empty()) throw ConfigError("ensemble needs at least one realization");
    lattice.validate();
    const auto m = static_cast<Eigen::Index>(lattice.sites);
    EnsembleSplit out;
    const double p = 1.0 / static_cast<double>(potentials.size());
    RVector mean = RVector::Zero(m);
    for (const auto& v : potentials) {
        if (!(v.lattice == lattice) || static_cast<Eigen::Index>(v.values.size()) != m) {
            throw ConfigError("potential realization does not match the lattice");
        }
        mean += p * Eigen::Map<const RVector>(v.values.data(), m);
    }
    out.mean_hamiltonian = build_hamiltonian(lattice, std::span<const double>(mean.data(), static_cast<std::size_t>(m)));
    for (const auto& v : potentials) {
        out.perturbations.push_back(Eigen::Map<const RVector>(v.values.data(), m) - mean);
        out.weights.push_back(p);
    }
    return out;
}

// ----- coupled disorder channels ----------------------------------------------

ChannelRun integrate_coupled_channels(const LatticeSpec& lattice, std::span<const PotentialRealization> potentials,
                                      const DensityMatrix& rho0, std::span<const double> times, double hbar,
                                      const ChannelOptions& opts) {
    const EnsembleSplit split = split_ensemble(lattice, potentials);
    const auto m = static_cast<Eigen::Index>(lattice.sites);
    if (rho0.rows() != m || rho0.cols() != m) throw ConfigError("initial state does not match the lattice");
    if (trace_defect(rho0) > 1e-8 || hermiticity_defect(rho0) > 1e-10) throw InvariantViolation("initial state is not a density matrix");
    const std::size_t k = split.perturbations.size();
    const auto blocks = static_cast<Eigen::Index>(k + 1);

    const Eigen::SparseMatrix<double> hbar_sparse = split.mean_hamiltonian.sparseView();
    std::vector<RMatrix> gaps(k);  // V_i - V_j for each channel
    for (std::size_t e = 0; e < k; ++e) {
        const RVector& v = split.perturbations[e];
        gaps[e] = v.replicate(1, m) - v.transpose().replicate(m, 1);
    }
    const double inv_hbar = 1.0 / hbar;

    auto rhs = [&](double, const CMatrix& y) {
        CMatrix out(m, m * blocks);
        CMatrix global = CMatrix::Zero(m, m);  // sum_eps p_eps [V_eps, delta_eps]
        for (std::size_t e = 0; e < k; ++e) {
            global.array() += split.weights[e] * (gaps[e].array() * y.middleCols(m * static_cast<Eigen::Index>(e + 1), m).array());
        }
        const auto rho_bar = y.leftCols(m);
        out.leftCols(m) = -kI * inv_hbar * (hbar_sparse * rho_bar - rho_bar * hbar_sparse + global);
        for (std::size_t e = 0; e < k; ++e) {
            const auto d = y.middleCols(m * static_cast<Eigen::Index>(e + 1), m);
            CMatrix comm = hbar_sparse * d - d * hbar_sparse;
            comm.array() += gaps[e].array() * (d.array() + rho_bar.array());
            out.middleCols(m * static_cast<Eigen::Index>(e + 1), m) = -kI * inv_hbar * (comm - global);
        }
        return out;
    };

    CMatrix y0 = CMatrix::Zero(m, m * blocks);
    y0.leftCols(m) = rho0;

    ChannelRun run;
    run.series.times.assign(times.begin(), times.end());
    run.series.provenance = Provenance::channels;
    run.series.realizations = static_cast<int>(k);
    run.series.check_times();
    run.series.states.resize(times.size());

    auto zero_sum = [&](const CMatrix& y) {
        CMatrix sum = CMatrix::Zero(m, m);
        for (std::size_t e = 0; e < k; ++e) sum += split.weights[e] * y.middleCols(m * static_cast<Eigen::Index>(e + 1), m);
        return sum.norm();
    };
    auto post = [&](double t, CMatrix& y) {
        for (Eigen::Index b = 0; b < blocks; ++b) {
            auto blk = y.middleCols(m * b, m);
            blk = 0.5 * (blk + blk.adjoint()).eval();
        }
        const double defect = zero_sum(y);
        run.worst_zero_sum = std::max(run.worst_zero_sum, defect);
        if (defect > opts.zero_sum_tolerance) {
            std::ostringstream msg;
            msg << "channel offsets violate the zero-sum invariant at t=" << t << " (" << defect << ")";
            throw InvariantViolation(msg.str());
        }
    };
    CMatrix last;
    auto emit = [&](std::size_t i, double, const CMatrix& y) {
        run.series.states[i] = y.leftCols(m);
        if (i + 1 == times.size()) last = y;
    };
    const double t0 = times.empty() ? 0.0 : std::min(0.0, times.front());
    run.stats = integrate_dopri5(rhs, y0, t0, std::vector<double>(times.begin(), times.end()), opts.ode, post, emit);

    run.final_state.weights = split.weights;
    if (last.size() > 0) {
        run.final_state.rho_bar = last.leftCols(m);
        for (std::size_t e = 0; e < k; ++e) run.final_state.offsets.push_back(last.middleCols(m * static_cast<Eigen::Index>(e + 1), m));
    }
    return run;
}

// ----- second-order master equation -------------------------------------------

LindbladGenerator::LindbladGenerator(Mode mode, const LatticeSpec& lattice, const RMatrix& mean_h, const RMatrix& covariance,
                                     double hbar)
    : mode_(mode), hbar_(hbar), mean_h_(mean_h) {
    if (!(hbar > 0.0)) throw ConfigError("hbar must be positive");
    const auto m = mean_h_.rows();
    Eigen::SelfAdjointEigenSolver<RMatrix> cs(covariance);
    const double top = cs.eigenvalues().cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < cs.eigenvalues().size(); ++j) {
        const double lambda = cs.eigenvalues()(j);
        if (!(lambda > 1e-14 * top)) continue;
        site_modes_.push_back(cs.eigenvectors().col(j));
        weights_.push_back(lambda);
    }
    if (mode == Mode::sampled) {
        Eigen::SelfAdjointEigenSolver<RMatrix> hs(mean_h_);
        energies_ = hs.eigenvalues();
        const RMatrix& o = hs.eigenvectors();
        basis_ = o.cast<Complex>();
        for (const auto& u : site_modes_) modes_.push_back(o.transpose() * u.asDiagonal() * o);
        return;
    }
    // Plane waves |k_n>, k_n = 2 pi n / (M a), diagonalize the clean ring.
    energies_.resize(m);
    basis_.resize(m, m);
    const double norm = 1.0 / std::sqrt(static_cast<double>(m));
    for (Eigen::Index n = 0; n < m; ++n) {
        const double k = 2.0 * kPi * static_cast<double>(n) / static_cast<double>(m);
        energies_(n) = -2.0 * lattice.hopping * std::cos(k);
        for (Eigen::Index x = 0; x < m; ++x) basis_(x, n) = std::polar(norm, k * static_cast<double>(x));
    }
    spectrum_.assign(static_cast<std::size_t>(m), 0.0);
    for (Eigen::Index r = 0; r < m; ++r) {
        double acc = 0.0;
        for (Eigen::Index x = 0; x < m; ++x) {
            acc += covariance(0, x) * std::cos(2.0 * kPi * static_cast<double>(r * x) / static_cast<double>(m));
        }
        spectrum_[static_cast<std::size_t>(r)] = acc / static_cast<double>(m);
    }
}

LindbladGenerator LindbladGenerator::sampled(const LatticeSpec& lattice, std::span<const PotentialRealization> potentials,
                                             double hbar) {
    const EnsembleSplit split = split_ensemble(lattice, potentials);
    const auto m = static_cast<Eigen::Index>(lattice.sites);
    RMatrix cov = RMatrix::Zero(m, m);
    for (std::size_t e = 0; e < split.perturbations.size(); ++e) {
        cov.noalias() += split.weights[e] * split.perturbations[e] * split.perturbations[e].transpose();
    }
    return LindbladGenerator(Mode::sampled, lattice, split.mean_hamiltonian, cov, hbar);
}

LindbladGenerator LindbladGenerator::kernel(const LatticeSpec& lattice, const DisorderSpec& disorder, double hbar) {
    disorder.validate();
    lattice.validate();
    if (disorder.model != CorrelationModel::gaussian) throw ConfigError("kernel mode requires a Gaussian-correlated disorder model");
    const auto m = static_cast<Eigen::Index>(lattice.sites);
    RMatrix cov(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) cov(i, j) = periodized_correlation(disorder, lattice, static_cast<double>(i - j) * lattice.spacing);
    }
    const std::vector<double> zero(static_cast<std::size_t>(m), 0.0);
    return LindbladGenerator(Mode::kernel, lattice, build_hamiltonian(lattice, zero), cov, hbar);
}

std::size_t LindbladGenerator::mode_count() const { return weights_.size(); }

CMatrix LindbladGenerator::memory(double t) const {
    const auto m = energies_.size();
    CMatrix g(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index k = 0; k < m; ++k) g(j, k) = t * quad::phi1(-(energies_(j) - energies_(k)) * t / hbar_);
    }
    return g;
}

// With V = sum_q v_q T_q (T_q |k> = |k + q>) and <v_q v_-q> = S_q / M:
//   X_ab = sum_r s_r rho_{a-r, b-r} g(E_{b-r} - E_b),  Y_bb = sum_r s_r g(E_{b-r} - E_b).
void LindbladGenerator::kernel_terms(double t, const CMatrix* rho, CMatrix* x, CMatrix& y) const {
    const auto m = energies_.size();
    y = CMatrix::Zero(m, m);
    if (x) *x = CMatrix::Zero(m, m);
    for (Eigen::Index r = 0; r < m; ++r) {
        const double s = spectrum_[static_cast<std::size_t>(r)];
        for (Eigen::Index b = 0; b < m; ++b) {
            const Eigen::Index bb = (b - r + m) % m;
            const Complex coef = s * t * quad::phi1(-(energies_(bb) - energies_(b)) * t / hbar_);
            y(b, b) += coef;
            if (!x) continue;
            auto col = x->col(b);
            const auto src = rho->col(bb);
            col.segment(r, m - r) += coef * src.segment(0, m - r);
            if (r > 0) col.segment(0, r) += coef * src.segment(m - r, r);
        }
    }
}

CMatrix LindbladGenerator::to_eigen(const CMatrix& site) const { return basis_.adjoint() * site * basis_; }
CMatrix LindbladGenerator::to_site(const CMatrix& eigen) const { return basis_ * eigen * basis_.adjoint(); }

CMatrix LindbladGenerator::dissipator_eigen(double t, const CMatrix& rho) const {
    const auto m = energies_.size();
    if (t == 0.0 || weights_.empty()) return CMatrix::Zero(m, m);
    const double s = 1.0 / (hbar_ * hbar_);
    CMatrix x, y;
    if (mode_ == Mode::kernel) {
        kernel_terms(t, &rho, &x, y);
        CMatrix out = s * (x + x.adjoint());
        for (Eigen::Index b = 0; b < m; ++b) {
            for (Eigen::Index a = 0; a < m; ++a) out(a, b) -= s * (y(a, a) + std::conj(y(b, b))) * rho(a, b);
        }
        return out;
    }
    const CMatrix g = memory(t);
    x = CMatrix::Zero(m, m);
    y = CMatrix::Zero(m, m);
    CMatrix a(m, m), vr(m, m);
    for (std::size_t j = 0; j < modes_.size(); ++j) {
        const RMatrix& w = modes_[j];
        a = w.cast<Complex>().cwiseProduct(g);
        vr.noalias() = w * rho;
        x.noalias() += weights_[j] * vr * a;
        y.noalias() += weights_[j] * w * a;
    }
    CMatrix out = s * (x + x.adjoint());
    out.noalias() -= s * y * rho;
    out.noalias() -= s * rho * y.adjoint();
    return out;
}

CMatrix LindbladGenerator::rhs_eigen(double t, const CMatrix& rho) const {
    CMatrix out = dissipator_eigen(t, rho);
    const auto m = energies_.size();
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index k = 0; k < m; ++k) out(j, k) += -kI / hbar_ * (energies_(j) - energies_(k)) * rho(j, k);
    }
    return out;
}

CMatrix LindbladGenerator::rhs(double t, const CMatrix& rho) const {
    if (rho.rows() != energies_.size() || rho.cols() != energies_.size()) throw ConfigError("state dimension does not match the generator");
    return to_site(rhs_eigen(t, to_eigen(rho)));
}

CMatrix LindbladGenerator::effective_hamiltonian(double t) const {
    const auto m = energies_.size();
    CMatrix h = energies_.cast<Complex>().asDiagonal();
    if (t != 0.0 && !weights_.empty()) {
        CMatrix y;
        if (mode_ == Mode::kernel) {
            kernel_terms(t, nullptr, nullptr, y);
        } else {
            const CMatrix g = memory(t);
            y = CMatrix::Zero(m, m);
            for (std::size_t j = 0; j < modes_.size(); ++j) {
                y.noalias() += weights_[j] * modes_[j] * modes_[j].cast<Complex>().cwiseProduct(g);
            }
        }
        h += (-kI / (2.0 * hbar_)) * (y - y.adjoint());
    }
    CMatrix site = to_site(h);
    hermitize(site);
    return site;
}

CMatrix LindbladGenerator::jump_operator(std::size_t j, double t, int alpha) const {
    if (j >= weights_.size()) throw ConfigError("jump operator index out of range");
    if (alpha != 1 && alpha != -1) throw ConfigError("alpha must be +1 or -1");
    const auto m = energies_.size();
    const CMatrix v = site_modes_[j].cast<Complex>().asDiagonal();
    if (t == 0.0) return alpha == 1 ? v : CMatrix::Zero(m, m);
    CMatrix phased = to_eigen(v);
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b < m; ++b) phased(a, b) *= std::polar(1.0, -(energies_(a) - energies_(b)) * t / hbar_);
    }
    return 0.5 * (v + static_cast<double>(alpha) * to_site(phased));
}

CMatrix effective_hamiltonian_reference(const LatticeSpec& lattice, std::span<const PotentialRealization> potentials,
                                        double t, double hbar, int intervals) {
    if (intervals < 2 || intervals % 2) throw ConfigError("Simpson rule needs an even interval count");
    const EnsembleSplit split = split_ensemble(lattice, potentials);
    const auto m = split.mean_hamiltonian.rows();
    if (t == 0.0) return split.mean_hamiltonian.cast<Complex>();
    Eigen::SelfAdjointEigenSolver<RMatrix> hs(split.mean_hamiltonian);
    const RMatrix& o = hs.eigenvectors();
    const RVector& e = hs.eigenvalues();

    auto integrand = [&](double tp) {
        const CMatrix u = o * (e.cast<Complex>() * (-kI * tp / hbar)).array().exp().matrix().asDiagonal() * o.transpose();
        CMatrix sum = CMatrix::Zero(m, m);
        for (std::size_t k = 0; k < split.perturbations.size(); ++k) {
            const CMatrix v = split.perturbations[k].cast<Complex>().asDiagonal();
            const CMatrix vt = u * v * u.adjoint();
            sum += split.weights[k] * (v * vt - vt * v);
        }
        return sum;
    };
    auto simpson = [&](int n) {
        const double h = t / n;
        CMatrix acc = integrand(0.0) + integrand(t);
        for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * integrand(i * h);
        return CMatrix(acc * (h / 3.0));
    };
    const CMatrix coarse = simpson(intervals);
    const CMatrix fine = simpson(2 * intervals);
    const CMatrix integral = (16.0 * fine - coarse) / 15.0;
    CMatrix h = split.mean_hamiltonian.cast<Complex>() + (-kI / (2.0 * hbar)) * integral;
    hermitize(h);
    return h;
}

LindbladRun integrate_lindblad(const LindbladGenerator& gen, const DensityMatrix& rho0, std::span<const double> times,
                               const LindbladOptions& opts) {
    const auto m = static_cast<Eigen::Index>(gen.sites());
    if (rho0.rows() != m || rho0.cols() != m) throw ConfigError("initial state does not match the generator");
    if (trace_defect(rho0) > 1e-8 || hermiticity_defect(rho0) > 1e-10) throw InvariantViolation("initial state is not a density matrix");
    const RVector& e = gen.energies();
    const double hbar = gen.hbar();
    // Interaction picture: sigma_jk = exp(i (E_j - E_k) t / hbar) rho_jk.
    auto phases = [&](double t) {
        CMatrix p(m, m);
        for (Eigen::Index j = 0; j < m; ++j) {
            for (Eigen::Index k = 0; k < m; ++k) p(j, k) = std::polar(1.0, (e(j) - e(k)) * t / hbar);
        }
        return p;
    };
    auto rhs = [&](double t, const CMatrix& y) -> CMatrix {
        if (!opts.interaction_picture) return gen.rhs_eigen(t, y);
        const CMatrix p = phases(t);
        const CMatrix rho = y.cwiseProduct(p.conjugate());
        return gen.dissipator_eigen(t, rho).cwiseProduct(p);
    };

    LindbladRun run;
    run.series.times.assign(times.begin(), times.end());
    run.series.provenance = Provenance::lindblad;
    run.series.check_times();
    run.series.states.resize(times.size());
    run.min_eigenvalue.resize(times.size());
    bool trace_warned = false, positivity_warned = false;
    auto post = [&](double t, CMatrix& y) {
        hermitize(y);
        const double drift = std::abs(y.trace() - Complex(1.0, 0.0));
        if (drift > opts.trace_tolerance && !trace_warned) {
            std::ostringstream msg;
            msg << "master-equation trace drifted by " << drift << " at t=" << t;
            warn(msg.str());
            trace_warned = true;
        }
    };
    auto emit = [&](std::size_t i, double t, const CMatrix& y) {
        CMatrix rho_e = opts.interaction_picture ? CMatrix(y.cwiseProduct(phases(t).conjugate())) : y;
        CMatrix rho = gen.to_site(rho_e);
        hermitize(rho);
        Eigen::SelfAdjointEigenSolver<CMatrix> es(rho, Eigen::EigenvaluesOnly);
        run.min_eigenvalue[i] = es.eigenvalues()(0);
        const double tr = rho.trace().real();
        if (run.min_eigenvalue[i] < -opts.positivity_tolerance * tr && !positivity_warned) {
            std::ostringstream msg;
            msg << "master-equation state lost positivity at t=" << t << " (smallest eigenvalue " << run.min_eigenvalue[i] << ")";
            warn(msg.str());
            positivity_warned = true;
        }
        run.series.states[i] = std::move(rho);
    };
    const double t0 = times.empty() ? 0.0 : std::min(0.0, times.front());
    run.stats = integrate_dopri5(rhs, gen.to_eigen(rho0), t0, std::vector<double>(times.begin(), times.end()), opts.ode, post, emit);
    return run;
}

}  // namespace qtransport
