#include "qtransport/phase_space.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <unsupported/Eigen/FFT>

#include "qtransport/diagnostics.hpp"

namespace qtransport {

using quad::simplex_exp;
using quad::ramp_exp;
using quad::one_minus_cos_over_sq;

ContinuumParams ContinuumParams::from_lattice(const LatticeSpec& lattice, const WavePacketSpec& packet,
                                              const UnitSystem& units, const DisorderSpec& disorder) {
    ContinuumParams p;
    p.hbar = units.hbar;
    p.p0 = packet.p0;
    p.sigma = packet.sigma;
    p.mass = units.mass(lattice, packet.p0);
    p.disorder = disorder;
    return p;
}

void ContinuumParams::validate() const {
    if (!(p0 > 0.0)) throw ConfigError("carrier momentum must be positive");
    if (!(mass > 0.0) || !(sigma > 0.0) || !(hbar > 0.0)) throw ConfigError("mass, sigma and hbar must be positive");
    disorder.validate();
    const double strength = 4.0 * mass * mass * disorder.c0 / std::pow(p0, 4);
    if (strength >= 0.1) {
        std::ostringstream msg;
        msg << "disorder is not weak against the kinetic energy (4 m^2 C0 / p0^4 = " << strength << ")";
        warn(msg.str());
    }
}

double ContinuumParams::width_at(double t) const {
    const double spread = hbar * t / (2.0 * mass * sigma);
    return std::sqrt(sigma * sigma + spread * spread);
}

Complex gaussian_char_value(const WavePacketSpec& packet, double s, double q, double hbar) {
    if (!(packet.sigma > 0.0)) throw ConfigError("packet width must be positive");
    const double sg = packet.sigma;
    const double env = std::exp(-s * s / (8.0 * sg * sg) - q * q * sg * sg / (2.0 * hbar * hbar));
    return std::polar(env, (packet.p0 * s - q * packet.x0) / hbar);
}

CharFunction gaussian_char(const WavePacketSpec& packet, double hbar) {
    if (!(packet.sigma > 0.0)) throw ConfigError("packet width must be positive");
    return [packet, hbar](double s, double q) { return gaussian_char_value(packet, s, q, hbar); };
}

// ----- disorder influence ---------------------------------------------------

namespace {

double qprime_range(const ContinuumParams& p, const InfluenceOptions& opts) {
    const double unit = p.hbar / p.disorder.ell;
    return std::max(opts.range_in_inverse_ell * unit, 2.0 * p.p0 + opts.resonance_window * unit);
}

// Symmetric composite rule on [-Q, Q]: built adaptively on [0, Q] for the
// folded integrand f(q') + f(-q') and mirrored, so even/odd cancellations
// in q' are exact.
quad::CompositeRule symmetric_rule(const ContinuumParams& p, double t, double s_max, double q_max,
                                   const std::function<void(double, std::vector<Complex>&)>& folded,
                                   std::size_t probe_count, const InfluenceOptions& opts) {
    const double range = qprime_range(p, opts);
    const double rate = t * (range + p.p0 + q_max) / (p.mass * p.hbar) + s_max / p.hbar;
    const double width = std::min(p.hbar / p.disorder.ell, rate > 0.0 ? kPi / rate : range);
    quad::AdaptiveOptions aopt;
    aopt.abs_tol = opts.abs_tol;
    aopt.rel_tol = opts.rel_tol;
    auto half = quad::adaptive_composite(folded, probe_count, 0.0, range, {2.0 * p.p0}, width, aopt);
    quad::CompositeRule full;
    full.error_estimate = half.error_estimate;
    full.converged = half.converged;
    const std::size_t n = half.rule.size();
    full.rule.nodes.reserve(2 * n);
    full.rule.weights.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        full.rule.nodes.push_back(-half.rule.nodes[n - 1 - i]);
        full.rule.weights.push_back(half.rule.weights[n - 1 - i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        full.rule.nodes.push_back(half.rule.nodes[i]);
        full.rule.weights.push_back(half.rule.weights[i]);
    }
    return full;
}

}  // namespace

namespace {

DisorderInfluence::Kernel kernel_at(const ContinuumParams& p, double t, double qp, double q) {
    const double two_m_hbar = 2.0 * p.mass * p.hbar;
    const double a_plus = qp * (qp + 2.0 * p.p0) / two_m_hbar;
    const double a_minus = qp * (qp - 2.0 * p.p0) / two_m_hbar;
    const double b = qp * q / two_m_hbar;
    const double kappa = 2.0 * b;
    const double t2h = 0.5 * t * t;
    DisorderInfluence::Kernel k;
    if (q == 0.0) {
        k.shifted = one_minus_cos_over_sq(a_plus, t);
        k.fixed = one_minus_cos_over_sq(a_minus, t);
        return k;
    }
    k.shifted = t2h * (simplex_exp(-kappa * t, (a_plus - b) * t) + simplex_exp(-kappa * t, (-a_plus - b) * t));
    k.fixed = t2h * (ramp_exp((a_minus + b) * t) + ramp_exp((-a_minus + b) * t));
    return k;
}

}  // namespace

DisorderInfluence::Kernel DisorderInfluence::kernel(double qp, double q) const { return kernel_at(params_, t_, qp, q); }

DisorderInfluence::DisorderInfluence(const ContinuumParams& params, double t, double s_max, double q_max,
                                     const InfluenceOptions& opts)
    : params_(params), t_(t) {
    params_.validate();
    if (t < 0.0) throw ConfigError("time must be non-negative");
    if (t == 0.0 || params_.disorder.c0 == 0.0) return;

    s_max = std::abs(s_max);
    q_max = std::abs(q_max);
    const double ss[] = {-s_max, -0.5 * s_max, 0.0, 0.5 * s_max, s_max};
    const double qs[] = {0.0, 0.5 * q_max, q_max, -0.5 * q_max, -q_max};
    const std::size_t probe_count = 25;
    auto folded = [&](double x, std::vector<Complex>& out) {
        std::fill(out.begin(), out.end(), Complex{});
        for (const double sign : {1.0, -1.0}) {
            const double qp = sign * x;
            const double g = momentum_transfer_at(params_.disorder, qp, params_.hbar);
            for (std::size_t j = 0; j < 5; ++j) {
                const Kernel k = kernel(qp, qs[j]);
                for (std::size_t i = 0; i < 5; ++i) {
                    out[j * 5 + i] += g * (std::polar(1.0, qp * ss[i] / params_.hbar) * k.shifted - k.fixed);
                }
            }
        }
    };
    const auto built = symmetric_rule(params_, t, s_max, q_max, folded, probe_count, opts);
    rule_ = built.rule;
    error_ = 2.0 / (params_.hbar * params_.hbar) * built.error_estimate;
    if (!built.converged || error_ > opts.max_error) {
        std::ostringstream msg;
        msg << "disorder-influence quadrature did not converge at t=" << t << " (error estimate " << error_ << ")";
        throw NumericalFailure(msg.str());
    }
    g_weights_.resize(rule_.size());
    for (std::size_t k = 0; k < rule_.size(); ++k) {
        g_weights_[k] = rule_.weights[k] * momentum_transfer_at(params_.disorder, rule_.nodes[k], params_.hbar);
    }
}

Complex DisorderInfluence::operator()(double s, double q) const {
    if (rule_.size() == 0) return {};
    Complex sum{};
    for (std::size_t k = 0; k < rule_.size(); ++k) {
        const double qp = rule_.nodes[k];
        const Kernel kr = kernel(qp, q);
        sum += g_weights_[k] * (std::polar(1.0, qp * s / params_.hbar) * kr.shifted - kr.fixed);
    }
    return -2.0 / (params_.hbar * params_.hbar) * sum;
}

Complex DisorderInfluence::at_zero_q(double s) const { return (*this)(s, 0.0); }

Complex disorder_influence(const ContinuumParams& params, double s, double q, double t, const InfluenceOptions& opts) {
    const DisorderInfluence f(params, t, s, q, opts);
    return f(s, q);
}

Complex disorder_influence_numeric(const ContinuumParams& p, double s, double q, double t, double tol) {
    using boost::math::quadrature::gauss_kronrod;
    if (t == 0.0 || p.disorder.c0 == 0.0) return {};
    const double two_m_hbar = 2.0 * p.mass * p.hbar;
    auto over_qp = [&](double qp) {
        const double a_plus = qp * (qp + 2.0 * p.p0) / two_m_hbar;
        const double a_minus = qp * (qp - 2.0 * p.p0) / two_m_hbar;
        const double b = qp * q / two_m_hbar;
        auto over_t1 = [&](double t1) {
            auto over_t2 = [&](double t2) {
                const Complex first = std::cos(a_plus * t2) * std::polar(1.0, -b * t2) *
                                      std::polar(1.0, qp * (s - q / p.mass * (t - t1)) / p.hbar);
                const Complex second = std::cos(a_minus * t2) * std::polar(1.0, b * t2);
                return first - second;
            };
            return gauss_kronrod<double, 31>::integrate(over_t2, 0.0, t1, 12, tol);
        };
        return momentum_transfer_at(p.disorder, qp, p.hbar) * gauss_kronrod<double, 31>::integrate(over_t1, 0.0, t, 12, tol);
    };
    InfluenceOptions opts;
    const double range = qprime_range(p, opts);
    Complex total{};
    const double pts[] = {-range, -2.0 * p.p0, 0.0, 2.0 * p.p0, range};
    for (int i = 0; i < 4; ++i) {
        if (pts[i + 1] <= pts[i]) continue;
        total += gauss_kronrod<double, 31>::integrate(over_qp, pts[i], pts[i + 1], 15, tol);
    }
    return -2.0 / (p.hbar * p.hbar) * total;
}

// ----- characteristic-function grids -----------------------------------------

namespace {

std::vector<double> symmetric_axis(int points, double half) {
    if (points < 3 || points % 2 == 0) throw ConfigError("grid axes need an odd number (>= 3) of points");
    std::vector<double> axis(static_cast<std::size_t>(points));
    const int c = points / 2;
    for (int i = 0; i < points; ++i) axis[static_cast<std::size_t>(i)] = half * (i - c) / c;
    return axis;
}

}  // namespace

double CharGrid::normalization_defect() const {
    const std::size_t i0 = s.size() / 2, j0 = q.size() / 2;
    return std::abs(at(i0, j0) - Complex(1.0, 0.0));
}

double CharGrid::hermiticity_defect() const {
    double worst = 0.0;
    const std::size_t ns = s.size(), nq = q.size();
    for (std::size_t i = 0; i < ns; ++i) {
        for (std::size_t j = 0; j < nq; ++j) {
            worst = std::max(worst, std::abs(at(ns - 1 - i, nq - 1 - j) - std::conj(at(i, j))));
        }
    }
    return worst;
}

CharGrid evolve_char(const CharFunction& chi0, const ContinuumParams& params, double t, const GridOptions& opts) {
    params.validate();
    CharGrid grid;
    grid.time = t;
    grid.hbar = params.hbar;
    grid.s = symmetric_axis(opts.points, opts.s_halfwidth_sigmas * 2.0 * params.width_at(t));
    grid.q = symmetric_axis(opts.points, opts.q_halfwidth * params.hbar / params.sigma);
    const auto ns = static_cast<Eigen::Index>(grid.s.size());
    const auto nq = static_cast<Eigen::Index>(grid.q.size());
    grid.values.resize(ns, nq);

    const DisorderInfluence influence(params, t, grid.s.back(), grid.q.back(), opts.influence);
    CMatrix f = CMatrix::Zero(ns, nq);
    if (influence.nodes() > 0) {
        // F(s_i, q_j) = -(2/hbar^2) [sum_k E_ik Kshift_kj - Kfixed_j]
        const auto nk = static_cast<Eigen::Index>(influence.nodes());
        const auto& nodes = influence.qprime_nodes();
        const auto& gw = influence.weighted_spectrum();
        CMatrix shift(nk, nq);
        Eigen::RowVectorXcd fixed = Eigen::RowVectorXcd::Zero(nq);
        for (Eigen::Index k = 0; k < nk; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            for (Eigen::Index j = 0; j < nq; ++j) {
                const auto kr = influence.kernel(nodes[kk], grid.q[static_cast<std::size_t>(j)]);
                shift(k, j) = gw[kk] * kr.shifted;
                fixed(j) += gw[kk] * kr.fixed;
            }
        }
        CMatrix phase(ns, nk);
        for (Eigen::Index i = 0; i < ns; ++i) {
            for (Eigen::Index k = 0; k < nk; ++k) {
                phase(i, k) = std::polar(1.0, nodes[static_cast<std::size_t>(k)] * grid.s[static_cast<std::size_t>(i)] / params.hbar);
            }
        }
        f.noalias() = phase * shift;
        f.rowwise() -= fixed;
        f *= -2.0 / (params.hbar * params.hbar);
    }
    for (Eigen::Index i = 0; i < ns; ++i) {
        for (Eigen::Index j = 0; j < nq; ++j) {
            const double s = grid.s[static_cast<std::size_t>(i)];
            const double q = grid.q[static_cast<std::size_t>(j)];
            grid.values(i, j) = chi0(s - q * t / params.mass, q) * std::exp(-f(i, j));
        }
    }
    return grid;
}

MomentumDistribution momentum_dist_from_char(const CharGrid& grid, const std::vector<double>& momenta) {
    const std::size_t j0 = grid.q.size() / 2;
    if (std::abs(grid.q[j0]) > 0.0) throw ConfigError("grid has no q = 0 column");
    const std::size_t ns = grid.s.size();
    const double edge = std::max(std::abs(grid.at(0, j0)), std::abs(grid.at(ns - 1, j0)));
    if (edge >= 1e-6) throw ConfigError("s-range too narrow for the momentum transform (|chi| at boundary >= 1e-6)");
    const double ds = grid.s[1] - grid.s[0];
    MomentumDistribution d;
    d.momenta = momenta;
    d.is_density = true;
    d.spacing = momenta.size() > 1 ? momenta[1] - momenta[0] : 0.0;
    for (const double p : momenta) {
        Complex sum{};
        for (std::size_t i = 0; i < ns; ++i) {
            const double w = (i == 0 || i + 1 == ns) ? 0.5 : 1.0;
            sum += w * std::polar(1.0, -p * grid.s[i] / grid.hbar) * grid.at(i, j0);
        }
        d.values.push_back((sum * ds / (2.0 * kPi * grid.hbar)).real());
    }
    return d;
}

double purity_from_char(const CharGrid& grid) {
    const std::size_t ns = grid.s.size(), nq = grid.q.size();
    double edge = 0.0;
    for (std::size_t i = 0; i < ns; ++i) edge = std::max({edge, std::abs(grid.at(i, 0)), std::abs(grid.at(i, nq - 1))});
    for (std::size_t j = 0; j < nq; ++j) edge = std::max({edge, std::abs(grid.at(0, j)), std::abs(grid.at(ns - 1, j))});
    if (edge > 1e-6) {
        std::ostringstream msg;
        msg << "characteristic grid truncates the support (|chi| = " << edge << " on the boundary)";
        throw NumericalFailure(msg.str());
    }
    const double ds = grid.s[1] - grid.s[0];
    const double dq = grid.q[1] - grid.q[0];
    Complex sum{};
    for (std::size_t i = 0; i < ns; ++i) {
        const double wi = (i == 0 || i + 1 == ns) ? 0.5 : 1.0;
        for (std::size_t j = 0; j < nq; ++j) {
            const double wj = (j == 0 || j + 1 == nq) ? 0.5 : 1.0;
            sum += wi * wj * grid.at(i, j) * grid.at(ns - 1 - i, nq - 1 - j);
        }
    }
    return (sum * ds * dq / (2.0 * kPi * grid.hbar)).real();
}

// ----- analytic path for the Gaussian packet -------------------------------

namespace {

// First and second q'-moments of G(q')(1 - cos a_+ t)/a_+^2, folded on q' >= 0.
std::pair<double, double> moment_integrals(const ContinuumParams& p, double t, const InfluenceOptions& opts) {
    if (t == 0.0 || p.disorder.c0 == 0.0) return {0.0, 0.0};
    const double two_m_hbar = 2.0 * p.mass * p.hbar;
    auto folded = [&](double x, std::vector<Complex>& out) {
        const double g = momentum_transfer_at(p.disorder, x, p.hbar);
        const double hp = one_minus_cos_over_sq(x * (x + 2.0 * p.p0) / two_m_hbar, t);
        const double hm = one_minus_cos_over_sq(x * (x - 2.0 * p.p0) / two_m_hbar, t);
        out[0] = g * x * (hp - hm);
        out[1] = g * x * x * (hp + hm);
    };
    const auto r = symmetric_rule(p, t, 0.0, 0.0, folded, 2, opts);
    if (!r.converged) throw NumericalFailure("momentum-moment quadrature did not converge at t=" + std::to_string(t));
    // symmetric_rule mirrors nodes; integrate the folded integrand on x >= 0 only.
    double first = 0.0, second = 0.0;
    std::vector<Complex> v(2);
    for (std::size_t k = 0; k < r.rule.size(); ++k) {
        if (r.rule.nodes[k] < 0.0) continue;
        folded(r.rule.nodes[k], v);
        first += r.rule.weights[k] * v[0].real();
        second += r.rule.weights[k] * v[1].real();
    }
    const double pref = 2.0 / (p.hbar * p.hbar);
    return {pref * first, pref * second};
}

}  // namespace

double analytic_mean_momentum(const ContinuumParams& params, double t, const InfluenceOptions& opts) {
    params.validate();
    return params.p0 + moment_integrals(params, t, opts).first;
}

double analytic_momentum_variance(const ContinuumParams& params, double t, const InfluenceOptions& opts) {
    params.validate();
    const double second = moment_integrals(params, t, opts).second;
    const double bare = params.hbar * params.hbar / (4.0 * params.sigma * params.sigma);
    return bare + second;
}

double analytic_purity(const ContinuumParams& params, double t, const AnalyticOptions& opts) {
    params.validate();
    if (t == 0.0 || params.disorder.c0 == 0.0) return 1.0;
    // r = (1/pi) int dx dy exp(-x^2 - y^2) exp(-2 Re F(2 sigma x + c y, hbar y / sigma)),
    // c = hbar t / (m sigma). Trapezoidal in x and y; at fixed y the s-dependence of F
    // is a Fourier sum over a uniform q' grid, evaluated by one FFT.
    const double sg = params.sigma, hb = params.hbar, m = params.mass;
    const double qr = qprime_range(params, opts.influence);
    const double reach = opts.gaussian_reach;
    const double margin = 12.0;
    const double dx = kPi / (opts.oversample * 2.0 * sg * qr / hb + margin);
    const double ky = qr * t / (m * sg);
    const double dy = kPi / (opts.oversample * ky + margin);
    const int nx = static_cast<int>(std::ceil(reach / dx));
    const int ny = static_cast<int>(std::ceil(reach / dy));
    const double q_max = hb * ny * dy / sg;
    const double ds = 2.0 * sg * dx;
    const double rate = t * (qr + params.p0 + q_max) / (m * hb) + 2.0 * params.disorder.ell / hb;
    const double dq_req = kPi / (opts.oversample * rate + margin * params.disorder.ell / hb);
    std::size_t nfft = 1;
    while (static_cast<double>(nfft) < 2.0 * kPi * hb / (ds * dq_req)) nfft <<= 1;
    while (nfft < static_cast<std::size_t>(4 * nx + 4)) nfft <<= 1;
    if (nfft > (std::size_t{1} << 24)) throw NumericalFailure("purity quadrature needs an FFT beyond 2^24 points");
    const double dq = 2.0 * kPi * hb / (static_cast<double>(nfft) * ds);
    const auto kmax = static_cast<long>(std::floor(qr / dq));

    std::vector<double> qp, gw;
    for (long k = -kmax; k <= kmax; ++k) {
        qp.push_back(k * dq);
        gw.push_back(dq * momentum_transfer_at(params.disorder, k * dq, hb));
    }
    const double shear = hb * t / (m * sg);
    Eigen::FFT<double> fft;
    std::vector<Complex> modes(nfft), field(nfft);
    double total = 0.0;
    // Re F(-s, -q) = Re F(s, q), so the y < 0 half mirrors y > 0.
    for (int j = 0; j <= ny; ++j) {
        const double y = j * dy;
        const double wy = (j == 0 ? 1.0 : 2.0) * std::exp(-y * y);
        if (wy < 1e-300) continue;
        const double q = hb * y / sg;
        std::fill(modes.begin(), modes.end(), Complex{});
        Complex fixed{};
        for (std::size_t k = 0; k < qp.size(); ++k) {
            const auto kr = kernel_at(params, t, qp[k], q);
            const long idx = static_cast<long>(k) - kmax;
            const auto slot = static_cast<std::size_t>((idx % static_cast<long>(nfft) + static_cast<long>(nfft)) % static_cast<long>(nfft));
            modes[slot] = gw[k] * kr.shifted * std::polar(1.0, qp[k] * shear * y / hb);
            fixed += gw[k] * kr.fixed;
        }
        // field[n] = sum_k modes[k] exp(+2 pi i k n / N)
        fft.inv(field, modes);
        double inner = 0.0;
        for (int i = -nx; i <= nx; ++i) {
            const auto slot = static_cast<std::size_t>((i % static_cast<long>(nfft) + static_cast<long>(nfft)) % static_cast<long>(nfft));
            const Complex sum = field[slot] * static_cast<double>(nfft);
            const double re_f = (-2.0 / (hb * hb) * (sum - fixed)).real();
            const double x = i * dx;
            inner += std::exp(-x * x - 2.0 * re_f);
        }
        total += wy * inner;
    }
    return total * dx * dy / kPi;
}

MomentumDistribution analytic_momentum_distribution(const ContinuumParams& params, double t,
                                                    const std::vector<double>& momenta, const InfluenceOptions& opts) {
    params.validate();
    double p_reach = params.p0 + 8.0 * params.hbar / params.sigma + 8.0 * params.hbar / params.disorder.ell;
    for (const double p : momenta) p_reach = std::max(p_reach, std::abs(p));
    const double ds = std::min(0.125 * params.sigma, kPi * params.hbar / (2.0 * p_reach));
    const double half = 16.0 * params.sigma;
    const int n = static_cast<int>(std::ceil(half / ds));
    const DisorderInfluence influence(params, t, half, 0.0, opts);
    const WavePacketSpec packet{params.sigma, params.p0, 0.0};
    std::vector<Complex> chi(static_cast<std::size_t>(2 * n + 1));
    for (int i = -n; i <= n; ++i) {
        const double s = i * ds;
        chi[static_cast<std::size_t>(i + n)] = gaussian_char_value(packet, s, 0.0, params.hbar) * std::exp(-influence.at_zero_q(s));
    }
    MomentumDistribution d;
    d.momenta = momenta;
    d.is_density = true;
    d.spacing = momenta.size() > 1 ? momenta[1] - momenta[0] : 0.0;
    for (const double p : momenta) {
        Complex sum{};
        for (int i = -n; i <= n; ++i) sum += std::polar(1.0, -p * i * ds / params.hbar) * chi[static_cast<std::size_t>(i + n)];
        d.values.push_back((sum * ds / (2.0 * kPi * params.hbar)).real());
    }
    return d;
}

ObservableSeries analytic_series(const ContinuumParams& params, const std::vector<double>& times, const AnalyticOptions& opts) {
    ObservableSeries out;
    out.provenance = Provenance::analytic;
    out.times = times;
    {
        std::ostringstream m;
        m << std::setprecision(12) << params.mass;
        out.metadata["mass"] = m.str();
    }
    for (const double t : times) {
        const auto [first, second] = moment_integrals(params, t, opts.influence);
        out.mean_p.push_back(params.p0 + first);
        out.var_p.push_back(params.hbar * params.hbar / (4.0 * params.sigma * params.sigma) + second - first * first);
        out.purity.push_back(analytic_purity(params, t, opts));
    }
    return out;
}

// ----- closed-form corollaries -------------------------------------------

namespace {

double resonance_g(const ContinuumParams& p) { return momentum_transfer_at(p.disorder, 2.0 * p.p0, p.hbar); }

void check_time_regime(const ContinuumParams& p, double t, RegimeFlags& flags) {
    const double scale = std::max(p.disorder.ell, p.sigma);
    if (p.velocity() * t < kRegimeFactor * scale) {
        std::ostringstream msg;
        msg << "t=" << t << " is inside the decorrelation period (p0 t/m = " << p.velocity() * t << " < " << kRegimeFactor
            << " max(ell, sigma))";
        flags.valid = false;
        flags.warnings.push_back(msg.str());
        warn(msg.str());
    }
}

}  // namespace

double backscatter_weight(const ContinuumParams& params, double t) {
    return 2.0 * kPi * params.mass * t * resonance_g(params) / (params.p0 * params.hbar);
}

BackscatterResult backscatter_approx(const std::function<double(double)>& p0_density, const std::vector<double>& momenta,
                                     const ContinuumParams& params, double t) {
    params.validate();
    BackscatterResult r;
    r.transferred_weight = backscatter_weight(params, t);
    if (r.transferred_weight > 0.5) {
        std::ostringstream msg;
        msg << "backscattered weight " << r.transferred_weight << " exceeds 0.5 at t=" << t;
        throw InvariantViolation(msg.str());
    }
    if (t > 0.0) check_time_regime(params, t, r.flags);
    r.distribution.momenta = momenta;
    r.distribution.is_density = true;
    r.distribution.spacing = momenta.size() > 1 ? momenta[1] - momenta[0] : 0.0;
    for (const double p : momenta) {
        const double base = p0_density(p);
        r.distribution.values.push_back(base + r.transferred_weight * (p0_density(p + 2.0 * params.p0) - base));
    }
    return r;
}

double backscatter_momentum_slope(const ContinuumParams& params) {
    return -4.0 * kPi * params.mass * resonance_g(params) / params.hbar;
}

double mean_momentum_closed(const ContinuumParams& params, double t) {
    const double x = params.p0 * t / (params.mass * params.disorder.ell);
    const double shift = 2.0 * params.mass * params.mass * params.disorder.c0 / std::pow(params.p0, 3);
    return params.p0 - shift * (-std::expm1(-x * x) - x * x * std::exp(-x * x));
}

double mean_momentum_quadrature(const ContinuumParams& params, double t, const InfluenceOptions& opts) {
    return analytic_mean_momentum(params, t, opts);
}

double mean_momentum_plateau(const ContinuumParams& params) {
    return params.p0 - 2.0 * params.mass * params.mass * params.disorder.c0 / std::pow(params.p0, 3);
}

double variance_plateau(const ContinuumParams& params) {
    return params.hbar * params.hbar / (4.0 * params.sigma * params.sigma) +
           2.0 * params.mass * params.mass * params.disorder.c0 / (params.p0 * params.p0);
}

double variance_relative_increase(const ContinuumParams& params) {
    return 8.0 * params.mass * params.mass * params.disorder.c0 * params.sigma * params.sigma /
           (params.hbar * params.hbar * params.p0 * params.p0);
}

Flagged<double> purity_approx(const ContinuumParams& params, double t) {
    params.validate();
    Flagged<double> out{1.0, {}};
    const double ell = params.disorder.ell, sg = params.sigma, st = params.width_at(t);
    const double amp = 2.0 * params.mass * params.mass * params.disorder.c0 * ell /
                       (params.hbar * params.hbar * params.p0 * params.p0);
    const double loss = amp * (std::sqrt(ell * ell + 3.0 * sg * sg + st * st) - ell);
    out.value = 1.0 - loss;
    check_time_regime(params, t, out.flags);
    if (loss > 0.3) {
        std::ostringstream msg;
        msg << "predicted purity loss " << loss << " exceeds the small-loss bound 0.3";
        out.flags.valid = false;
        out.flags.warnings.push_back(msg.str());
        warn(msg.str());
    }
    return out;
}

Timescales timescales(const ContinuumParams& params, std::optional<double> waveguide_length) {
    params.validate();
    Timescales ts;
    const double m = params.mass, p0 = params.p0, hb = params.hbar;
    ts.decorrelation = params.disorder.ell * m / p0;
    // G(2 p0) is proportional to C0, so the ratio is taken with unit C0.
    DisorderSpec unit = params.disorder;
    unit.c0 = 1.0;
    const double g_unit = momentum_transfer_at(unit, 2.0 * p0, hb);
    ts.backscatter_dominance = g_unit > 0.0 ? hb * m / (2.0 * kPi * p0 * p0 * p0 * g_unit)
                                            : std::numeric_limits<double>::infinity();
    ts.dispersion_dominance = 2.0 * m * params.sigma * params.sigma / hb;
    ts.backscatter_ratio = p0 * params.disorder.ell / hb;
    ts.weak_backscattering = ts.backscatter_ratio >= kRegimeFactor;
    if (waveguide_length) {
        if (!(*waveguide_length > 0.0)) throw ConfigError("waveguide length must be positive");
        ts.transit = m * *waveguide_length / p0;
        ts.dispersion_ratio = *ts.transit / ts.dispersion_dominance;
        ts.low_dispersion = *ts.dispersion_ratio <= 1.0;
    }
    return ts;
}

MachZehnder mz_probabilities(double r, double phi) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("purity must lie in [0, 1]");
    MachZehnder mz;
    mz.visibility = 0.5 * (r + 1.0);
    const double swing = mz.visibility * std::sin(phi);
    mz.plus = 0.5 * (1.0 + swing);
    mz.minus = 0.5 * (1.0 - swing);
    return mz;
}

void write_char_grid_csv(std::ostream& os, const CharGrid& grid) {
    os << std::setprecision(17);
    os << "# time=" << grid.time << "\n# hbar=" << grid.hbar << "\n# units=" << grid.units << '\n';
    os << "s,q,re_chi,im_chi\n";
    for (std::size_t i = 0; i < grid.s.size(); ++i) {
        for (std::size_t j = 0; j < grid.q.size(); ++j) {
            const Complex c = grid.at(i, j);
            os << grid.s[i] << ',' << grid.q[j] << ',' << c.real() << ',' << c.imag() << '\n';
        }
    }
}

void write_distribution_csv(std::ostream& os, const MomentumDistribution& dist) {
    os << std::setprecision(17);
    os << (dist.is_density ? "p,probability_density\n" : "p,probability\n");
    for (std::size_t i = 0; i < dist.values.size(); ++i) os << dist.momenta[i] << ',' << dist.values[i] << '\n';
}

}  // namespace qtransport
