#include "qtransport/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace qtransport::quad {

namespace {

Rule golub_welsch(const Eigen::VectorXd& off_diagonal, double mu0) {
    const auto n = off_diagonal.size() + 1;
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
        jacobi(k, k + 1) = off_diagonal(k);
        jacobi(k + 1, k) = off_diagonal(k);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    Rule r;
    for (Eigen::Index k = 0; k < n; ++k) {
        r.nodes.push_back(solver.eigenvalues()(k));
        const double v0 = solver.eigenvectors()(0, k);
        r.weights.push_back(mu0 * v0 * v0);
    }
    return r;
}

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK tables).
constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double lo, hi;
};

}  // namespace

Rule gauss_legendre(int n, double lo, double hi) {
    if (n < 1) throw std::invalid_argument("Gauss-Legendre order must be positive");
    Eigen::VectorXd beta(n - 1);
    for (int k = 1; k < n; ++k) beta(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
    Rule r = n == 1 ? Rule{{0.0}, {2.0}} : golub_welsch(beta, 2.0);
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    for (std::size_t i = 0; i < r.size(); ++i) {
        r.nodes[i] = mid + half * r.nodes[i];
        r.weights[i] *= half;
    }
    return r;
}

Rule gauss_hermite(int n) {
    if (n < 2) throw std::invalid_argument("Gauss-Hermite order must be at least 2");
    Eigen::VectorXd beta(n - 1);
    for (int k = 1; k < n; ++k) beta(k - 1) = std::sqrt(0.5 * k);
    return golub_welsch(beta, std::sqrt(3.14159265358979323846));
}

CompositeRule adaptive_composite(const ProbeFn& probes, std::size_t probe_count, double lo, double hi,
                                 std::vector<double> breaks, double max_width, const AdaptiveOptions& opts) {
    using C = std::complex<double>;
    breaks.push_back(lo);
    breaks.push_back(hi);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::remove_if(breaks.begin(), breaks.end(), [&](double b) { return b < lo || b > hi; }), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end(), [](double a, double b) { return std::abs(a - b) < 1e-14; }),
                 breaks.end());

    std::vector<Panel> pending;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double w = breaks[i + 1] - breaks[i];
        const int pieces = std::max(1, static_cast<int>(std::ceil(w / max_width)));
        for (int k = 0; k < pieces; ++k) {
            pending.push_back({breaks[i] + w * k / pieces, breaks[i] + w * (k + 1) / pieces});
        }
    }

    std::vector<C> values(probe_count);
    auto gk = [&](const Panel& p, std::vector<C>& kron, std::vector<C>& gauss) {
        const double half = 0.5 * (p.hi - p.lo), mid = 0.5 * (p.hi + p.lo);
        std::fill(kron.begin(), kron.end(), C{});
        std::fill(gauss.begin(), gauss.end(), C{});
        for (int j = 0; j < 8; ++j) {
            const int signs = j == 7 ? 1 : 2;
            for (int s = 0; s < signs; ++s) {
                const double x = mid + (s == 0 ? 1.0 : -1.0) * half * kXgk[j];
                probes(x, values);
                for (std::size_t c = 0; c < probe_count; ++c) {
                    kron[c] += kWgk[j] * values[c];
                    if (j % 2 == 1) gauss[c] += kWg[j / 2] * values[c];
                }
            }
        }
        for (std::size_t c = 0; c < probe_count; ++c) {
            kron[c] *= half;
            gauss[c] *= half;
        }
    };

    std::vector<C> kron(probe_count), gauss(probe_count), total(probe_count);
    std::vector<std::pair<Panel, double>> accepted;
    // First sweep fixes the per-probe magnitude used by the relative tolerance.
    for (const auto& p : pending) {
        gk(p, kron, gauss);
        for (std::size_t c = 0; c < probe_count; ++c) total[c] += kron[c];
    }
    std::vector<double> tol(probe_count);
    for (std::size_t c = 0; c < probe_count; ++c) tol[c] = std::max(opts.abs_tol, opts.rel_tol * std::abs(total[c]));

    CompositeRule out;
    const double span = hi - lo;
    while (!pending.empty()) {
        const Panel p = pending.back();
        pending.pop_back();
        gk(p, kron, gauss);
        const double frac = (p.hi - p.lo) / span;
        bool ok = true;
        double err = 0.0;
        for (std::size_t c = 0; c < probe_count; ++c) {
            const double e = std::abs(kron[c] - gauss[c]);
            err = std::max(err, e);
            if (e > tol[c] * frac) ok = false;
        }
        const bool too_small = (p.hi - p.lo) < 1e-12 * span;
        const bool budget = accepted.size() + pending.size() >= static_cast<std::size_t>(opts.max_panels);
        if (ok || too_small || budget) {
            if (!ok) out.converged = false;
            accepted.push_back({p, err});
        } else {
            const double mid = 0.5 * (p.lo + p.hi);
            pending.push_back({p.lo, mid});
            pending.push_back({mid, p.hi});
        }
    }
    std::sort(accepted.begin(), accepted.end(), [](const auto& a, const auto& b) { return a.first.lo < b.first.lo; });
    for (const auto& [p, err] : accepted) {
        out.error_estimate += err;
        const double half = 0.5 * (p.hi - p.lo), mid = 0.5 * (p.hi + p.lo);
        for (int j = 0; j < 8; ++j) {
            out.rule.nodes.push_back(mid - half * kXgk[j]);
            out.rule.weights.push_back(half * kWgk[j]);
        }
        for (int j = 6; j >= 0; --j) {
            out.rule.nodes.push_back(mid + half * kXgk[j]);
            out.rule.weights.push_back(half * kWgk[j]);
        }
    }
    return out;
}

std::complex<double> phi1(double z) {
    using C = std::complex<double>;
    if (std::abs(z) < 0.25) {
        // sum (i z)^n / (n+1)!
        C term(1.0, 0.0), sum(0.0, 0.0);
        for (int n = 0; n < 14; ++n) {
            sum += term;
            term *= C(0.0, z) / static_cast<double>(n + 2);
        }
        return sum;
    }
    return (std::polar(1.0, z) - 1.0) / C(0.0, z);
}

std::complex<double> simplex_exp(double x, double y) {
    using C = std::complex<double>;
    const double big = std::max(std::abs(x), std::abs(y));
    if (big < 0.25) {
        // sum_n i^n h_n(x, y) / (n+2)!, h_n the complete homogeneous polynomial.
        C sum(0.0, 0.0), ipow(1.0, 0.0);
        double h = 1.0, xpow = 1.0, fact = 2.0;
        for (int n = 0; n < 16; ++n) {
            sum += ipow * (h / fact);
            xpow *= x;
            h = y * h + xpow;
            ipow *= C(0.0, 1.0);
            fact *= static_cast<double>(n + 3);
        }
        return sum;
    }
    if (std::abs(y) < std::abs(x)) std::swap(x, y);
    return (std::polar(1.0, y) * phi1(x - y) - phi1(x)) / C(0.0, y);
}

double one_minus_cos_over_sq(double a, double t) {
    const double x = a * t;
    if (std::abs(x) < 1e-4) return 0.5 * t * t * (1.0 - x * x / 12.0);
    const double s = std::sin(0.5 * x);
    return 2.0 * s * s / (a * a);
}

}  // namespace qtransport::quad
