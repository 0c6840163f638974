#include "doctest.h"

#include <cmath>
#include <sstream>

#include "qtransport/lattice.hpp"
#include "qtransport/observables.hpp"
#include "test_support.hpp"

using namespace qtransport;

TEST_CASE("free ring spectrum") {
    LatticeSpec lat;
    lat.sites = 8;
    PotentialRealization v;
    v.lattice = lat;
    v.values.assign(8, 0.0);
    const RMatrix h = build_hamiltonian(lat, v);
    Eigen::SelfAdjointEigenSolver<RMatrix> es(h);
    const RVector e = es.eigenvalues();
    const double r2 = std::sqrt(2.0);
    const double expect[8] = {-2, -r2, -r2, 0, 0, r2, r2, 2};
    for (int n = 0; n < 8; ++n) CHECK(std::abs(e(n) - expect[n]) < 1e-14);
    CHECK((h - h.transpose()).norm() == 0.0);

    LatticeSpec big;
    big.sites = 12;
    Eigen::SelfAdjointEigenSolver<RMatrix> eb(build_hamiltonian(big, std::vector<double>(12, 0.0)));
    std::vector<double> band;
    for (int n = 0; n < 12; ++n) band.push_back(-2.0 * std::cos(2 * kPi * n / 12));
    std::sort(band.begin(), band.end());
    for (int n = 0; n < 12; ++n) CHECK(eb.eigenvalues()(n) == doctest::Approx(band[n]).epsilon(1e-13));
}

TEST_CASE("constant potential shifts the spectrum") {
    LatticeSpec lat;
    lat.sites = 16;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    std::vector<double> v(16), w(16);
    for (int n = 0; n < 16; ++n) {
        v[n] = 0.1 * g(rng);
        w[n] = v[n] + 0.37;
    }
    Eigen::SelfAdjointEigenSolver<RMatrix> a(build_hamiltonian(lat, v)), b(build_hamiltonian(lat, w));
    CHECK((b.eigenvalues() - a.eigenvalues() - RVector::Constant(16, 0.37)).cwiseAbs().maxCoeff() < 1e-13);
    CHECK_THROWS_AS(build_hamiltonian(lat, std::vector<double>(15, 0.0)), ConfigError);
}

TEST_CASE("gaussian packet initialization") {
    LatticeSpec lat;
    SUBCASE("p0 = 0 gives a real symmetric profile") {
        const CVector psi = init_gaussian_packet(lat, WavePacketSpec{6.0, 0.0, 50.0});
        for (int n = 0; n < 100; ++n) CHECK(std::abs(psi(n).imag()) < 1e-15);
        for (int d = 1; d < 40; ++d) CHECK(std::abs(psi(50 + d) - psi(50 - d)) < 1e-15);
    }
    SUBCASE("sigma = 10a, p0 = hbar/2a: norm and momentum variance") {
        const double p0 = nearest_grid_momentum(lat, 0.5, 1.0);
        const CVector psi = init_gaussian_packet(lat, WavePacketSpec{10.0, p0, 50.0});
        CHECK(psi.squaredNorm() == doctest::Approx(1.0).epsilon(1e-13));
        // momentum-space summation oracle: explicit DFT
        double m1 = 0, m2 = 0;
        for (int k = -50; k < 50; ++k) {
            const double p = 2 * kPi * k / 100.0;
            Complex amp = 0;
            for (int n = 0; n < 100; ++n) amp += std::exp(Complex(0, -p * n)) * psi(n);
            const double prob = std::norm(amp) / 100.0;
            m1 += p * prob;
            m2 += p * p * prob;
        }
        const double var = m2 - m1 * m1;
        CHECK(m1 == doctest::Approx(p0).epsilon(1e-6));
        CHECK(var == doctest::Approx(1.0 / 400.0).epsilon(0.02));
        // position variance sigma^2 within 2%
        double x1 = 0, x2 = 0;
        for (int n = 0; n < 100; ++n) {
            x1 += n * std::norm(psi(n));
            x2 += n * n * std::norm(psi(n));
        }
        CHECK(x2 - x1 * x1 == doctest::Approx(100.0).epsilon(0.02));
    }
    SUBCASE("translation covariance") {
        const double p0 = nearest_grid_momentum(lat, 0.8, 1.0);
        const CVector a = init_gaussian_packet(lat, WavePacketSpec{5.0, p0, 40.0});
        const CVector b = init_gaussian_packet(lat, WavePacketSpec{5.0, p0, 47.0});
        for (int n = 0; n < 100; ++n) {
            const Complex expect = a((n - 7 + 100) % 100) * std::exp(Complex(0, p0 * 7.0));
            CHECK(std::abs(b(n) - expect) < 1e-12);
        }
    }
    SUBCASE("too wide packet is rejected") {
        CHECK_THROWS_AS(init_gaussian_packet(lat, WavePacketSpec{11.0, 0.5, 50.0}), ConfigError);
    }
}

TEST_CASE("spectral propagation") {
    LatticeSpec lat;
    lat.sites = 40;
    SUBCASE("Bloch wave acquires e^{+2iJt cos k}") {
        const double k = 2 * kPi * 5 / 40.0;
        CVector psi(40);
        for (int n = 0; n < 40; ++n) psi(n) = std::exp(Complex(0, k * n)) / std::sqrt(40.0);
        const SpectralPropagator u(build_hamiltonian(lat, std::vector<double>(40, 0.0)));
        const double t = 3.7;
        const CVector out = u.evolve(psi, t);
        const Complex phase = std::exp(Complex(0, 2.0 * t * std::cos(k)));
        CHECK((out - phase * psi).norm() < 1e-12);
    }
    SUBCASE("unitarity and energy conservation for a disordered ring") {
        const auto d = DisorderSpec::from_box_width(0.3, 2.0);
        const auto v = sample_realization(d, lat, 8);
        const RMatrix h = build_hamiltonian(lat, v);
        const CVector psi = init_gaussian_packet(lat, WavePacketSpec{3.0, nearest_grid_momentum(lat, 1.0, 1.0), 20.0});
        const std::vector<double> times{0.0, 0.5, 7.0, 150.0};
        const auto traj = propagate_realization(h, psi, times);
        CHECK((traj.states[0] - psi).norm() == 0.0);
        const double e0 = (psi.adjoint() * h * psi)(0).real();
        for (const auto& s : traj.states) {
            CHECK(std::abs(s.norm() - 1.0) < 1e-10);
            CHECK(std::abs((s.adjoint() * h * s)(0).real() - e0) < 1e-9 * std::abs(e0));
        }
    }
    SUBCASE("non-Hermitian input is rejected") {
        RMatrix h = build_hamiltonian(lat, std::vector<double>(40, 0.0));
        h(0, 3) = 0.1;
        CHECK_THROWS(propagate_realization(h, CVector::Unit(40, 0), std::vector<double>{0.0, 1.0}));
    }
}

TEST_CASE("ensemble averages") {
    LatticeSpec lat;
    const double p0 = nearest_grid_momentum(lat, 0.5, 1.0);
    const WavePacketSpec packet{10.0, p0, 50.0};
    const std::vector<double> times{0.0, 2.0, 10.0, 20.0};
    const MomentumBasis basis(lat, p0);

    SUBCASE("single realization stays pure") {
        const auto s = ensemble_density_series(DisorderSpec::from_box_width(0.05, 2.0), lat, packet, 1, times, 4);
        for (const auto& rho : s.states) CHECK(purity(rho) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(s.provenance == Provenance::oracle);
    }
    SUBCASE("no disorder: pure free evolution with constant momentum") {
        DisorderSpec none;
        none.ell = 2.0;
        const auto s = ensemble_density_series(none, lat, packet, 5, times, 4);
        const auto obs = observables_from_states(s, basis);
        const auto d0 = momentum_distribution(s.states[0], basis);
        for (std::size_t i = 0; i < times.size(); ++i) {
            CHECK(obs.purity[i] == doctest::Approx(1.0).epsilon(1e-10));
            CHECK(std::abs(obs.mean_p[i] - obs.mean_p[0]) < 1e-10);
            const auto di = momentum_distribution(s.states[i], basis);
            for (std::size_t n = 0; n < di.values.size(); ++n) CHECK(std::abs(di.values[n] - d0.values[n]) < 1e-10);
        }
    }
    SUBCASE("convexity: partition averages recombine exactly") {
        const auto d = DisorderSpec::from_box_width(0.1, 3.0);
        const auto pots = sample_ensemble(d, lat, 12, 77);
        const CVector psi = init_gaussian_packet(lat, packet);
        const auto all = run_oracle_ensemble(lat, pots, psi, times);
        const std::vector<PotentialRealization> a(pots.begin(), pots.begin() + 5), b(pots.begin() + 5, pots.end());
        const auto ea = run_oracle_ensemble(lat, a, psi, times);
        const auto eb = run_oracle_ensemble(lat, b, psi, times);
        for (std::size_t i = 0; i < times.size(); ++i) {
            const CMatrix mix = (5.0 * ea.series.states[i] + 7.0 * eb.series.states[i]) / 12.0;
            CHECK((mix - all.series.states[i]).norm() < 1e-12);
            CHECK(hermiticity_defect(all.series.states[i]) < 1e-12);
            CHECK(trace_defect(all.series.states[i]) < 1e-10);
            CHECK(purity(all.series.states[i]) <= 1.0 + 1e-12);
        }
        CHECK(purity(all.series.states.back()) < 1.0 - 1e-4);
    }
}

TEST_CASE("case (i) oracle: decorrelation drop then persistent decay") {
    const auto c = qtest::benchmark(1);
    std::vector<double> times;
    for (int i = 0; i <= 20; ++i) times.push_back(i * 1.0);
    const auto s = ensemble_density_series(c.disorder, c.lattice, c.packet, 250, times, 12345);
    const auto obs = observables_from_states(s, MomentumBasis(c.lattice, c.packet.p0));
    CHECK(obs.purity[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(obs.purity[3] < 1.0 - 1e-3);
    CHECK(obs.purity[20] < 0.99);
    // monotone beyond the drop, within the statistical scatter of K = 250
    for (std::size_t i = 6; i < times.size(); ++i) CHECK(obs.purity[i] <= obs.purity[i - 3] + 5e-4);
    CHECK(obs.purity.back() < obs.purity[5] - 5e-3);
    // mean momentum keeps decreasing
    CHECK(obs.mean_p[10] < obs.mean_p[2]);
    CHECK(obs.mean_p[20] < obs.mean_p[10]);
}

TEST_CASE("density dump round trip") {
    LatticeSpec lat;
    lat.sites = 10;
    const auto s = ensemble_density_series(DisorderSpec::from_box_width(0.1, 2.0), lat,
                                           WavePacketSpec{1.0, nearest_grid_momentum(lat, 1.0, 1.0), 5.0}, 3,
                                           std::vector<double>{0.0, 1.5}, 1);
    std::stringstream buf;
    write_density_dump(buf, s);
    const auto back = read_density_dump(buf);
    REQUIRE(back.times == s.times);
    for (std::size_t i = 0; i < s.states.size(); ++i) CHECK((back.states[i] - s.states[i]).norm() == 0.0);
}
