#include "doctest.h"

#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "qtransport/disorder.hpp"

using namespace qtransport;

namespace {
const double kSqrtPi = std::sqrt(kPi);
}

TEST_CASE("correlation function values") {
    DisorderSpec d;
    d.c0 = 1.0;
    d.ell = 2.0;
    CHECK(correlation_at(d, 0.0) == 1.0);
    CHECK(correlation_at(d, 1e3) == 0.0);
    for (double x : {0.3, 1.7, 5.0}) CHECK(correlation_at(d, x) == correlation_at(d, -x));

    const auto w = DisorderSpec::from_box_width(0.1, 3.0);
    CHECK(w.c0 == doctest::Approx(0.01 / 12.0).epsilon(1e-15));
    // independent evaluation: (W^2/12) e^{-1}
    CHECK(correlation_at(w, 3.0) == doctest::Approx(0.01 / 12.0 * 0.36787944117144233).epsilon(1e-14));
}

TEST_CASE("W and C0 consistency is enforced") {
    DisorderSpec d = DisorderSpec::from_box_width(0.1, 3.0);
    d.c0 *= 1.0 + 1e-9;
    CHECK_THROWS_AS(d.validate(), ConfigError);
    DisorderSpec neg;
    neg.c0 = -1.0;
    CHECK_THROWS_AS(neg.validate(), ConfigError);
    DisorderSpec zero_ell;
    zero_ell.c0 = 1.0;
    zero_ell.ell = 0.0;
    CHECK_THROWS_AS(zero_ell.validate(), ConfigError);
}

TEST_CASE("momentum-transfer distribution") {
    DisorderSpec d;
    d.c0 = 0.7;
    d.ell = 2.5;
    CHECK(momentum_transfer_at(d, 0.0) == doctest::Approx(0.7 * 2.5 / (2 * kSqrtPi)).epsilon(1e-15));
    for (double q : {0.1, 0.9, 3.0}) CHECK(momentum_transfer_at(d, q) == momentum_transfer_at(d, -q));

    // normalization: int G dq = C0
    using boost::math::quadrature::gauss_kronrod;
    const double total = gauss_kronrod<double, 61>::integrate([&](double q) { return momentum_transfer_at(d, q); },
                                                              -std::numeric_limits<double>::infinity(),
                                                              std::numeric_limits<double>::infinity(), 15, 1e-14);
    CHECK(total == doctest::Approx(0.7).epsilon(1e-8));

    // case (i): q = 2 p0, p0 = hbar / 2a, ell = 2a: exponent -(q ell / 2 hbar)^2 = -1
    const auto c1 = DisorderSpec::from_box_width(0.05, 2.0);
    const double pref = c1.c0 * 2.0 / (2 * kSqrtPi);
    CHECK(momentum_transfer_at(c1, 1.0) == doctest::Approx(pref * std::exp(-1.0)).epsilon(1e-14));
    // cross-check by direct quadrature of the Fourier integral of C(x)
    const double ft = gauss_kronrod<double, 61>::integrate(
                          [&](double x) { return std::cos(1.0 * x) * correlation_at(c1, x); },
                          -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 15, 1e-15) /
                      (2 * kPi);
    CHECK(ft == doctest::Approx(momentum_transfer_at(c1, 1.0)).epsilon(1e-10));
}

TEST_CASE("Fourier consistency on a fine grid") {
    DisorderSpec d;
    d.c0 = 1.0;
    d.ell = 3.0;
    const double dx = 0.01, xmax = 40.0;
    for (double q : {0.0, 0.4, 0.8, 1.5}) {
        double s = 0.0;
        for (double x = -xmax; x <= xmax + 1e-12; x += dx) s += std::cos(q * x) * correlation_at(d, x);
        s *= dx / (2 * kPi);
        CAPTURE(q);
        CHECK(std::abs(s - momentum_transfer_at(d, q)) <= 1e-6 * momentum_transfer_at(d, q));
    }
}

TEST_CASE("periodized correlation adds ring images") {
    LatticeSpec lat;
    lat.sites = 10;
    DisorderSpec d;
    d.c0 = 1.0;
    d.ell = 4.0;
    const double direct = correlation_at(d, 3.0) + correlation_at(d, -7.0) + correlation_at(d, 13.0) +
                          correlation_at(d, -17.0) + correlation_at(d, 23.0);
    CHECK(periodized_correlation(d, lat, 3.0) == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("sampling is deterministic and vanishes without disorder") {
    LatticeSpec lat;
    const auto d = DisorderSpec::from_box_width(0.1, 3.0);
    const auto a = sample_realization(d, lat, 42);
    const auto b = sample_realization(d, lat, 42);
    CHECK(a.values == b.values);
    const auto c = sample_realization(d, lat, 43);
    CHECK(a.values != c.values);
    for (double v : a.values) CHECK(std::isfinite(v));
    CHECK(a.values.size() == 100u);

    DisorderSpec zero;
    zero.ell = 3.0;
    for (double v : sample_realization(zero, lat, 5).values) CHECK(v == 0.0);
}

TEST_CASE("antithetic ensembles pair realizations with their negatives") {
    LatticeSpec lat;
    lat.sites = 20;
    const auto d = DisorderSpec::from_box_width(0.1, 3.0);
    const auto ens = sample_ensemble(d, lat, 6, 9, true);
    for (int k = 0; k < 6; k += 2)
        for (std::size_t n = 0; n < 20; ++n) CHECK(ens[k + 1].values[n] == -ens[k].values[n]);
    const auto plain = sample_ensemble(d, lat, 3, 9);
    CHECK(plain[0].values == ens[0].values);
    CHECK(plain[0].seed == realization_seed(9, 0));
}

TEST_CASE("generator fidelity over 10^4 realizations") {
    LatticeSpec lat;
    const auto d = DisorderSpec::from_box_width(0.1, 3.0);
    const auto ens = sample_ensemble(d, lat, 10000, 2024);
    const auto st = validate_ensemble(ens);
    int mean_violations = 0;
    for (std::size_t n = 0; n < 100; ++n) mean_violations += std::abs(st.mean[n]) > 3 * st.mean_stderr[n];
    // 3 sigma: a handful of the 100 sites may exceed it by chance, far fewer than a biased generator would
    CHECK(mean_violations <= 3);
    for (int lag = 0; lag <= 10; ++lag) {
        const double target = periodized_correlation(d, lat, lag);
        CAPTURE(lag);
        CHECK(std::abs(st.lag_corr[lag] - target) <= 3 * st.lag_stderr[lag]);
    }
    CHECK(std::abs(st.lag_corr[0] - d.c0) <= 3 * st.lag_stderr[0]);
}

TEST_CASE("validate_ensemble degenerate inputs") {
    LatticeSpec lat;
    lat.sites = 12;
    PotentialRealization z;
    z.lattice = lat;
    z.values.assign(12, 0.0);
    std::vector<PotentialRealization> zeros{z, z};
    const auto st = validate_ensemble(zeros);
    for (std::size_t n = 0; n < 12; ++n) {
        CHECK(st.mean[n] == 0.0);
        CHECK(st.lag_corr[n] == 0.0);
    }

    const auto d = DisorderSpec::from_box_width(0.1, 2.0);
    const auto one = sample_realization(d, lat, 3);
    std::vector<PotentialRealization> dup(7, one);
    const auto sd = validate_ensemble(dup);
    for (std::size_t lag = 0; lag < 12; ++lag) {
        double c = 0;
        for (std::size_t n = 0; n < 12; ++n) c += one.values[n] * one.values[(n + lag) % 12];
        CHECK(sd.lag_corr[lag] == doctest::Approx(c / 12).epsilon(1e-12));
        CHECK(sd.lag_stderr[lag] == doctest::Approx(0.0));
    }
    CHECK_THROWS_AS(validate_ensemble(std::vector<PotentialRealization>{one}), ConfigError);
}

TEST_CASE("realization CSV carries seed and generator") {
    LatticeSpec lat;
    lat.sites = 8;
    const auto d = DisorderSpec::from_box_width(0.1, 2.0, 77);
    std::ostringstream os;
    write_realization_csv(os, sample_realization(d, lat, 77), d);
    const std::string s = os.str();
    CHECK(s.find("77") != std::string::npos);
    CHECK(s.find(kGeneratorName) != std::string::npos);
}
