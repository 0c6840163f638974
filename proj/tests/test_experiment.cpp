#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qtransport/experiment.hpp"
#include "qtransport/report.hpp"

using namespace qtransport;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
    std::istringstream in(R"(# reduced ring for fast end-to-end runs
label = small
lattice.sites = 40
packet.sigma = 3
packet.p0 = 0.8
packet.x0 = 20
disorder.W = 0.2
disorder.ell = 2
ensemble.K = 24
time.stop = 10
time.points = 11
paths = oracle, channels, lindblad, analytic, closed-forms
bootstrap.resamples = 50
)");
    return parse_config(in, "small");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string parse_error(const std::string& text) {
    std::istringstream in(text);
    try {
        parse_config(in, "cfg");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("config parser diagnostics") {
    CHECK(parse_error("label = a\nbogus = 3\n").find("line 2") != std::string::npos);
    CHECK(parse_error("ensemble.K = 10\nensemble.K = 12\n").find("line 2") != std::string::npos);
    CHECK(parse_error("label = x\nbase = case-i\n").find("line 2") != std::string::npos);
    CHECK(parse_error("# c\n\npacket.sigma = ten\n").find("line 3") != std::string::npos);
    CHECK(parse_error("no equals sign\n").find("line 1") != std::string::npos);
    CHECK_FALSE(parse_error("base = nope\n").empty());
    CHECK_FALSE(parse_error("packet.sigma = 0.5\n").empty());     // below one site
    CHECK_FALSE(parse_error("packet.sigma = 11\n").empty());      // above M a / 10
    CHECK_FALSE(parse_error("ensemble.K = 0\n").empty());
    CHECK_FALSE(parse_error("ensemble.K = 5\nensemble.antithetic = true\n").empty());
    CHECK_FALSE(parse_error("paths = oracle, wobble\n").empty());
    CHECK(parse_error("base = case-ii\nensemble.K = 20\n").empty());
}

TEST_CASE("config round trip and presets") {
    for (const auto& info : list_presets()) {
        if (!is_run_preset(info.name)) {
            CHECK_THROWS_AS(preset(info.name), ConfigError);
            continue;
        }
        const auto c = preset(info.name);
        CHECK_NOTHROW(c.validate());
        std::ostringstream a;
        write_config(a, c);
        std::istringstream in(a.str());
        const auto back = parse_config(in, info.name);
        std::ostringstream b;
        write_config(b, back);
        CHECK(a.str() == b.str());
        CHECK(back.carrier() == c.carrier());
        CHECK(back.grid.values() == c.grid.values());
    }
    CHECK_THROWS_AS(preset("case-iv"), ConfigError);

    const auto ii = preset("case-ii");
    CHECK(ii.grid.stop == doctest::Approx(4 * 2 * ii.mass() * 25.0));
    CHECK(ii.realizations == 250);
    CHECK(ii.carrier() == doctest::Approx(2 * kPi * 21 / 100.0));
    CHECK(preset("case-i").carrier() == doctest::Approx(2 * kPi * 8 / 100.0));

    std::istringstream stop_in("base = case-iii\ntime.stop_tdd = 1\n");
    const auto iii = parse_config(stop_in);
    CHECK(iii.grid.stop == doctest::Approx(2 * iii.mass() * 100.0));
}

TEST_CASE("all paths agree without disorder") {
    auto c = preset("free");
    c.grid.points = 11;
    c.realizations = 8;
    c.paths.insert(PathKind::channels);
    const auto b = run_experiment(c);
    REQUIRE_FALSE(b.any_path_failed());
    CHECK(b.invariants_ok());
    const auto* oracle = b.series(PathKind::oracle);
    REQUIRE(oracle);
    for (PathKind k : {PathKind::channels, PathKind::lindblad, PathKind::analytic, PathKind::closed_forms}) {
        const auto* s = b.series(k);
        REQUIRE(s);
        for (std::size_t i = 0; i < s->size(); ++i) {
            CHECK(s->purity[i] == doctest::Approx(oracle->purity[i]).epsilon(0.01));
            CHECK(s->mean_p[i] == doctest::Approx(oracle->mean_p[i]).epsilon(0.01));
            CHECK(s->var_p[i] == doctest::Approx(oracle->var_p[i]).epsilon(0.01));
        }
    }
}

TEST_CASE("small disordered run: bundle contents and reproducibility") {
    const auto c = small_config();
    const auto b1 = run_experiment(c);
    RunOptions serial;
    serial.parallel = false;
    const auto b2 = run_experiment(c, serial);

    REQUIRE_FALSE(b1.any_path_failed());
    CHECK(b1.invariants_ok());
    REQUIRE(b1.band.has_value());
    CHECK(b1.band->resamples == 50);
    CHECK(b1.deviations.size() == 4);
    CHECK(b1.oracle_forward.has_value());
    const auto* ch = b1.series(PathKind::channels);
    const auto* oracle = b1.series(PathKind::oracle);
    for (std::size_t i = 0; i < ch->size(); ++i) CHECK(std::abs(ch->purity[i] - oracle->purity[i]) < 1e-8);
    CHECK(oracle->metadata.at("K") == "24");

    const fs::path root = fs::temp_directory_path() / "qtransport-test-bundle";
    fs::remove_all(root);
    const auto f1 = write_bundle(b1, root / "a");
    const auto f2 = write_bundle(b2, root / "b");
    REQUIRE(f1.size() == f2.size());
    std::set<std::string> names;
    for (std::size_t i = 0; i < f1.size(); ++i) {
        names.insert(f1[i].filename().string());
        CHECK(f1[i].filename() == f2[i].filename());
        CHECK(slurp(f1[i]) == slurp(f2[i]));
    }
    for (const char* n : {"manifest.txt", "series_oracle.csv", "series_lindblad.csv", "band.csv", "deviations.csv",
                          "timescales.csv", "invariants.csv", "plot.svg"})
        CHECK(names.count(n) == 1);
    std::ifstream series(root / "a" / "series_analytic.csv");
    const auto back = read_series_csv(series);
    CHECK(back.purity == b1.series(PathKind::analytic)->purity);
    CHECK(slurp(root / "a" / "manifest.txt").find("seed") != std::string::npos);
    fs::remove_all(root);
}

TEST_CASE("statistical band shrinks like 1/sqrt(K)") {
    auto c = small_config();
    c.paths = {PathKind::oracle};
    c.bootstrap_resamples = 400;
    auto rms = [](const std::vector<double>& v) {
        double s = 0;
        for (std::size_t i = 1; i < v.size(); ++i) s += v[i] * v[i];
        return std::sqrt(s / (v.size() - 1));
    };
    c.realizations = 40;
    const auto small = run_experiment(c);
    c.realizations = 160;
    const auto large = run_experiment(c);
    const double ratio = rms(small.band->purity) / rms(large.band->purity);
    CHECK(ratio == doctest::Approx(2.0).epsilon(0.3));
    CHECK(small.band->purity[0] < 1e-12);

    c.antithetic = true;
    const auto paired = run_experiment(c);
    CHECK(paired.band->paired);
}

TEST_CASE("invariant failures are reported, not thrown") {
    auto c = small_config();
    c.paths = {PathKind::oracle, PathKind::analytic};
    c.disorder = DisorderSpec::from_box_width(2.5, 2.0, c.seed);
    const auto b = run_experiment(c);
    // strong disorder spreads the oracle momentum over the whole zone
    CHECK(b.find(PathKind::oracle)->failure == FailureClass::invariant);
    CHECK(b.find(PathKind::oracle)->error.find("zone") != std::string::npos);
    CHECK(b.any_path_failed());
    CHECK(b.find(PathKind::analytic)->warnings.size() + (b.find(PathKind::analytic)->failure != FailureClass::none) > 0);
}

TEST_CASE("design check") {
    const auto li = design_check(lithium_device());
    CHECK(li.weak_backscattering == ConditionStatus::pass);
    CHECK(li.backscatter_ratio == doctest::Approx(100.0));
    REQUIRE(li.dispersion_ratio.has_value());
    CHECK(*li.dispersion_ratio == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*li.low_dispersion == ConditionStatus::marginal);
    CHECK(li.purity_loss > 0.02);
    CHECK(li.purity_loss < 0.06);
    CHECK(li.visibility == doctest::Approx((li.purity + 1) / 2));
    CHECK(li.length_unit == doctest::Approx(1e-6));

    auto quiet = lithium_device();
    quiet.disorder_ratio = 1e-12;
    CHECK(design_check(quiet).purity_loss < 1e-8);

    auto narrow = lithium_device();
    narrow.sigma *= 2;
    CHECK(*design_check(narrow).low_dispersion == ConditionStatus::pass);
    narrow.sigma /= 4;
    CHECK(*design_check(narrow).low_dispersion == ConditionStatus::fail);

    const auto parsed = parse_device("preset=lithium, sigma=1.4e-4");
    CHECK(parsed.sigma == 1.4e-4);
    CHECK(parsed.ell == 100e-6);
    CHECK_THROWS_AS(parse_device("sigma=1e-4, preset=lithium"), ConfigError);
    CHECK_THROWS_AS(parse_device("colour=blue"), ConfigError);
    CHECK_THROWS_AS(design_check(parse_device("preset=lithium, velocity=-1")), ConfigError);

    std::ostringstream os;
    write_design_report(os, li);
    CHECK(os.str().find("visibility") != std::string::npos);
}
