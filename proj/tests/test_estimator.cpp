#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mcisac/estimator.hpp"

using namespace mcisac;

namespace {

ComplexMatrix hand_matrix(std::size_t r, std::size_t c, std::initializer_list<cxd> vals) {
    ComplexMatrix m(r, c);
    std::size_t p = 0;
    for (cxd v : vals) m(p / c, p % c) = v, ++p;
    return m;
}

}  // namespace

TEST_CASE("steering vector spot values") {
    const CVector broadside = steering_vector(4, 0.0);
    for (const cxd& v : broadside) {
        REQUIRE(v.real() == Catch::Approx(1.0).margin(1e-15));
        REQUIRE(v.imag() == Catch::Approx(0.0).margin(1e-15));
    }

    // sin(30 deg) = 1/2: quarter-turn per element
    const CVector tilted = steering_vector(4, std::numbers::pi / 6.0);
    const cxd want[4] = {cxd(1, 0), cxd(0, 1), cxd(-1, 0), cxd(0, -1)};
    for (std::size_t i = 0; i < 4; ++i) {
        REQUIRE(tilted[i].real() == Catch::Approx(want[i].real()).margin(1e-12));
        REQUIRE(tilted[i].imag() == Catch::Approx(want[i].imag()).margin(1e-12));
    }
}

TEST_CASE("target synthesis is rank-one per scatterer and additive") {
    ScatterTarget one;
    one.angles = {0.3};
    one.gains = {cxd(0.8, -0.6)};
    const ComplexMatrix g1 = synthesize_target(one, 4, 4);
    const HermitianMatrix gg = HermitianMatrix::unchecked(g1 * g1.adjoint());
    const EvdResult ev = evd(gg);
    REQUIRE(ev.eigenvalues[0] > 1.0);
    for (std::size_t i = 1; i < 4; ++i)
        REQUIRE(std::abs(ev.eigenvalues[i]) <= 1e-10 * ev.eigenvalues[0]);

    ScatterTarget other;
    other.angles = {-0.4};
    other.gains = {cxd(0.0, 1.0)};
    ScatterTarget both;
    both.angles = {0.3, -0.4};
    both.gains = {one.gains[0], other.gains[0]};
    const ComplexMatrix sum = synthesize_target(one, 4, 4) + synthesize_target(other, 4, 4);
    const ComplexMatrix diff = synthesize_target(both, 4, 4) - sum;
    REQUIRE(diff.max_abs() <= 1e-13);

    const ScatterTarget a = default_target(4, 9);
    const ScatterTarget b = default_target(4, 9);
    REQUIRE(a.size() == 4);
    for (std::size_t m = 0; m < 4; ++m) {
        REQUIRE(a.angles[m] == b.angles[m]);
        REQUIRE(a.gains[m] == b.gains[m]);
        REQUIRE(std::abs(a.gains[m]) == Catch::Approx(1.0).margin(1e-12));
        REQUIRE(std::abs(a.angles[m]) <= std::numbers::pi / 3.0 + 1e-12);
    }
}

TEST_CASE("sampled waveform reproduces the design covariance") {
    ComplexMatrix sm(2, 2);
    sm(0, 0) = 1.0;
    sm(1, 1) = 0.8;
    sm(0, 1) = cxd(0.3, 0.4);
    sm(1, 0) = cxd(0.3, -0.4);
    const HermitianMatrix s = HermitianMatrix::unchecked(sm);

    Rng r1(55), r2(55);
    const std::size_t big = 60000;
    const ComplexMatrix x = sample_waveform(s, big, r1);
    const ComplexMatrix x_again = sample_waveform(s, big, r2);
    REQUIRE(x.rows() == 2);
    REQUIRE(x.cols() == big);
    const ComplexMatrix rep = x - x_again;
    REQUIRE(rep.max_abs() == 0.0);  // same draw stream, same waveform

    ComplexMatrix emp = x * x.adjoint();
    emp *= cxd(1.0 / static_cast<double>(big), 0.0);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            REQUIRE(emp(i, j).real() == Catch::Approx(s(i, j).real()).margin(0.04));
            REQUIRE(emp(i, j).imag() == Catch::Approx(s(i, j).imag()).margin(0.04));
        }
}

TEST_CASE("least squares is exact without noise and rejects rank-deficient probing") {
    Rng rng(300);
    const ScatterTarget target = default_target(4, 300);
    const ComplexMatrix g = synthesize_target(target, 4, 4);
    const HermitianMatrix s = HermitianMatrix::scaled_identity(4, 0.25);
    const ComplexMatrix x = sample_waveform(s, 32, rng);

    const ComplexMatrix y = simulate_echo(g, x, 0.0, rng);  // no echo noise
    const ComplexMatrix diff = ls_estimate(y, x) - g;
    REQUIRE(diff.max_abs() <= 1e-10);

    ComplexMatrix flat(4, 32);
    for (std::size_t l = 0; l < 32; ++l) {
        const cxd v = rng.cgaussian();
        for (std::size_t i = 0; i < 4; ++i) flat(i, l) = v;  // rank one
    }
    REQUIRE_THROWS_AS(ls_estimate(y, flat), SolverFailure);

    REQUIRE_THROWS_AS(simulate_echo(g, ComplexMatrix(3, 32), 1.0, rng), ContractViolation);
}

TEST_CASE("frozen-waveform error matches its closed form") {
    SystemConfig cfg;  // n_rx = 4, unit echo noise
    const ComplexMatrix x =
        hand_matrix(2, 3, {cxd(1, 0), cxd(0, 0), cxd(0, 0), cxd(0, 0), cxd(2, 0), cxd(0, 0)});
    // X X^H = diag(1, 4): tr inverse = 1.25
    REQUIRE(fixed_waveform_mse(x, cfg) == Catch::Approx(4.0 * 1.25).margin(1e-12));

    const TransmitCovariance iso{HermitianMatrix::scaled_identity(4, 0.25)};
    const McReport rep = mc_crb_check(iso, cfg, 800, 42, true);
    REQUIRE(rep.fixed_waveform);
    REQUIRE(rep.fixed_x_exact > 0.0);
    REQUIRE(rep.empirical_mse ==
            Catch::Approx(rep.fixed_x_exact).epsilon(0.05));  // 800 noise draws
}

TEST_CASE("estimation error does not depend on the response being estimated") {
    const HermitianMatrix s = HermitianMatrix::scaled_identity(4, 0.25);
    Rng xr(910);
    const ComplexMatrix x = sample_waveform(s, 64, xr);
    const ComplexMatrix g1 = synthesize_target(default_target(4, 1), 4, 4);
    const ComplexMatrix g2 = synthesize_target(default_target(4, 2), 4, 4);

    Rng z1(77), z2(77);  // identical noise streams
    const ComplexMatrix e1 = ls_estimate(simulate_echo(g1, x, 1.0, z1), x) - g1;
    const ComplexMatrix e2 = ls_estimate(simulate_echo(g2, x, 1.0, z2), x) - g2;
    const ComplexMatrix diff = e1 - e2;
    REQUIRE(diff.max_abs() <= 1e-9);
}

TEST_CASE("random probing inflates the error by the expected small-sample factor") {
    SystemConfig cfg;
    const TransmitCovariance iso{HermitianMatrix::scaled_identity(4, 0.25)};
    double prev = std::numeric_limits<double>::infinity();
    struct Window {
        std::size_t symbols;
        double lo, hi;
    };
    // E ratio = L / (L - n_tx); generous Monte Carlo windows
    for (const Window w : {Window{8, 1.6, 2.5}, Window{64, 1.0, 1.2}, Window{512, 0.95, 1.07}}) {
        SystemConfig c = cfg;
        c.symbols = w.symbols;
        const McReport rep = mc_crb_check(iso, c, 800, 7, false);
        REQUIRE(rep.ratio >= w.lo);
        REQUIRE(rep.ratio <= w.hi);
        REQUIRE(rep.ratio < prev);
        prev = rep.ratio;
    }
}

TEST_CASE("report is deterministic and serializes every field") {
    SystemConfig cfg;
    const TransmitCovariance iso{HermitianMatrix::scaled_identity(4, 0.25)};
    const McReport a = mc_crb_check(iso, cfg, 10, 5);
    const McReport b = mc_crb_check(iso, cfg, 10, 5);
    const McReport c = mc_crb_check(iso, cfg, 10, 6);
    REQUIRE(a.empirical_mse == b.empirical_mse);
    REQUIRE(a.empirical_mse != c.empirical_mse);
    REQUIRE(a.trials == 10);
    REQUIRE(a.symbols == 256);
    REQUIRE(a.crb_trace == Catch::Approx(0.25).margin(1e-14));

    const std::string js = a.to_json();
    for (const char* key :
         {"\"trials\"", "\"L\"", "\"crb_trace\"", "\"empirical_mse\"", "\"fixed_x_exact\"",
          "\"ratio\""})
        REQUIRE(js.find(key) != std::string::npos);

    REQUIRE_THROWS_AS(mc_crb_check(iso, cfg, 0, 1), ContractViolation);
    const TransmitCovariance small{HermitianMatrix::scaled_identity(2, 0.5)};
    REQUIRE_THROWS_AS(mc_crb_check(small, cfg, 5, 1), ContractViolation);
}
