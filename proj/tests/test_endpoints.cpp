#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mcisac/endpoints.hpp"
#include "mcisac/rng.hpp"

using namespace mcisac;

namespace {

// Exhaustive search over 2x2 transmit covariances at full power:
// S = [[a, c], [conj(c), P-a]] with |c| <= sqrt(a(P-a)); two-stage zoom.
double grid_min_snr_2x2(const ChannelSet& ch, const SystemConfig& cfg) {
    const double p = cfg.power;
    auto eval = [&](double a, double rfrac, double phi) {
        const double b = p - a;
        const double r = rfrac * std::sqrt(std::max(a * b, 0.0));
        const cxd c = std::polar(r, phi);
        ComplexMatrix m(2, 2);
        m(0, 0) = a;
        m(1, 1) = b;
        m(0, 1) = c;
        m(1, 0) = std::conj(c);
        const HermitianMatrix s = HermitianMatrix::unchecked(m);
        double worst = std::numeric_limits<double>::infinity();
        for (const CVector& h : ch.channels)
            worst = std::min(worst, s.quad_form(h) / cfg.noise_comm);
        return worst;
    };

    double best = -1.0, best_a = 0.5 * p, best_r = 0.5, best_phi = 0.0;
    auto sweep = [&](double a_lo, double a_hi, double r_lo, double r_hi, double phi_lo,
                     double phi_hi, int na, int nr, int nphi) {
        for (int ia = 0; ia <= na; ++ia)
            for (int ir = 0; ir <= nr; ++ir)
                for (int ip = 0; ip <= nphi; ++ip) {
                    const double a = a_lo + (a_hi - a_lo) * ia / na;
                    const double r = r_lo + (r_hi - r_lo) * ir / nr;
                    const double phi = phi_lo + (phi_hi - phi_lo) * ip / nphi;
                    const double v = eval(a, r, phi);
                    if (v > best) {
                        best = v;
                        best_a = a;
                        best_r = r;
                        best_phi = phi;
                    }
                }
    };
    sweep(0.0, p, 0.0, 1.0, 0.0, 2.0 * M_PI, 60, 30, 60);
    for (int stage = 0; stage < 3; ++stage) {
        const double da = 2.0 * p / 60 / std::pow(8.0, stage);
        const double dr = 2.0 / 30 / std::pow(8.0, stage);
        const double dphi = 2.0 * 2.0 * M_PI / 60 / std::pow(8.0, stage);
        sweep(std::max(0.0, best_a - da), std::min(p, best_a + da), std::max(0.0, best_r - dr),
              std::min(1.0, best_r + dr), best_phi - dphi, best_phi + dphi, 16, 16, 16);
    }
    return best;
}

}  // namespace

TEST_CASE("most accurate endpoint matches the closed form") {
    SystemConfig cfg;  // 4x4, L = 256, unit power -> bound 4*16/256 = 0.25
    const ChannelSet ch = generate_rayleigh_channels(3, 4, 17);
    const auto [pt, cov] = crb_min_point(ch, cfg);
    REQUIRE(pt.crb == Catch::Approx(0.25).margin(1e-14));

    double min_h2 = std::numeric_limits<double>::infinity();
    for (const CVector& h : ch.channels) min_h2 = std::min(min_h2, norm2sq(h));
    REQUIRE(pt.rate == Catch::Approx(std::log2(1.0 + 0.25 * min_h2)).epsilon(1e-12));

    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            const double want = (i == j) ? 0.25 : 0.0;
            REQUIRE(cov.matrix(i, j).real() == Catch::Approx(want).margin(1e-15));
            REQUIRE(cov.matrix(i, j).imag() == 0.0);
        }

    ChannelSet bad = ch;
    bad.channels[0].pop_back();
    REQUIRE_THROWS_AS(crb_min_point(bad, cfg), ContractViolation);
}

TEST_CASE("max-rate endpoint reduces to maximum-ratio transmission for identical users") {
    SystemConfig cfg;
    Rng rng(5);
    const CVector h = rng.cgaussian_vector(4, 1.0);
    ChannelSet ch;
    ch.channels = {h, h, h};

    const RateMaxResult res = rate_max_point_full(ch, cfg);
    const double want = std::log2(1.0 + cfg.power * norm2sq(h) / cfg.noise_comm);
    REQUIRE(res.point.rate == Catch::Approx(want).margin(1e-3));
    REQUIRE(res.point.rate <= res.rate_upper_bound + 1e-9);
    // all power in one direction: the bound on the estimation error diverges
    REQUIRE(std::isinf(res.point.crb));
    REQUIRE(res.probes > 0);
}

TEST_CASE("max-rate endpoint splits power across orthogonal users") {
    SystemConfig cfg;
    cfg.n_tx = 2;
    cfg.n_rx = 2;
    ChannelSet ch;
    ch.channels = {{cxd(1.0, 0.0), cxd(0.0, 0.0)}, {cxd(0.0, 0.0), cxd(1.0, 0.0)}};

    const auto [pt, cov] = rate_max_point(ch, cfg);
    REQUIRE(pt.rate == Catch::Approx(std::log2(1.5)).margin(1e-3));
    REQUIRE(cov.trace() <= cfg.power + 1e-9);
}

TEST_CASE("max-rate endpoint matches an exhaustive search in two antennas") {
    SystemConfig cfg;
    cfg.n_tx = 2;
    cfg.n_rx = 2;
    const ChannelSet ch = generate_rayleigh_channels(3, 2, 23);

    const RateMaxResult res = rate_max_point_full(ch, cfg);
    const double oracle_rate = std::log2(1.0 + grid_min_snr_2x2(ch, cfg));
    REQUIRE(res.point.rate == Catch::Approx(oracle_rate).margin(1e-2));
    // the grid point is feasible, so the certified rate may only sit above it
    // by bisection slack, never below by more than the grid resolution
    REQUIRE(res.point.rate >= oracle_rate - 1e-2);
}

TEST_CASE("certified covariance is feasible and the bound is honored") {
    SystemConfig cfg;
    for (std::uint64_t seed : {2ULL, 3ULL, 4ULL}) {
        const std::size_t users = 2 + static_cast<std::size_t>(seed);
        const ChannelSet ch = generate_rayleigh_channels(users, 4, seed);
        const RateMaxResult res = rate_max_point_full(ch, cfg);

        REQUIRE(res.point.rate <= res.rate_upper_bound + 1e-9);
        REQUIRE(res.covariance.trace() <= cfg.power * (1.0 + 1e-9));
        const auto [eig_min, vec] = min_eigpair(res.covariance.matrix);
        (void)vec;
        REQUIRE(eig_min >= -1e-9 * cfg.power);

        // the reported rate is exactly the rate of the reported covariance
        REQUIRE(res.point.rate ==
                Catch::Approx(multicast_rate(res.covariance, ch, cfg)).margin(1e-12));

        double weight_sum = 0.0;
        for (double w : res.mu_weights) {
            REQUIRE(w >= 0.0);
            weight_sum += w;
        }
        REQUIRE(weight_sum == Catch::Approx(1.0).margin(1e-12));
    }
}
