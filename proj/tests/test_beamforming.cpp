#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mcisac/beamforming.hpp"
#include "mcisac/rng.hpp"

using namespace mcisac;

namespace {

HermitianMatrix random_psd(Rng& rng, std::size_t n, double shift) {
    ComplexMatrix g(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) g(i, j) = rng.cgaussian();
    ComplexMatrix prod = g * g.adjoint();
    for (std::size_t i = 0; i < n; ++i) prod(i, i) += shift;
    return HermitianMatrix::unchecked(prod);
}

// Re-checks a returned design against the raw constraint set.
void check_feasible_point(const FeasibilityVars& v, const ChannelSet& ch,
                          const SystemConfig& cfg, double gamma_bar, double t) {
    const double p = cfg.power;
    const double gamma = gamma_bar * static_cast<double>(cfg.symbols) /
                         (static_cast<double>(cfg.n_rx) * cfg.noise_radar);
    REQUIRE(v.s.trace() <= p * (1.0 + 1e-8));
    REQUIRE(trace_inverse(v.s) <= gamma * (1.0 + 1e-5));

    ComplexMatrix d = v.s.matrix();
    d -= outer(v.w, v.w);
    const auto [dmin, dvec] = min_eigpair(HermitianMatrix::unchecked(d));
    (void)dvec;
    REQUIRE(dmin >= -1e-8 * p);

    double h_scale = 0.0;
    for (const CVector& h : ch.channels) h_scale = std::max(h_scale, norm2sq(h));
    const double slack = 1e-6 * (1.0 + t) * (p * h_scale + cfg.noise_comm);
    for (const CVector& h : ch.channels) {
        const double quad = v.s.quad_form(h);
        const double psi = taylor_lower_bound(v.w, v.w, h);  // exact at the candidate itself
        REQUIRE(t * (quad + cfg.noise_comm) - (1.0 + t) * psi <= slack);
    }
}

// Global optimum when every user shares one channel: a beam of power q on
// the channel axis, the rest spread evenly across the complement. Largest
// q with 1/q + (n-1)^2/(P-q) within the inverse-trace budget, by bisection
// on the increasing branch.
double identical_user_best_sinr(double h2, const SystemConfig& cfg, double gamma_bar) {
    const double p = cfg.power;
    const double n1 = static_cast<double>(cfg.n_tx - 1);
    const double gamma = gamma_bar * static_cast<double>(cfg.symbols) /
                         (static_cast<double>(cfg.n_rx) * cfg.noise_radar);
    auto cost = [&](double q) { return 1.0 / q + n1 * n1 / (p - q); };
    double lo = p / static_cast<double>(cfg.n_tx);  // at the cost minimum
    REQUIRE(cost(lo) <= gamma);
    double hi = p * (1.0 - 1e-12);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (cost(mid) <= gamma ? lo : hi) = mid;
    }
    return lo * h2 / cfg.noise_comm;
}

}  // namespace

TEST_CASE("linearized power gain touches from below") {
    Rng rng(77);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 4);
        const CVector w = rng.cgaussian_vector(n);
        const CVector w_loc = rng.cgaussian_vector(n);
        const CVector h = rng.cgaussian_vector(n);

        const double exact_at_loc = std::norm(vdot(h, w_loc));
        const double scale = std::max(1.0, exact_at_loc);
        REQUIRE(taylor_lower_bound(w_loc, w_loc, h) ==
                Catch::Approx(exact_at_loc).margin(1e-12 * scale));

        const double exact = std::norm(vdot(h, w));
        REQUIRE(taylor_lower_bound(w, w_loc, h) <= exact + 1e-12 * std::max(1.0, exact));
    }
}

TEST_CASE("joint design coordinates round-trip") {
    Rng rng(123);
    const std::size_t n = 3;
    FeasibilityVars v;
    v.w = rng.cgaussian_vector(n);
    v.s = random_psd(rng, n, 0.1);
    const std::vector<double> x = v.encode();
    REQUIRE(x.size() == FeasibilityVars::dim(n));
    REQUIRE(x.size() == 2 * n + n * n);

    const FeasibilityVars back = FeasibilityVars::decode(std::span(x), n);
    for (std::size_t i = 0; i < n; ++i) {
        REQUIRE(back.w[i].real() == v.w[i].real());
        REQUIRE(back.w[i].imag() == v.w[i].imag());
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            REQUIRE(back.s(i, j).real() == Catch::Approx(v.s(i, j).real()).margin(1e-15));
            REQUIRE(back.s(i, j).imag() == Catch::Approx(v.s(i, j).imag()).margin(1e-15));
        }

    REQUIRE_THROWS_AS(FeasibilityVars::decode(std::span(x), n + 1), ContractViolation);
}

TEST_CASE("linearized feasibility accepts reachable targets and rejects wild ones") {
    SystemConfig cfg;
    const ChannelSet ch = generate_rayleigh_channels(3, 4, 31);
    const double gamma_bar = 0.5;

    CVector w_loc = ch.channels[0];
    const double scale = std::sqrt(0.5 * cfg.power / norm2sq(w_loc));
    for (cxd& v : w_loc) v *= scale;

    SECTION("zero target is always reachable inside the budgets") {
        const P23Result r = feasibility_p23(ch, cfg, gamma_bar, 0.0, w_loc);
        REQUIRE(r.feasible);
        check_feasible_point(r.point, ch, cfg, gamma_bar, 0.0);
    }
    SECTION("absurd target is infeasible") {
        double h_scale = 0.0;
        for (const CVector& h : ch.channels) h_scale = std::max(h_scale, norm2sq(h));
        const double t_wild = 50.0 * cfg.power * h_scale / cfg.noise_comm;
        const P23Result r = feasibility_p23(ch, cfg, gamma_bar, t_wild, w_loc);
        REQUIRE_FALSE(r.feasible);
    }
    SECTION("negative target is rejected") {
        REQUIRE_THROWS_AS(feasibility_p23(ch, cfg, gamma_bar, -0.1, w_loc), ContractViolation);
    }
    SECTION("a silent user pins any positive target") {
        ChannelSet muted = ch;
        muted.channels[1].assign(4, cxd(0.0, 0.0));
        const P23Result r = feasibility_p23(muted, cfg, gamma_bar, 0.25, w_loc);
        REQUIRE_FALSE(r.feasible);
    }
}

TEST_CASE("inner bisection returns a certified design") {
    SystemConfig cfg;
    const ChannelSet ch = generate_rayleigh_channels(3, 4, 31);
    const double gamma_bar = 0.5;

    CVector w_loc = ch.channels[0];
    const double scale = std::sqrt(0.8 * cfg.power / norm2sq(w_loc));
    for (cxd& v : w_loc) v *= scale;

    const P22Result r = solve_p22(ch, cfg, gamma_bar, w_loc);
    REQUIRE(r.t_opt >= 0.0);
    REQUIRE(r.probes >= 1);
    check_feasible_point(r.point, ch, cfg, gamma_bar, r.t_opt);
}

TEST_CASE("outer loop never decreases and never beats the covariance relaxation") {
    SystemConfig cfg;
    const ChannelSet ch = generate_rayleigh_channels(3, 4, 31);
    const double gamma_bar = 0.5;

    const BeamformingSolution sol = solve_p2_sca(ch, cfg, gamma_bar);
    REQUIRE_FALSE(sol.t_history.empty());
    for (std::size_t i = 1; i < sol.t_history.size(); ++i)
        REQUIRE(sol.t_history[i] >= sol.t_history[i - 1]);
    REQUIRE(sol.t == sol.t_history.back());
    REQUIRE(sol.rate == Catch::Approx(std::log2(1.0 + sol.t)).margin(1e-12));

    REQUIRE(sol.crb_residual <= 1e-5);
    REQUIRE(sol.power_residual <= 1e-6);
    REQUIRE(sol.psd_residual <= 1e-8);

    // s_s is exactly s_x - w w^H and reproduces the reported SINR
    double worst = std::numeric_limits<double>::infinity();
    for (const CVector& h : ch.channels)
        worst = std::min(worst, sinr_with_sensing(sol.w, sol.s_s, h, cfg));
    REQUIRE(worst == Catch::Approx(sol.t).epsilon(1e-12));

    P1Options tight;
    tight.gap_tol = 1e-5;
    const P1Solution relax = solve_p1(ch, cfg, gamma_bar, tight);
    REQUIRE(sol.rate <= relax.rate + 1e-6);
}

TEST_CASE("single shared channel: the beam recovers the known optimum") {
    SystemConfig cfg;
    Rng rng(9);
    const CVector h = rng.cgaussian_vector(4);
    ChannelSet ch;
    ch.channels = {h, h, h};
    const double gamma_bar = 0.5;

    const BeamformingSolution sol = solve_p2_sca(ch, cfg, gamma_bar);
    const double best = identical_user_best_sinr(norm2sq(h), cfg, gamma_bar);
    const double best_rate = std::log2(1.0 + best);
    REQUIRE(sol.rate >= best_rate - 0.05);
    REQUIRE(sol.rate <= best_rate + 1e-3);
}

TEST_CASE("accuracy budget below the floor is rejected") {
    SystemConfig cfg;
    const ChannelSet ch = generate_rayleigh_channels(3, 4, 31);
    REQUIRE_THROWS_AS(solve_p2_sca(ch, cfg, 0.2), SolverFailure);
}
