#pragma once

#include <cstdio>
#include <string>

#include "model.hpp"
#include "rng.hpp"

namespace mcisac {

/// Point scatterers: angle (radians, broadside = 0) paired with a complex gain.
struct ScatterTarget {
    std::vector<double> angles;
    CVector gains;

    std::size_t size() const {
        if (angles.size() != gains.size())
            throw ContractViolation("ScatterTarget: angles/gains length mismatch");
        return angles.size();
    }
};

/// Half-wavelength ULA steering vector [1, e^{j pi sin θ}, ..., e^{j pi (n-1) sin θ}].
inline CVector steering_vector(std::size_t n, double theta) {
    CVector a(n);
    const double phase = std::numbers::pi * std::sin(theta);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = phase * static_cast<double>(i);
        a[i] = cxd(std::cos(p), std::sin(p));
    }
    return a;
}

/// Response matrix G = sum_m beta_m conj(a_rx(θ_m)) a_tx(θ_m)^H  (n_rx x n_tx).
inline ComplexMatrix synthesize_target(const ScatterTarget& target, std::size_t n_rx,
                                       std::size_t n_tx) {
    ComplexMatrix g(n_rx, n_tx);
    for (std::size_t m = 0; m < target.size(); ++m) {
        const CVector ar = steering_vector(n_rx, target.angles[m]);
        const CVector at = steering_vector(n_tx, target.angles[m]);
        for (std::size_t i = 0; i < n_rx; ++i)
            for (std::size_t j = 0; j < n_tx; ++j)
                g(i, j) += target.gains[m] * std::conj(ar[i]) * std::conj(at[j]);
    }
    return g;
}

/// n_tx scatterers spread over [-60°, 60°] with unit-magnitude random-phase gains.
inline ScatterTarget default_target(std::size_t n_tx, std::uint64_t seed) {
    if (n_tx == 0) throw ContractViolation("default_target: n_tx must be positive");
    Rng rng(mix_seed(seed, 0x7461726765747321ULL));
    ScatterTarget t;
    const double span = std::numbers::pi / 3.0;
    for (std::size_t m = 0; m < n_tx; ++m) {
        const double frac =
            n_tx == 1 ? 0.5 : static_cast<double>(m) / static_cast<double>(n_tx - 1);
        t.angles.push_back(-span + 2.0 * span * frac);
        const double phi = 2.0 * std::numbers::pi * rng.uniform();
        t.gains.push_back(cxd(std::cos(phi), std::sin(phi)));
    }
    return t;
}

/// Gaussian probing waveform X = S^{1/2} W with W iid CN(0,1)  (n_tx x L).
inline ComplexMatrix sample_waveform(const HermitianMatrix& s, std::size_t symbols, Rng& rng) {
    const std::size_t n = s.dim();
    const ComplexMatrix root = psd_sqrt(s).matrix();
    ComplexMatrix w(n, symbols);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < symbols; ++l) w(i, l) = rng.cgaussian(1.0);
    return root * w;
}

/// Echo Y = G X + Z with Z iid CN(0, noise_radar).
inline ComplexMatrix simulate_echo(const ComplexMatrix& g, const ComplexMatrix& x,
                                   double noise_radar, Rng& rng) {
    if (g.cols() != x.rows()) throw ContractViolation("simulate_echo: dimension mismatch");
    ComplexMatrix y = g * x;
    for (std::size_t i = 0; i < y.rows(); ++i)
        for (std::size_t l = 0; l < y.cols(); ++l) y(i, l) += rng.cgaussian(noise_radar);
    return y;
}

/// Least-squares response estimate G_hat = Y X^H (X X^H)^{-1}.
inline ComplexMatrix ls_estimate(const ComplexMatrix& y, const ComplexMatrix& x) {
    if (y.cols() != x.cols()) throw ContractViolation("ls_estimate: Y and X disagree on symbols");
    const HermitianMatrix gram = HermitianMatrix::unchecked(x * x.adjoint());
    EvdResult ev = evd(gram);
    const double tol = default_pd_tol(gram);
    if (ev.eigenvalues.back() <= tol)
        throw SolverFailure("ls_estimate: waveform Gram matrix is rank deficient");
    for (double& v : ev.eigenvalues) v = 1.0 / v;
    const ComplexMatrix gram_inv = ev.reconstruct();
    return y * x.adjoint() * gram_inv;
}

/// Mean-square error of the LS estimate for one fixed waveform:
/// E ||G_hat - G||_F^2 = noise_radar * n_rx * tr((X X^H)^{-1}).
inline double fixed_waveform_mse(const ComplexMatrix& x, const SystemConfig& cfg) {
    const HermitianMatrix gram = HermitianMatrix::unchecked(x * x.adjoint());
    const double ti = trace_inverse(gram);
    return cfg.noise_radar * static_cast<double>(cfg.n_rx) * ti;
}

struct McReport {
    std::size_t trials = 0;
    std::size_t symbols = 0;
    bool fixed_waveform = false;
    double crb_trace = 0.0;      // lower bound implied by the design covariance
    double empirical_mse = 0.0;  // Monte Carlo mean of ||G_hat - G||_F^2
    double fixed_x_exact = 0.0;  // closed-form MSE of the frozen waveform, when used
    double ratio = 0.0;          // empirical_mse / crb_trace

    std::string to_json() const {
        char buf[512];
        std::snprintf(buf, sizeof buf,
                      "{\n  \"trials\": %zu,\n  \"L\": %zu,\n"
                      "  \"crb_trace\": %.12g,\n  \"empirical_mse\": %.12g,\n"
                      "  \"fixed_x_exact\": %.12g,\n  \"ratio\": %.12g\n}\n",
                      trials, symbols, crb_trace, empirical_mse, fixed_x_exact, ratio);
        return buf;
    }
};

/// Monte Carlo check of the estimation bound for a transmit covariance.
/// fix_waveform freezes one X draw so only the echo noise varies; otherwise
/// each trial redraws X from the design covariance.
inline McReport mc_crb_check(const TransmitCovariance& s, const SystemConfig& cfg,
                             std::size_t trials, std::uint64_t seed, bool fix_waveform = false) {
    cfg.validate();
    if (trials == 0) throw ContractViolation("mc_crb_check: need at least one trial");
    if (s.dim() != cfg.n_tx) throw ContractViolation("mc_crb_check: covariance dimension");

    McReport rep;
    rep.trials = trials;
    rep.symbols = cfg.symbols;
    rep.fixed_waveform = fix_waveform;
    rep.crb_trace = crb_trace(s, cfg);

    const ScatterTarget target = default_target(cfg.n_tx, seed);
    const ComplexMatrix g = synthesize_target(target, cfg.n_rx, cfg.n_tx);

    ComplexMatrix x_fixed(0, 0);
    if (fix_waveform) {
        Rng rng(mix_seed(seed, 0xfffe));
        x_fixed = sample_waveform(s.matrix, cfg.symbols, rng);
        rep.fixed_x_exact = fixed_waveform_mse(x_fixed, cfg);
    }

    double acc = 0.0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng rng(mix_seed(seed, trial));
        const ComplexMatrix x =
            fix_waveform ? x_fixed : sample_waveform(s.matrix, cfg.symbols, rng);
        const ComplexMatrix y = simulate_echo(g, x, cfg.noise_radar, rng);
        ComplexMatrix err = ls_estimate(y, x);
        err -= g;
        const double fe = err.frobenius_norm();
        acc += fe * fe;
    }
    rep.empirical_mse = acc / static_cast<double>(trials);
    rep.ratio = rep.empirical_mse / rep.crb_trace;
    return rep;
}

}  // namespace mcisac
