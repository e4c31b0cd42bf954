#pragma once

#include "covariance_opt.hpp"

namespace mcisac {

/// Tangent minorant of |h^H w|^2 at w_local:
///   psi(w) = 2 Re(w^H h h^H w_local) - |h^H w_local|^2.
/// Global lower bound with equality at w = w_local.
inline double taylor_lower_bound(const CVector& w, const CVector& w_local, const CVector& h) {
    const cxd a = vdot(h, w);
    const cxd b = vdot(h, w_local);
    return 2.0 * (std::conj(a) * b).real() - std::norm(b);
}

/// Real coordinates for the joint (beam, covariance) search: w first as
/// interleaved (Re, Im) pairs, then the packed Hermitian covariance.
struct FeasibilityVars {
    CVector w;
    HermitianMatrix s;

    static std::size_t dim(std::size_t n) { return 2 * n + hermitian_pack_dim(n); }

    std::vector<double> encode() const {
        const std::size_t n = w.size();
        if (s.dim() != n) throw ContractViolation("FeasibilityVars: w/s dimension mismatch");
        std::vector<double> x(dim(n));
        for (std::size_t i = 0; i < n; ++i) {
            x[2 * i] = w[i].real();
            x[2 * i + 1] = w[i].imag();
        }
        pack_hermitian(s, std::span(x).subspan(2 * n));
        return x;
    }

    static FeasibilityVars decode(std::span<const double> x, std::size_t n) {
        if (x.size() != dim(n)) throw ContractViolation("FeasibilityVars: bad encoded length");
        FeasibilityVars v;
        v.w.resize(n);
        for (std::size_t i = 0; i < n; ++i) v.w[i] = cxd(x[2 * i], x[2 * i + 1]);
        v.s = unpack_hermitian(x.subspan(2 * n), n);
        return v;
    }
};

struct P2Options {
    double t_tol = 1e-4;    // bisection width, times (1 + bracket top)
    double sca_tol = 1e-4;  // stop when the true min-SINR improves less than this
    int max_sca_iter = 30;
    long max_iter_per_probe = 60000;
    double vol_decades_per_dim = 3.0;
    std::optional<HermitianMatrix> s_init;  // covariance seed for the inner search
    std::ostream* trace = nullptr;
};

struct P23Result {
    bool feasible = false;
    FeasibilityVars point;
    bool low_confidence = false;  // infeasible verdict reached only by budget exhaustion
    long iterations = 0;
};

struct P22Result {
    double t_opt = 0.0;
    FeasibilityVars point;
    bool low_confidence = false;
    long probes = 0;
};

struct BeamformingSolution {
    CVector w;
    TransmitCovariance s_x;
    HermitianMatrix s_s;  // s_x - w w^H as reported (PSD within tolerance)
    double t = 0.0;       // achieved true min SINR
    double rate = 0.0;
    int iterations = 0;
    std::vector<double> t_history;  // incumbent after each outer iteration
    double crb_residual = 0.0;
    double power_residual = 0.0;
    double psd_residual = 0.0;
    bool low_confidence = false;
};

namespace detail {

struct P2Workspace {
    std::size_t n = 0;
    double power = 0.0, noise = 0.0, gamma = 0.0, h_scale = 0.0;
    std::vector<HermitianMatrix> hh;
    std::vector<double> power_cut;
    bool has_zero_channel = false;
};

inline P2Workspace make_p2_workspace(const ChannelSet& ch, const SystemConfig& cfg,
                                     double gamma_bar) {
    P2Workspace ws;
    ws.n = cfg.n_tx;
    ws.power = cfg.power;
    ws.noise = cfg.noise_comm;
    ws.gamma = gamma_bar * static_cast<double>(cfg.symbols) /
               (static_cast<double>(cfg.n_rx) * cfg.noise_radar);
    ws.hh.reserve(ch.users());
    for (const CVector& h : ch.channels) {
        ws.hh.push_back(HermitianMatrix::from_outer(h));
        const double v = norm2sq(h);
        ws.h_scale = std::max(ws.h_scale, v);
        if (v <= 0.0) ws.has_zero_channel = true;
    }
    std::vector<double> trace_grad =
        pack_trace_gradient(HermitianMatrix::scaled_identity(ws.n, 1.0));
    ws.power_cut.assign(FeasibilityVars::dim(ws.n), 0.0);
    std::copy(trace_grad.begin(), trace_grad.end(), ws.power_cut.begin() + 2 * ws.n);
    return ws;
}

inline void write_s_block(std::vector<double>& cut, std::size_t n,
                          const std::vector<double>& grad, double scale) {
    for (std::size_t i = 0; i < grad.size(); ++i) cut[2 * n + i] = scale * grad[i];
}

/// One feasibility run of the linearized joint problem at SINR target t.
inline P23Result p23_probe(const P2Workspace& ws, const ChannelSet& ch, double t,
                           const CVector& w_local, const HermitianMatrix& s_center,
                           const P2Options& opts) {
    const std::size_t n = ws.n;
    const std::size_t dim = FeasibilityVars::dim(n);
    const double p = ws.power;

    P23Result res;
    if (ws.has_zero_channel && t > 0.0) return res;  // a silent user caps SINR at zero

    FeasibilityVars center_vars;
    center_vars.w.assign(n, cxd(0.0, 0.0));
    for (std::size_t i = 0; i < n && i < w_local.size(); ++i) center_vars.w[i] = 0.5 * w_local[i];
    center_vars.s = s_center;
    std::vector<double> radii(dim);
    const double wr = 2.0 * std::sqrt(p);
    for (std::size_t i = 0; i < 2 * n; ++i) radii[i] = wr;
    for (std::size_t i = 2 * n; i < dim; ++i) radii[i] = p;
    EllipsoidState st = make_box_ellipsoid(center_vars.encode(), radii);
    const double vol_floor =
        st.log_volume - static_cast<double>(dim) * opts.vol_decades_per_dim * std::log(10.0);

    // per-user constants of the linearization
    std::vector<cxd> q(ch.users());
    std::vector<CVector> bvec(ch.users());
    for (std::size_t k = 0; k < ch.users(); ++k) {
        q[k] = vdot(ch.channels[k], w_local);
        bvec[k].resize(n);
        for (std::size_t i = 0; i < n; ++i) bvec[k][i] = ch.channels[k][i] * q[k];
    }

    const double tol_pow = 1e-9 * p;
    const double tol_user = 1e-9 * (1.0 + t) * (p * ws.h_scale + ws.noise);
    const double eps_pd = 1e-8 * p / static_cast<double>(n);
    const double tol_psd = 1e-10 * p;
    const double gamma_cap = ws.gamma * (1.0 + 1e-6);

    auto oracle = [&](const std::vector<double>& x) -> std::optional<std::vector<double>> {
        const FeasibilityVars v = FeasibilityVars::decode(std::span(x), n);
        if (v.s.trace() > p + tol_pow) return ws.power_cut;

        for (std::size_t k = 0; k < ch.users(); ++k) {
            const double quad = v.s.quad_form(ch.channels[k]);
            const double psi = taylor_lower_bound(v.w, w_local, ch.channels[k]);
            const double c = t * (quad + ws.noise) - (1.0 + t) * psi;
            if (c > tol_user) {
                std::vector<double> cut(dim, 0.0);
                for (std::size_t i = 0; i < n; ++i) {
                    cut[2 * i] = -2.0 * (1.0 + t) * bvec[k][i].real();
                    cut[2 * i + 1] = -2.0 * (1.0 + t) * bvec[k][i].imag();
                }
                if (t > 0.0) write_s_block(cut, n, pack_trace_gradient(ws.hh[k]), t);
                return cut;
            }
        }

        EvdResult sev = evd(v.s);
        if (sev.eigenvalues.back() < eps_pd) {
            // definiteness guard so the accuracy constraint has a gradient
            std::vector<double> cut(dim, 0.0);
            const HermitianMatrix vv =
                HermitianMatrix::from_outer(sev.vectors.col(n - 1));
            write_s_block(cut, n, pack_trace_gradient(vv), -1.0);
            return cut;
        }
        double trinv = 0.0;
        for (double wv : sev.eigenvalues) trinv += 1.0 / wv;
        if (trinv > gamma_cap) {
            for (double& wv : sev.eigenvalues) wv = -1.0 / (wv * wv);  // -S^{-2} spectrum
            const HermitianMatrix grad = HermitianMatrix::unchecked(sev.reconstruct());
            std::vector<double> cut(dim, 0.0);
            write_s_block(cut, n, pack_trace_gradient(grad), 1.0);
            return cut;
        }

        ComplexMatrix d = v.s.matrix();
        d -= outer(v.w, v.w);
        const auto [dmin, dvec] = min_eigpair(HermitianMatrix::unchecked(d));
        if (dmin < -tol_psd) {
            std::vector<double> cut(dim, 0.0);
            const cxd a = vdot(dvec, v.w);
            for (std::size_t i = 0; i < n; ++i) {
                cut[2 * i] = 2.0 * (dvec[i] * a).real();
                cut[2 * i + 1] = 2.0 * (dvec[i] * a).imag();
            }
            write_s_block(cut, n, pack_trace_gradient(HermitianMatrix::from_outer(dvec)), -1.0);
            return cut;
        }
        return std::nullopt;
    };

    FeasibilityResult f =
        ellipsoid_feasibility(std::move(st), oracle, opts.max_iter_per_probe, vol_floor);
    res.feasible = f.feasible;
    res.iterations = f.iterations;
    if (f.feasible)
        res.point = FeasibilityVars::decode(std::span(f.point), n);
    else
        res.low_confidence = f.iterations >= opts.max_iter_per_probe;
    return res;
}

}  // namespace detail

/// Feasibility of the linearized joint design at SINR target t: returns a
/// point satisfying the linearized per-user constraints, the accuracy and
/// power budgets, and S - w w^H >= 0, or an infeasibility verdict.
inline P23Result feasibility_p23(const ChannelSet& ch, const SystemConfig& cfg, double gamma_bar,
                                 double t, const CVector& w_local, const P2Options& opts = {}) {
    cfg.validate();
    ch.validate(cfg.n_tx);
    if (t < 0.0) throw ContractViolation("feasibility_p23: t must be nonnegative");
    const detail::P2Workspace ws = detail::make_p2_workspace(ch, cfg, gamma_bar);
    const HermitianMatrix s_center =
        opts.s_init ? *opts.s_init
                    : HermitianMatrix::scaled_identity(cfg.n_tx, cfg.power / static_cast<double>(cfg.n_tx));
    return detail::p23_probe(ws, ch, t, w_local, s_center, opts);
}

/// Max feasible SINR target of the linearized problem by bisection.
/// seed_t/seed_point, when provided, certify a known-feasible target for
/// this same w_local and skip the zero probe.
inline P22Result solve_p22(const ChannelSet& ch, const SystemConfig& cfg, double gamma_bar,
                           const CVector& w_local, const P2Options& opts = {},
                           double seed_t = -1.0,
                           const std::optional<FeasibilityVars>& seed_point = std::nullopt) {
    cfg.validate();
    ch.validate(cfg.n_tx);
    const detail::P2Workspace ws = detail::make_p2_workspace(ch, cfg, gamma_bar);
    const HermitianMatrix s_center =
        opts.s_init ? *opts.s_init
                    : HermitianMatrix::scaled_identity(cfg.n_tx, cfg.power / static_cast<double>(cfg.n_tx));

    P22Result res;
    const double hi0 = cfg.power * ws.h_scale / cfg.noise_comm;
    double hi = hi0;
    double lo;
    if (seed_t >= 0.0 && seed_point) {
        lo = seed_t;
        res.point = *seed_point;
    } else {
        P23Result base = detail::p23_probe(ws, ch, 0.0, w_local, s_center, opts);
        ++res.probes;
        res.low_confidence |= base.low_confidence;
        if (!base.feasible)
            throw SolverFailure("solve_p22: infeasible at zero SINR (accuracy budget too tight)");
        lo = 0.0;
        res.point = base.point;
    }

    const double width = opts.t_tol * (1.0 + hi0);
    while (hi - lo > width) {
        const double mid = 0.5 * (lo + hi);
        P23Result f = detail::p23_probe(ws, ch, mid, w_local, s_center, opts);
        ++res.probes;
        if (f.feasible) {
            lo = mid;
            res.point = f.point;
        } else {
            hi = mid;
            res.low_confidence |= f.low_confidence;
        }
    }
    res.t_opt = lo;
    return res;
}

/// Outer SCA loop for the single-beam + dedicated-sensing design. Each
/// round linearizes the SINR numerators at the incumbent beam, maximizes
/// the linearized worst SINR, and accepts the candidate only if the true
/// worst SINR improves, so the reported sequence never decreases.
inline BeamformingSolution solve_p2_sca(const ChannelSet& ch, const SystemConfig& cfg,
                                        double gamma_bar, const CVector& w_init = {},
                                        const P2Options& opts = {}) {
    cfg.validate();
    ch.validate(cfg.n_tx);
    const std::size_t n = cfg.n_tx;
    const double p = cfg.power;
    const double crb_min = static_cast<double>(cfg.n_rx) * static_cast<double>(n * n) *
                           cfg.noise_radar / (static_cast<double>(cfg.symbols) * p);
    if (gamma_bar < crb_min * (1.0 - 1e-9))
        throw SolverFailure("solve_p2_sca: accuracy target below the achievable minimum");

    CVector w0 = w_init;
    HermitianMatrix s_seed =
        opts.s_init ? *opts.s_init : HermitianMatrix::scaled_identity(n, p / static_cast<double>(n));
    if (w0.empty()) {
        // warm start: strongest direction of the covariance-optimal design
        P1Solution p1 = solve_p1(ch, cfg, gamma_bar);
        const EvdResult ev = evd(p1.covariance.matrix);
        w0 = ev.vectors.col(0);
        const double scale = std::sqrt(0.9 * p);
        for (cxd& v : w0) v *= scale;
        if (!opts.s_init) s_seed = p1.covariance.matrix;
    }

    P2Options inner = opts;
    inner.s_init = s_seed;

    BeamformingSolution sol;
    sol.w.assign(n, cxd(0.0, 0.0));
    sol.s_x = TransmitCovariance{s_seed};
    sol.t = 0.0;

    auto true_min_sinr = [&](const CVector& w, const HermitianMatrix& s) {
        ComplexMatrix d = s.matrix();
        d -= outer(w, w);
        const HermitianMatrix ss = HermitianMatrix::unchecked(d);
        double worst = std::numeric_limits<double>::infinity();
        for (const CVector& h : ch.channels)
            worst = std::min(worst, sinr_with_sensing(w, ss, h, cfg));
        return worst;
    };

    for (int i = 0; i < opts.max_sca_iter; ++i) {
        const bool at_incumbent = i > 0;
        const CVector& w_loc = at_incumbent ? sol.w : w0;
        std::optional<FeasibilityVars> seed;
        double seed_t = -1.0;
        if (at_incumbent) {
            seed = FeasibilityVars{sol.w, sol.s_x.matrix};
            seed_t = sol.t;  // tangency makes the incumbent feasible for its own cut
        }
        P22Result step = solve_p22(ch, cfg, gamma_bar, w_loc, inner, seed_t, seed);
        sol.low_confidence |= step.low_confidence;

        const double t_new = true_min_sinr(step.point.w, step.point.s);
        double improvement = 0.0;
        if (t_new > sol.t) {
            improvement = t_new - sol.t;
            sol.w = step.point.w;
            sol.s_x = TransmitCovariance{step.point.s};
            sol.t = t_new;
        }
        sol.t_history.push_back(sol.t);
        ++sol.iterations;
        if (opts.trace) {
            char row[128];
            std::snprintf(row, sizeof row, "sca,%d,%.12g,%.3g\n", sol.iterations, sol.t,
                          improvement);
            *opts.trace << row;
        }
        if (improvement < opts.sca_tol) break;
    }

    ComplexMatrix d = sol.s_x.matrix.matrix();
    d -= outer(sol.w, sol.w);
    sol.s_s = HermitianMatrix::unchecked(d);
    sol.rate = std::log2(1.0 + sol.t);
    sol.crb_residual = std::max(0.0, crb_trace(sol.s_x, cfg) - gamma_bar) / gamma_bar;
    sol.power_residual = std::max(0.0, sol.s_x.trace() - p) / p;
    sol.psd_residual = std::max(0.0, -evd(sol.s_s).eigenvalues.back()) / p;
    return sol;
}

}  // namespace mcisac
