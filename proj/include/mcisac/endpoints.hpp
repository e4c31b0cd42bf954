#pragma once

#include "ellipsoid.hpp"
#include "model.hpp"

namespace mcisac {

/// Most accurate estimation point: isotropic transmission S = (P/N_t) I.
/// Returns the bound value, the worst-user rate it still delivers, and the
/// covariance itself.
inline std::pair<CrPoint, TransmitCovariance> crb_min_point(const ChannelSet& ch,
                                                            const SystemConfig& cfg) {
    cfg.validate();
    ch.validate(cfg.n_tx);
    const double nt = static_cast<double>(cfg.n_tx);
    TransmitCovariance s{HermitianMatrix::scaled_identity(cfg.n_tx, cfg.power / nt)};
    CrPoint p;
    p.crb = static_cast<double>(cfg.n_rx) * nt * nt * cfg.noise_radar /
            (static_cast<double>(cfg.symbols) * cfg.power);
    p.rate = multicast_rate(s, ch, cfg);
    return {p, s};
}

struct RateMaxOptions {
    double tol = 1e-5;               // bisection width target, times (1 + bracket top)
    long max_iter_per_probe = 60000;
    double vol_decades_per_dim = 3.0;  // feasibility gives up after this much shrink
    bool rank_polish = true;           // strip spectrum noise before reporting the bound
};

struct RateMaxResult {
    CrPoint point;                  // rate = best certified min-SNR rate, crb of covariance
    TransmitCovariance covariance;  // the certified max-rate covariance
    std::vector<double> mu_weights;     // simplex weights from dual tracking
    double rate_upper_bound = 0.0;      // minimax bound log2(1 + P lmax(sum mu H)/noise)
    long probes = 0;
    bool polish_applied = false;
};

namespace detail {

/// Feasibility of { S PSD, tr S <= P, h_k^H S h_k >= snr * noise } via the
/// central-cut engine over the packed Hermitian coordinates.
/// mu_counts, when given, accumulates which user constraint fired.
inline FeasibilityResult snr_cover_feasible(const ChannelSet& ch, const SystemConfig& cfg,
                                            double snr, const RateMaxOptions& opts,
                                            std::vector<long>* mu_counts) {
    const std::size_t n = cfg.n_tx;
    const std::size_t dim = hermitian_pack_dim(n);
    const double p = cfg.power;

    std::vector<double> center(dim, 0.0);
    pack_hermitian(HermitianMatrix::scaled_identity(n, p / static_cast<double>(n)), center);
    std::vector<double> radii(dim);
    for (std::size_t i = 0; i < dim; ++i) radii[i] = (i < n) ? p : 0.5 * p;
    EllipsoidState st = make_box_ellipsoid(std::move(center), radii);
    const double vol_floor =
        st.log_volume - static_cast<double>(dim) * opts.vol_decades_per_dim * std::log(10.0);

    std::vector<HermitianMatrix> hh;
    hh.reserve(ch.users());
    for (const CVector& h : ch.channels) hh.push_back(HermitianMatrix::from_outer(h));
    double h_scale = 0.0;
    for (const CVector& h : ch.channels) h_scale = std::max(h_scale, norm2sq(h));

    const double target = snr * cfg.noise_comm;
    const double tol_user = 1e-9 * (target + p * h_scale);
    const double tol_pow = 1e-9 * p;
    const double tol_psd = 1e-11 * p;
    const std::vector<double> power_cut =
        pack_trace_gradient(HermitianMatrix::scaled_identity(n, 1.0));

    auto oracle = [&](const std::vector<double>& x) -> std::optional<std::vector<double>> {
        const HermitianMatrix s = unpack_hermitian(std::span(x), n);
        if (s.trace() > p + tol_pow) return power_cut;
        for (std::size_t k = 0; k < hh.size(); ++k) {
            if (s.quad_form(ch.channels[k]) < target - tol_user) {
                if (mu_counts) ++(*mu_counts)[k];
                std::vector<double> g = pack_trace_gradient(hh[k]);
                for (double& v : g) v = -v;
                return g;
            }
        }
        const auto [wmin, vmin] = min_eigpair(s);
        if (wmin < -tol_psd) {
            std::vector<double> g = pack_trace_gradient(HermitianMatrix::from_outer(vmin));
            for (double& v : g) v = -v;
            return g;
        }
        return std::nullopt;
    };
    return ellipsoid_feasibility(std::move(st), oracle, opts.max_iter_per_probe, vol_floor);
}

}  // namespace detail

/// Max worst-user rate with the power budget as the only constraint, by
/// bisection on the SNR target with an ellipsoid feasibility inner stage.
/// Also evaluates the CRB the winning covariance delivers; a rank-deficient
/// winner reports +infinity there.
inline RateMaxResult rate_max_point_full(const ChannelSet& ch, const SystemConfig& cfg,
                                         const RateMaxOptions& opts = {}) {
    cfg.validate();
    ch.validate(cfg.n_tx);
    const std::size_t n = cfg.n_tx;
    const double p = cfg.power;

    double min_h2 = std::numeric_limits<double>::infinity(), max_h2 = 0.0;
    for (const CVector& h : ch.channels) {
        const double v = norm2sq(h);
        min_h2 = std::min(min_h2, v);
        max_h2 = std::max(max_h2, v);
    }

    RateMaxResult res;
    const double hi0 = p * max_h2 / cfg.noise_comm;
    double hi = hi0;
    double lo = p / static_cast<double>(n) * min_h2 / cfg.noise_comm;  // isotropic is feasible
    HermitianMatrix best = HermitianMatrix::scaled_identity(n, p / static_cast<double>(n));

    std::vector<long> counts(ch.users(), 0), last_infeasible_counts;
    const double width_tol = opts.tol * (1.0 + hi0);
    while (hi - lo > width_tol) {
        const double mid = 0.5 * (lo + hi);
        std::fill(counts.begin(), counts.end(), 0L);
        const FeasibilityResult f = detail::snr_cover_feasible(ch, cfg, mid, opts, &counts);
        ++res.probes;
        if (f.feasible) {
            lo = mid;
            best = unpack_hermitian(std::span(f.point), n);
        } else {
            hi = mid;
            last_infeasible_counts = counts;
        }
    }

    best = clip_psd(best, 0.0);

    // Strip eigenvalues that are pure feasibility slack so the rank (and the
    // finiteness of the estimation bound) reflects the solution, not solver
    // fuzz. The truncation budget keeps the certified rate within a few
    // bisection widths.
    res.polish_applied = false;
    if (opts.rank_polish) {
        const double budget = 4.0 * width_tol * cfg.noise_comm / std::max(max_h2, 1e-300);
        EvdResult ev = evd(best);
        double spent = 0.0;
        bool touched = false;
        for (std::size_t i = ev.eigenvalues.size(); i-- > 0;) {
            if (ev.eigenvalues[i] <= 0.0) continue;
            if (spent + ev.eigenvalues[i] > budget) break;
            spent += ev.eigenvalues[i];
            ev.eigenvalues[i] = 0.0;
            touched = true;
        }
        if (touched) {
            const HermitianMatrix polished = HermitianMatrix::unchecked(ev.reconstruct());
            double t_old = std::numeric_limits<double>::infinity();
            double t_new = std::numeric_limits<double>::infinity();
            for (const CVector& h : ch.channels) {
                t_old = std::min(t_old, best.quad_form(h));
                t_new = std::min(t_new, polished.quad_form(h));
            }
            if (t_new >= t_old - 5.0 * width_tol * cfg.noise_comm) {
                best = polished;
                res.polish_applied = true;
            }
        }
    }

    res.covariance = TransmitCovariance{best};
    double t_final = std::numeric_limits<double>::infinity();
    for (const CVector& h : ch.channels)
        t_final = std::min(t_final, best.quad_form(h) / cfg.noise_comm);
    res.point.rate = std::log2(1.0 + std::max(t_final, 0.0));
    res.point.crb = crb_trace(res.covariance, cfg);

    // Simplex weights from the binding users of the last infeasible probe;
    // any simplex choice yields a valid minimax upper bound.
    res.mu_weights.assign(ch.users(), 1.0 / static_cast<double>(ch.users()));
    if (!last_infeasible_counts.empty()) {
        const long total =
            std::accumulate(last_infeasible_counts.begin(), last_infeasible_counts.end(), 0L);
        if (total > 0)
            for (std::size_t k = 0; k < ch.users(); ++k)
                res.mu_weights[k] =
                    static_cast<double>(last_infeasible_counts[k]) / static_cast<double>(total);
    }
    HermitianMatrix mix = HermitianMatrix::zero(n);
    for (std::size_t k = 0; k < ch.users(); ++k)
        mix.add_scaled(HermitianMatrix::from_outer(ch.channels[k]), res.mu_weights[k]);
    const double lmax = evd(mix).eigenvalues.front();
    res.rate_upper_bound = std::log2(1.0 + p * std::max(lmax, 0.0) / cfg.noise_comm);
    return res;
}

inline std::pair<CrPoint, TransmitCovariance> rate_max_point(const ChannelSet& ch,
                                                             const SystemConfig& cfg,
                                                             double tol = 1e-5) {
    RateMaxOptions opts;
    opts.tol = tol;
    RateMaxResult r = rate_max_point_full(ch, cfg, opts);
    return {r.point, r.covariance};
}

}  // namespace mcisac
