#pragma once

#include <ostream>

#include "endpoints.hpp"

namespace mcisac {

/// Multipliers of the rate-epigraph dual: per-user simplex weights (the last
/// one implied), the accuracy-constraint multiplier lambda1 and the power
/// multiplier lambda2.
struct DualPoint {
    std::vector<double> mu;  // first K-1 weights; the K-th is 1 - sum
    double lambda1 = 0.0;
    double lambda2 = 0.0;

    std::size_t users() const { return mu.size() + 1; }

    double mu_tail() const {
        double s = 0.0;
        for (double v : mu) s += v;
        return 1.0 - s;
    }

    std::vector<double> full_mu() const {
        std::vector<double> f(mu);
        f.push_back(mu_tail());
        return f;
    }
};

/// lambda2 I - sum_k mu_k h_k h_k^H; PSD of this matrix is the hidden dual
/// constraint that keeps the inner covariance minimization bounded.
inline HermitianMatrix build_a_matrix(const DualPoint& d, const ChannelSet& ch) {
    if (d.users() != ch.users()) throw ContractViolation("build_a_matrix: user count mismatch");
    HermitianMatrix a = HermitianMatrix::scaled_identity(ch.n_tx(), d.lambda2);
    const std::vector<double> mu = d.full_mu();
    for (std::size_t k = 0; k < mu.size(); ++k)
        a.add_scaled(HermitianMatrix::from_outer(ch.channels[k]), -mu[k]);
    return a;
}

struct DualEval {
    bool dual_feasible = false;  // A not indefinite beyond tolerance
    bool has_minimizer = false;  // lambda1 and A healthy enough for a finite S*
    double value = -std::numeric_limits<double>::infinity();
    double lifted_lambda2 = 0.0;  // lambda2 after the PSD lift actually evaluated
    double s_trace = 0.0;
    double s_trace_inverse = 0.0;
    TransmitCovariance s_star;  // populated iff has_minimizer
    EvdResult a_evd;
    double a_min_eig = 0.0;
};

namespace detail {

/// Closed-form inner minimization of tr(A S) + lambda1 tr(S^{-1}) over PD S:
/// minimum 2 sqrt(lambda1) sum_i sqrt(alpha_i), attained at
/// S* = sqrt(lambda1) U diag(alpha_i^{-1/2}) U^H. Zero eigenvalues of A
/// contribute zero in the limit. force_lift additionally raises lambda2
/// until A is PSD, which keeps the evaluation a valid dual point even when
/// the input center is slightly indefinite.
inline DualEval eval_dual_core(const HermitianMatrix& a, double lambda1, double lambda2,
                               double gamma, double power, double h_scale, bool force_lift) {
    DualEval e;
    e.a_evd = evd(a);
    e.a_min_eig = e.a_evd.eigenvalues.back();
    const double a_scale = std::max(std::abs(lambda2) + h_scale, 1e-300);
    const double tol_a = 1e-11 * a_scale;
    if (!force_lift && e.a_min_eig < -tol_a) return e;

    e.dual_feasible = true;
    const double lift = std::max(0.0, -e.a_min_eig);
    e.lifted_lambda2 = lambda2 + lift;
    std::vector<double> alpha = e.a_evd.eigenvalues;  // descending
    for (double& v : alpha) v = std::max(v + lift, 0.0);

    const double l1 = std::max(lambda1, 0.0);
    double sum_sqrt = 0.0;
    for (double v : alpha) sum_sqrt += std::sqrt(v);
    e.value = 2.0 * std::sqrt(l1) * sum_sqrt - l1 * gamma - e.lifted_lambda2 * power;

    const double eps_sing = 1e-11 * a_scale;
    if (l1 > 1e-30 && alpha.back() > eps_sing) {
        e.has_minimizer = true;
        const double rl1 = std::sqrt(l1);
        EvdResult sev;
        sev.vectors = e.a_evd.vectors;
        sev.eigenvalues.resize(alpha.size());
        for (std::size_t i = 0; i < alpha.size(); ++i) {
            const double beta = rl1 / std::sqrt(alpha[i]);
            sev.eigenvalues[i] = beta;
            e.s_trace += beta;
            e.s_trace_inverse += std::sqrt(alpha[i]) / rl1;
        }
        e.s_star = TransmitCovariance{HermitianMatrix::unchecked(sev.reconstruct())};
    }
    return e;
}

inline double channel_scale(const ChannelSet& ch) {
    double s = 0.0;
    for (const CVector& h : ch.channels) s = std::max(s, norm2sq(h));
    return s;
}

}  // namespace detail

/// Dual function value g at the given multipliers; gamma is the rescaled
/// accuracy budget gamma_bar * symbols / (n_rx * noise_radar). Returns the
/// inner minimizer S* alongside when it exists (lambda1 > 0, A PD).
inline DualEval eval_dual(const DualPoint& d, const ChannelSet& ch, const SystemConfig& cfg,
                          double gamma) {
    return detail::eval_dual_core(build_a_matrix(d, ch), d.lambda1, d.lambda2, gamma, cfg.power,
                                  detail::channel_scale(ch), false);
}

enum class DualCutKind { mu_box, mu_sum, lambda1_box, lambda2_box, psd, objective };

struct DualCut {
    std::vector<double> g;  // length K+1: [mu_1..mu_{K-1}, lambda1, lambda2]
    DualCutKind kind = DualCutKind::objective;
    std::size_t index = 0;  // which mu for mu_box

    const char* tag() const {
        switch (kind) {
            case DualCutKind::mu_box: return "mu_box";
            case DualCutKind::mu_sum: return "mu_sum";
            case DualCutKind::lambda1_box: return "lambda1_box";
            case DualCutKind::lambda2_box: return "lambda2_box";
            case DualCutKind::psd: return "psd";
            default: return "objective";
        }
    }
};

/// Exactly one cut per call, in a fixed priority: multiplier box violations,
/// then the PSD constraint on A (smallest-eigenvector cut), then the
/// objective supergradient at the inner minimizer. `ev` may be null only
/// when a box violation is present.
inline DualCut dual_subgradients(const DualPoint& d, const DualEval* ev, const ChannelSet& ch,
                                 const SystemConfig& cfg, double gamma) {
    const std::size_t k_users = d.users();
    const std::size_t n = k_users + 1;
    DualCut cut;
    cut.g.assign(n, 0.0);

    for (std::size_t k = 0; k + 1 < k_users; ++k)
        if (d.mu[k] < 0.0) {
            cut.kind = DualCutKind::mu_box;
            cut.index = k;
            cut.g[k] = -1.0;
            return cut;
        }
    if (d.mu_tail() < 0.0) {
        cut.kind = DualCutKind::mu_sum;
        for (std::size_t k = 0; k + 1 < k_users; ++k) cut.g[k] = 1.0;
        return cut;
    }
    if (d.lambda1 < 1e-30) {
        cut.kind = DualCutKind::lambda1_box;
        cut.g[n - 2] = -1.0;
        return cut;
    }
    if (d.lambda2 < 0.0) {
        cut.kind = DualCutKind::lambda2_box;
        cut.g[n - 1] = -1.0;
        return cut;
    }

    if (ev == nullptr)
        throw ContractViolation("dual_subgradients: evaluation required inside the box");

    const CVector& h_last = ch.channels[k_users - 1];
    if (!ev->has_minimizer) {
        // smallest-eigenvector cut restoring A >= 0
        cut.kind = DualCutKind::psd;
        const CVector v = ev->a_evd.vectors.col(ch.n_tx() - 1);
        const double q_last = std::norm(vdot(h_last, v));
        for (std::size_t k = 0; k + 1 < k_users; ++k)
            cut.g[k] = std::norm(vdot(ch.channels[k], v)) - q_last;
        cut.g[n - 2] = 0.0;
        cut.g[n - 1] = -1.0;
        return cut;
    }

    cut.kind = DualCutKind::objective;
    const HermitianMatrix& s = ev->s_star.matrix;
    const double q_last = s.quad_form(h_last);
    for (std::size_t k = 0; k + 1 < k_users; ++k)
        cut.g[k] = s.quad_form(ch.channels[k]) - q_last;
    cut.g[n - 2] = gamma - ev->s_trace_inverse;
    cut.g[n - 1] = cfg.power - ev->s_trace;
    return cut;
}

enum class P1Status { converged, endpoint_min_crb, endpoint_rate_max };

struct P1Options {
    double gap_tol = 1e-4;  // relative primal-dual gap target
    long max_iter = 0;      // per attempt; 0 picks max(5000, 40 (K+1)^2)
    double vol_decades_per_dim = 80.0;  // give-up budget, not a convergence test
    int max_restarts = 3;
    std::ostream* trace = nullptr;
};

struct P1Solution {
    TransmitCovariance covariance;
    double t_star = 0.0;  // min_k h_k^H S h_k (numerator units)
    double rate = 0.0;    // log2(1 + t_star / noise)
    double gamma_bar = 0.0;
    DualPoint dual;  // multipliers reproducing the covariance via the closed form
    double upper_bound_t = 0.0;
    double gap = 0.0;  // (upper_bound_t - t_star) / (1 + |upper_bound_t|)
    P1Status status = P1Status::converged;
    long iterations = 0;
    int restarts = 0;
    double crb_residual = 0.0;    // max(0, crb - gamma_bar) / gamma_bar
    double power_residual = 0.0;  // max(0, trace - P) / P
    std::vector<std::size_t> argmin_users;
    double min_eig_cov = 0.0;
    double min_eig_a = 0.0;
};

namespace detail {

struct P1Incumbent {
    double t = -std::numeric_limits<double>::infinity();
    HermitianMatrix s;
    DualPoint dual;
    double trace_inv = 0.0;
    double trace = 0.0;
};

inline DualPoint project_to_box(const DualPoint& d) {
    DualPoint p;
    p.mu.resize(d.mu.size());
    std::vector<double> full = d.full_mu();
    double sum = 0.0;
    for (double& v : full) {
        v = std::max(v, 0.0);
        sum += v;
    }
    if (sum <= 1e-300) {
        std::fill(full.begin(), full.end(), 1.0 / static_cast<double>(full.size()));
    } else {
        for (double& v : full) v /= sum;
    }
    std::copy(full.begin(), full.end() - 1, p.mu.begin());
    p.lambda1 = std::max(d.lambda1, 0.0);
    p.lambda2 = std::max(d.lambda2, 0.0);
    return p;
}

}  // namespace detail

/// Accuracy-constrained worst-user rate maximization. Runs the cutting loop
/// on the dual, recovers the primal through the closed form at the projected
/// center, and certifies a relative duality gap. The returned multipliers
/// regenerate the covariance exactly (they absorb the feasibility rescale).
inline P1Solution solve_p1(const ChannelSet& ch, const SystemConfig& cfg, double gamma_bar,
                           const P1Options& opts = {}) {
    cfg.validate();
    ch.validate(cfg.n_tx);
    const std::size_t k_users = ch.users();
    const std::size_t nt = cfg.n_tx;
    const std::size_t n = k_users + 1;
    const double p = cfg.power;
    const double noise = cfg.noise_comm;

    const double crb_min = static_cast<double>(cfg.n_rx) * static_cast<double>(nt * nt) *
                           cfg.noise_radar / (static_cast<double>(cfg.symbols) * p);
    if (gamma_bar < crb_min * (1.0 - 1e-9))
        throw SolverFailure("solve_p1: accuracy target below the achievable minimum");
    const double gamma =
        gamma_bar * static_cast<double>(cfg.symbols) / (static_cast<double>(cfg.n_rx) * cfg.noise_radar);

    const HermitianMatrix iso = HermitianMatrix::scaled_identity(nt, p / static_cast<double>(nt));
    double t_iso = std::numeric_limits<double>::infinity();
    for (const CVector& h : ch.channels) t_iso = std::min(t_iso, iso.quad_form(h));

    auto finalize = [&](detail::P1Incumbent& best, double ub, P1Status status, long iters,
                        int restarts) {
        P1Solution sol;
        sol.covariance = TransmitCovariance{best.s};
        sol.gamma_bar = gamma_bar;
        sol.dual = best.dual;
        sol.status = status;
        sol.iterations = iters;
        sol.restarts = restarts;
        RateDetail rd = multicast_rate_detail(sol.covariance, ch, cfg);
        double worst = std::numeric_limits<double>::infinity();
        for (double v : rd.snr) worst = std::min(worst, v);
        sol.t_star = worst * noise;
        sol.rate = rd.rate;
        sol.argmin_users = rd.argmin;
        sol.upper_bound_t = ub;
        sol.gap = std::isfinite(ub) ? std::max(0.0, ub - sol.t_star) / (1.0 + std::abs(ub)) : 0.0;
        const double crb = crb_trace(sol.covariance, cfg);
        sol.crb_residual = std::max(0.0, crb - gamma_bar) / gamma_bar;
        sol.power_residual = std::max(0.0, best.s.trace() - p) / p;
        sol.min_eig_cov = evd(best.s).eigenvalues.back();
        sol.min_eig_a = evd(build_a_matrix(best.dual, ch)).eigenvalues.back();
        return sol;
    };

    detail::P1Incumbent best;
    best.t = t_iso;
    best.s = iso;
    best.dual.mu.assign(k_users - 1, 1.0 / static_cast<double>(k_users));
    best.dual.lambda1 = 0.0;
    best.dual.lambda2 = 0.0;
    best.trace_inv = static_cast<double>(nt * nt) / p;
    best.trace = p;

    // At the left endpoint the scaled identity is the only feasible point
    // (equality in the AM-HM bound), so return it directly.
    if (gamma_bar <= crb_min * (1.0 + 1e-9))
        return finalize(best, t_iso, P1Status::endpoint_min_crb, 0, 0);

    const double h_scale = detail::channel_scale(ch);
    std::vector<HermitianMatrix> hh;
    hh.reserve(k_users);
    for (const CVector& h : ch.channels) hh.push_back(HermitianMatrix::from_outer(h));
    auto build_a_fast = [&](const std::vector<double>& full_mu, double l2) {
        HermitianMatrix a = HermitianMatrix::scaled_identity(nt, l2);
        for (std::size_t k = 0; k < k_users; ++k) a.add_scaled(hh[k], -full_mu[k]);
        return a;
    };

    double l1_hi = p / static_cast<double>(nt * nt) * h_scale * h_scale * static_cast<double>(nt);
    double l2_hi = 2.0 * h_scale;
    const long iter_budget =
        opts.max_iter > 0 ? opts.max_iter
                          : std::max<long>(5000, 40L * static_cast<long>(n) * static_cast<long>(n));

    double best_dual_g = -std::numeric_limits<double>::infinity();
    double best_g_l1 = 0.0, best_g_l2 = 0.0;  // multipliers at the best dual value
    std::vector<double> best_g_mu(k_users - 1, 1.0 / static_cast<double>(k_users));
    bool converged = false;
    long total_iters = 0;
    int attempt = 0;

    // Both budgets bind at the optimum whenever the accuracy constraint is
    // active, so near-optimal candidates sit on kappa*tau = gamma*P and a
    // hairline acceptance would reject half of them. The slack keeps the
    // reconstruction exact and stays well inside the reported residual bar.
    const double recovery_slack = 5e-5;

    auto run_attempt = [&](std::vector<double> center, const std::vector<double>& radii) {
        EllipsoidState st = make_box_ellipsoid(std::move(center), radii);
        const double vol_floor =
            st.log_volume - static_cast<double>(n) * opts.vol_decades_per_dim * std::log(10.0);

        for (long it = 0; it < iter_budget; ++it) {
            DualPoint cen;
            cen.mu.assign(st.center.begin(), st.center.begin() + (k_users - 1));
            cen.lambda1 = st.center[n - 2];
            cen.lambda2 = st.center[n - 1];

            bool box_ok = cen.lambda1 >= 1e-30 && cen.lambda2 >= 0.0 && cen.mu_tail() >= 0.0;
            if (box_ok)
                for (double v : cen.mu)
                    if (v < 0.0) {
                        box_ok = false;
                        break;
                    }

            std::optional<DualEval> ev;
            DualCut cut;
            if (!box_ok) {
                cut = dual_subgradients(cen, nullptr, ch, cfg, gamma);
            } else {
                ev = detail::eval_dual_core(build_a_fast(cen.full_mu(), cen.lambda2), cen.lambda1,
                                            cen.lambda2, gamma, p, h_scale, false);
                cut = dual_subgradients(cen, &*ev, ch, cfg, gamma);
            }

            // bound + primal candidate from the projected center
            DualPoint proj = box_ok ? cen : detail::project_to_box(cen);
            DualEval pe =
                box_ok ? *ev
                       : detail::eval_dual_core(build_a_fast(proj.full_mu(), proj.lambda2),
                                                proj.lambda1, proj.lambda2, gamma, p, h_scale, true);
            if (box_ok && !pe.dual_feasible)
                pe = detail::eval_dual_core(build_a_fast(proj.full_mu(), proj.lambda2), proj.lambda1,
                                            proj.lambda2, gamma, p, h_scale, true);
            if (pe.dual_feasible && pe.value > best_dual_g) {
                best_dual_g = pe.value;
                best_g_l1 = std::max(proj.lambda1, 0.0);
                best_g_l2 = pe.lifted_lambda2;
                best_g_mu = proj.mu;
            }
            if (pe.has_minimizer) {
                const double tau = pe.s_trace, kappa = pe.s_trace_inverse;
                if (tau > 0.0 && kappa * tau <= gamma * p * (1.0 + recovery_slack)) {
                    const double c = p / tau;
                    double t_raw = std::numeric_limits<double>::infinity();
                    for (const CVector& h : ch.channels)
                        t_raw = std::min(t_raw, pe.s_star.matrix.quad_form(h));
                    const double t_cand = c * t_raw;
                    if (t_cand > best.t) {
                        EvdResult sev;
                        sev.vectors = pe.a_evd.vectors;
                        sev.eigenvalues.resize(nt);
                        // same eigenbasis, rescaled spectrum: the stored duals
                        // reproduce this matrix through the closed form
                        const double l1_scaled = c * c * std::max(proj.lambda1, 0.0);
                        const double lift = pe.lifted_lambda2 - proj.lambda2;
                        for (std::size_t i = 0; i < nt; ++i) {
                            const double alpha =
                                std::max(pe.a_evd.eigenvalues[i] + lift, 0.0);
                            sev.eigenvalues[i] = std::sqrt(l1_scaled) / std::sqrt(alpha);
                        }
                        best.t = t_cand;
                        best.s = HermitianMatrix::unchecked(sev.reconstruct());
                        best.dual = proj;
                        best.dual.lambda1 = l1_scaled;
                        best.dual.lambda2 = pe.lifted_lambda2;
                        best.trace_inv = kappa / c;
                        best.trace = c * tau;
                    }
                }
            }

            ++total_iters;
            if (opts.trace) {
                char row[160];
                if (ev && std::isfinite(ev->value))
                    std::snprintf(row, sizeof row, "p1,%ld,%.12g,%s,%.6f\n", total_iters, ev->value,
                                  cut.tag(), st.log_volume);
                else
                    std::snprintf(row, sizeof row, "p1,%ld,nan,%s,%.6f\n", total_iters, cut.tag(),
                                  st.log_volume);
                *opts.trace << row;
            }

            const double ub = -best_dual_g;
            const double gap = (ub - best.t) / (1.0 + std::abs(ub));
            if (gap <= opts.gap_tol) {
                converged = true;
                return;
            }
            if (st.log_volume <= vol_floor) return;
            try {
                central_cut(st, cut.g);
            } catch (const SolverFailure&) {
                return;  // shape matrix ground down to noise; attempt is spent
            }
        }
    };

    std::vector<double> last_radii(n, 1.0);
    for (; attempt <= opts.max_restarts && !converged; ++attempt) {
        std::vector<double> center(n), radii(n);
        for (std::size_t k = 0; k + 1 < k_users; ++k) {
            center[k] = 1.0 / static_cast<double>(k_users);
            radii[k] = 1.0;
        }
        const double l1_c = attempt == 0 ? 1.0 : 0.5 * l1_hi;
        const double l2_c = attempt == 0 ? h_scale : 0.5 * l2_hi;
        center[n - 2] = l1_c;
        radii[n - 2] = std::max(l1_c, l1_hi - l1_c);
        center[n - 1] = l2_c;
        radii[n - 1] = std::max(l2_c, l2_hi - l2_c);
        last_radii = radii;
        run_attempt(std::move(center), radii);

        if (converged) break;
        const bool hugging = best_g_l2 > 0.7 * l2_hi || best_g_l1 > 0.7 * l1_hi ||
                             best.dual.lambda2 > 0.7 * l2_hi || best.dual.lambda1 > 0.7 * l1_hi;
        if (!hugging) break;
        l1_hi *= 8.0;
        l2_hi *= 8.0;
    }

    // Zoom passes: a fresh, much smaller box around the best multipliers
    // restores ellipsoid conditioning, which is what limits how far the
    // recovered primal can track the dual bound in one pass.
    for (int zoom = 0; zoom < 4 && !converged && std::isfinite(best_dual_g); ++zoom) {
        std::vector<double> center(n), radii(n);
        for (std::size_t k = 0; k + 1 < k_users; ++k) {
            center[k] = best_g_mu[k];
            radii[k] = 0.05 * last_radii[k];
        }
        center[n - 2] = best_g_l1;
        radii[n - 2] = 0.05 * last_radii[n - 2];
        center[n - 1] = best_g_l2;
        radii[n - 1] = 0.05 * last_radii[n - 1];
        last_radii = radii;
        run_attempt(std::move(center), radii);
    }

    double ub = -best_dual_g;
    if (converged) return finalize(best, ub, P1Status::converged, total_iters, attempt);

    // Exhausted: when the accuracy budget is slack the unconstrained rate
    // optimum may simply be feasible; adopt it if it beats the incumbent.
    bool adopted_endpoint = false;
    RateMaxResult rm = rate_max_point_full(ch, cfg);
    if (crb_trace(rm.covariance, cfg) <= gamma_bar * (1.0 + 1e-4)) {
        double t_rm = std::numeric_limits<double>::infinity();
        for (const CVector& h : ch.channels)
            t_rm = std::min(t_rm, rm.covariance.matrix.quad_form(h));
        if (t_rm > best.t) {
            best.t = t_rm;
            best.s = rm.covariance.matrix;
            best.dual.mu.assign(rm.mu_weights.begin(), rm.mu_weights.end() - 1);
            best.dual.lambda1 = 0.0;
            best.dual.lambda2 = 0.0;
            best.trace_inv = trace_inverse(rm.covariance.matrix);
            best.trace = rm.covariance.trace();
            adopted_endpoint = true;
        }
    }
    const double gap = (ub - best.t) / (1.0 + std::abs(ub));
    if (gap <= opts.gap_tol)
        return finalize(best, ub,
                        adopted_endpoint ? P1Status::endpoint_rate_max : P1Status::converged,
                        total_iters, attempt);

    char msg[256];
    std::snprintf(msg, sizeof msg,
                  "solve_p1: iteration budget exhausted (best rate %.6g, dual bound %.6g, "
                  "relative gap %.3g > %.3g)",
                  std::log2(1.0 + std::max(best.t, 0.0) / noise), std::log2(1.0 + ub / noise), gap,
                  opts.gap_tol);
    throw SolverFailure(msg);
}

/// Split of the optimal covariance into the communication-subspace part and
/// the equal-power dedicated-sensing part, driven by the eigenvalues of
/// B = -sum_k mu_k H_k (delta_i < 0 spans the communication subspace).
struct Remark1Decomposition {
    HermitianMatrix isac_part;
    HermitianMatrix sensing_part;
    std::size_t n_com = 0;
    std::vector<double> combined_gains;  // delta_i on the communication subspace, ascending
    std::vector<double> isac_powers;     // per-direction powers sqrt(l1)/sqrt(l2+delta_i)
    std::vector<double> sensing_powers;  // per-direction powers on the complement
    double reconstruction_error = 0.0;   // relative Frobenius deviation from the solution
};

inline Remark1Decomposition decompose_remark1(const P1Solution& sol, const ChannelSet& ch) {
    if (!(sol.dual.lambda1 > 0.0))
        throw ContractViolation(
            "decompose_remark1: not applicable, the accuracy constraint is inactive (lambda1 = 0)");
    const std::size_t nt = ch.n_tx();
    const double l1 = sol.dual.lambda1;
    const double l2 = sol.dual.lambda2;

    HermitianMatrix b = HermitianMatrix::zero(nt);
    const std::vector<double> mu = sol.dual.full_mu();
    for (std::size_t k = 0; k < mu.size(); ++k)
        b.add_scaled(HermitianMatrix::from_outer(ch.channels[k]), -mu[k]);
    const EvdResult ev = evd(b);  // descending: near-zero first, most negative last

    const double delta_tol = 1e-9 * std::max(detail::channel_scale(ch) + l2, 1e-300);
    Remark1Decomposition r;
    ComplexMatrix isac(nt, nt), sens(nt, nt);
    for (std::size_t i = 0; i < nt; ++i) {
        const double delta = ev.eigenvalues[i];
        const double alpha = l2 + delta;
        if (!(alpha > 0.0))
            throw SolverFailure("decompose_remark1: inconsistent multipliers (l2 + delta <= 0)");
        const double power = std::sqrt(l1) / std::sqrt(alpha);
        const CVector u = ev.vectors.col(i);
        ComplexMatrix proj = outer(u, u);
        proj *= cxd(power, 0.0);
        if (delta < -delta_tol) {
            ++r.n_com;
            r.combined_gains.push_back(delta);
            r.isac_powers.push_back(power);
            isac += proj;
        } else {
            r.sensing_powers.push_back(power);
            sens += proj;
        }
    }
    std::reverse(r.combined_gains.begin(), r.combined_gains.end());  // ascending
    std::reverse(r.isac_powers.begin(), r.isac_powers.end());
    r.isac_part = HermitianMatrix::unchecked(isac);
    r.sensing_part = HermitianMatrix::unchecked(sens);

    const ComplexMatrix sum = isac + sens;
    const ComplexMatrix diff = sum - sol.covariance.matrix.matrix();
    r.reconstruction_error =
        diff.frobenius_norm() / std::max(sol.covariance.matrix.matrix().frobenius_norm(), 1e-300);
    return r;
}

}  // namespace mcisac
