#pragma once

#include <functional>
#include <optional>
#include <span>

#include "hermitian.hpp"

namespace mcisac {

/// Ellipsoid { x : (x-c)^T B^{-1} (x-c) <= 1 } tracked by center c and shape
/// matrix B (row-major, symmetric positive definite). log_volume carries
/// 0.5*logdet(B); the unit-ball constant is irrelevant for stopping rules.
struct EllipsoidState {
    std::size_t dim = 0;
    std::vector<double> center;
    std::vector<double> shape;
    double log_volume = 0.0;
    long iterations = 0;

    double& b(std::size_t i, std::size_t j) { return shape[i * dim + j]; }
    double b(std::size_t i, std::size_t j) const { return shape[i * dim + j]; }
};

/// Axis-aligned initial ellipsoid covering the box center +- radii.
inline EllipsoidState make_box_ellipsoid(std::vector<double> center,
                                         const std::vector<double>& radii) {
    const std::size_t n = center.size();
    if (n < 2) throw ContractViolation("make_box_ellipsoid: dimension must be >= 2");
    if (radii.size() != n) throw ContractViolation("make_box_ellipsoid: radii length mismatch");
    EllipsoidState st;
    st.dim = n;
    st.center = std::move(center);
    st.shape.assign(n * n, 0.0);
    st.log_volume = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(radii[i] > 0.0)) throw ContractViolation("make_box_ellipsoid: radii must be positive");
        st.b(i, i) = static_cast<double>(n) * radii[i] * radii[i];
        st.log_volume += 0.5 * std::log(st.b(i, i));
    }
    return st;
}

/// Central cut keeping the halfspace { x : g^T (x - center) <= 0 }.
inline void central_cut(EllipsoidState& st, std::span<const double> g) {
    const std::size_t n = st.dim;
    if (g.size() != n) throw ContractViolation("central_cut: gradient length mismatch");
    const double nd = static_cast<double>(n);

    std::vector<double> bg(n, 0.0);
    double gbg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += st.b(i, j) * g[j];
        bg[i] = s;
        gbg += g[i] * s;
    }
    if (!(gbg > 0.0) || !std::isfinite(gbg))
        throw SolverFailure("central_cut: degenerate cut direction");
    const double gamma = std::sqrt(gbg);

    const double step = 1.0 / (nd + 1.0);
    const double dilate = nd * nd / (nd * nd - 1.0);
    const double squeeze = 2.0 / (nd + 1.0);

    for (std::size_t i = 0; i < n; ++i) st.center[i] -= step * bg[i] / gamma;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            st.b(i, j) = dilate * (st.b(i, j) - squeeze * bg[i] * bg[j] / gbg);

    // exact volume bookkeeping: det scales by dilate^n * (1 - squeeze)
    st.log_volume += 0.5 * (nd * std::log(dilate) + std::log1p(-squeeze));
    ++st.iterations;
}

struct FeasibilityResult {
    bool feasible = false;
    std::vector<double> point;
    long iterations = 0;
};

/// Runs the cutting loop until the oracle accepts a center or the volume
/// budget is spent. The oracle returns a violated-constraint gradient (the
/// kept halfspace is g^T (x - center) <= 0) or nullopt to accept.
template <class Oracle>
FeasibilityResult ellipsoid_feasibility(EllipsoidState st, Oracle&& oracle, long max_iter,
                                        double log_volume_floor) {
    FeasibilityResult r;
    while (true) {
        std::optional<std::vector<double>> cut = oracle(std::as_const(st.center));
        if (!cut) {
            r.feasible = true;
            r.point = st.center;
            r.iterations = st.iterations;
            return r;
        }
        if (st.iterations >= max_iter || st.log_volume <= log_volume_floor) {
            r.feasible = false;
            r.iterations = st.iterations;
            return r;
        }
        try {
            central_cut(st, *cut);
        } catch (const SolverFailure&) {
            // shape matrix ground down to noise: same verdict as volume exhaustion
            r.feasible = false;
            r.iterations = st.iterations;
            return r;
        }
    }
}

// --- real coordinates for Hermitian decision variables -------------------
//
// A Hermitian n x n matrix is packed as n*n reals: the n diagonal entries
// first, then (Re, Im) of each strict upper-triangle entry in row-major
// order. pack_trace_gradient(M) is the vector g with
//   dot(g, pack_hermitian(S)) == tr(M S)
// for all Hermitian S, which makes trace-linear constraints linear cuts.

inline std::size_t hermitian_pack_dim(std::size_t n) { return n * n; }

inline void pack_hermitian(const HermitianMatrix& h, std::span<double> out) {
    const std::size_t n = h.dim();
    if (out.size() != n * n) throw ContractViolation("pack_hermitian: output length mismatch");
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i) out[p++] = h(i, i).real();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            out[p++] = h(i, j).real();
            out[p++] = h(i, j).imag();
        }
}

inline HermitianMatrix unpack_hermitian(std::span<const double> in, std::size_t n) {
    if (in.size() != n * n) throw ContractViolation("unpack_hermitian: input length mismatch");
    ComplexMatrix m(n, n);
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i) m(i, i) = in[p++];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            m(i, j) = cxd(in[p], in[p + 1]);
            m(j, i) = std::conj(m(i, j));
            p += 2;
        }
    return HermitianMatrix::unchecked(m);
}

inline std::vector<double> pack_trace_gradient(const HermitianMatrix& m) {
    const std::size_t n = m.dim();
    std::vector<double> g(n * n);
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i) g[p++] = m(i, i).real();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            g[p++] = 2.0 * m(i, j).real();
            g[p++] = 2.0 * m(i, j).imag();
        }
    return g;
}

}  // namespace mcisac
