#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <utility>

#include "complex_matrix.hpp"

namespace mcisac {

/// Hermitian matrix with validated construction. The wrapped storage is
/// exactly Hermitian: construction symmetrizes after checking the input is
/// Hermitian to within 1e-12 relative to its largest entry.
class HermitianMatrix {
public:
    HermitianMatrix() = default;

    explicit HermitianMatrix(const ComplexMatrix& m) {
        if (m.rows() != m.cols()) throw ContractViolation("HermitianMatrix: not square");
        if (!m.is_finite()) throw ContractViolation("HermitianMatrix: non-finite entry");
        const double scale = m.max_abs();
        double dev = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = i; j < m.cols(); ++j)
                dev = std::max(dev, std::abs(m(i, j) - std::conj(m(j, i))));
        if (dev > 1e-12 * std::max(scale, 1e-300))
            throw ContractViolation("HermitianMatrix: input is not Hermitian");
        m_ = m;
        symmetrize();
    }

    /// Wrap without the deviation check; still symmetrizes so the stored
    /// matrix is exactly Hermitian. For internal paths that are Hermitian
    /// by construction up to rounding.
    static HermitianMatrix unchecked(const ComplexMatrix& m) {
        if (m.rows() != m.cols()) throw ContractViolation("HermitianMatrix: not square");
        HermitianMatrix h;
        h.m_ = m;
        h.symmetrize();
        return h;
    }

    static HermitianMatrix zero(std::size_t n) { return unchecked(ComplexMatrix(n, n)); }

    static HermitianMatrix scaled_identity(std::size_t n, double s) {
        ComplexMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = s;
        return unchecked(m);
    }

    /// h h^H rank-one matrix.
    static HermitianMatrix from_outer(const CVector& h) { return unchecked(outer(h, h)); }

    std::size_t dim() const { return m_.rows(); }
    const ComplexMatrix& matrix() const { return m_; }
    const cxd& operator()(std::size_t i, std::size_t j) const { return m_(i, j); }

    double trace() const { return m_.trace().real(); }

    /// Real quadratic form x^H A x.
    double quad_form(const CVector& x) const {
        if (x.size() != dim()) throw ContractViolation("quad_form: length mismatch");
        return vdot(x, matvec(m_, x)).real();
    }

    HermitianMatrix& add_scaled(const HermitianMatrix& o, double s) {
        if (o.dim() != dim()) throw ContractViolation("add_scaled: shape mismatch");
        for (std::size_t i = 0; i < dim(); ++i)
            for (std::size_t j = 0; j < dim(); ++j) m_(i, j) += s * o.m_(i, j);
        return *this;
    }

private:
    void symmetrize() {
        for (std::size_t i = 0; i < m_.rows(); ++i) {
            m_(i, i) = cxd(m_(i, i).real(), 0.0);
            for (std::size_t j = i + 1; j < m_.cols(); ++j) {
                const cxd v = 0.5 * (m_(i, j) + std::conj(m_(j, i)));
                m_(i, j) = v;
                m_(j, i) = std::conj(v);
            }
        }
    }

    ComplexMatrix m_;
};

/// Eigendecomposition A = U diag(w) U^H with eigenvalues sorted descending.
struct EvdResult {
    std::vector<double> eigenvalues;
    ComplexMatrix vectors;  // columns are orthonormal eigenvectors

    ComplexMatrix reconstruct() const {
        const std::size_t n = eigenvalues.size();
        ComplexMatrix d(n, n);
        for (std::size_t i = 0; i < n; ++i) d(i, i) = eigenvalues[i];
        return vectors * d * vectors.adjoint();
    }
};

/// Cyclic Jacobi eigensolver for Hermitian matrices. Each pivot (p,q) is
/// phase-rotated to a real 2x2 problem and annihilated with a classical
/// Jacobi rotation; sweeps run until the off-diagonal Frobenius mass falls
/// below 1e-14 of the matrix norm. Quadratically convergent for the small
/// orders used here (dim <= 16 or so).
inline EvdResult evd(const HermitianMatrix& a) {
    const std::size_t n = a.dim();
    ComplexMatrix m = a.matrix();
    ComplexMatrix u = ComplexMatrix::identity(n);

    const double norm = std::max(m.frobenius_norm(), 1e-300);
    const double stop = 1e-14 * norm;

    const int max_sweeps = 60;
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * std::norm(m(p, q));
        if (std::sqrt(off) <= stop) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const cxd apq = m(p, q);
                const double abs_apq = std::abs(apq);
                if (abs_apq <= 1e-300) continue;

                // phase-rotate the pivot so the 2x2 subproblem is real symmetric
                const cxd z = std::conj(apq) / abs_apq;  // apq * z = |apq|
                const double app = m(p, p).real();
                const double aqq = m(q, q).real();
                const double tau = (aqq - app) / (2.0 * abs_apq);
                const double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                              : -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                // unitary G differs from identity only in the (p,q) plane:
                //   G(p,p)=c, G(p,q)=s, G(q,p)=-s*z, G(q,q)=c*z
                const cxd gqp = -s * z;
                const cxd gqq = c * z;

                for (std::size_t i = 0; i < n; ++i) {  // M <- M G, U <- U G
                    const cxd mp = m(i, p), mq = m(i, q);
                    m(i, p) = c * mp + gqp * mq;
                    m(i, q) = s * mp + gqq * mq;
                    const cxd up = u(i, p), uq = u(i, q);
                    u(i, p) = c * up + gqp * uq;
                    u(i, q) = s * up + gqq * uq;
                }
                for (std::size_t j = 0; j < n; ++j) {  // M <- G^H M
                    const cxd mp = m(p, j), mq = m(q, j);
                    m(p, j) = c * mp + std::conj(gqp) * mq;
                    m(q, j) = s * mp + std::conj(gqq) * mq;
                }
                m(p, q) = 0.0;
                m(q, p) = 0.0;
                m(p, p) = cxd(m(p, p).real(), 0.0);
                m(q, q) = cxd(m(q, q).real(), 0.0);
            }
        }
    }
    if (sweep == max_sweeps) throw SolverFailure("evd: Jacobi sweeps did not converge");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return m(i, i).real() > m(j, j).real(); });

    EvdResult r;
    r.eigenvalues.resize(n);
    r.vectors = ComplexMatrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        r.eigenvalues[k] = m(order[k], order[k]).real();
        for (std::size_t i = 0; i < n; ++i) r.vectors(i, k) = u(i, order[k]);
    }
    return r;
}

/// Smallest eigenvalue and a unit eigenvector for it.
inline std::pair<double, CVector> min_eigpair(const HermitianMatrix& a) {
    const EvdResult r = evd(a);
    const std::size_t last = a.dim() - 1;
    return {r.eigenvalues[last], r.vectors.col(last)};
}

/// Default positive-definiteness cutoff, relative to the mean eigenvalue.
inline double default_pd_tol(const HermitianMatrix& a) {
    return 1e-10 * a.trace() / static_cast<double>(a.dim());
}

/// tr(A^{-1}) through the spectrum; +infinity when any eigenvalue falls at
/// or below pd_tol (rank-deficient to working precision).
inline double trace_inverse(const HermitianMatrix& a, double pd_tol) {
    const EvdResult r = evd(a);
    double s = 0.0;
    for (double w : r.eigenvalues) {
        if (w <= pd_tol) return std::numeric_limits<double>::infinity();
        s += 1.0 / w;
    }
    return s;
}

inline double trace_inverse(const HermitianMatrix& a) {
    return trace_inverse(a, default_pd_tol(a));
}

inline bool is_psd(const HermitianMatrix& a, double tol) {
    return evd(a).eigenvalues.back() >= -tol;
}

/// Nearest-in-spectrum PSD projection: eigenvalues clamped to >= floor.
inline HermitianMatrix clip_psd(const HermitianMatrix& a, double floor_value = 0.0) {
    EvdResult r = evd(a);
    bool touched = false;
    for (double& w : r.eigenvalues)
        if (w < floor_value) {
            w = floor_value;
            touched = true;
        }
    if (!touched) return a;
    return HermitianMatrix::unchecked(r.reconstruct());
}

/// Hermitian square root of a PSD matrix; negative rounding noise is clipped.
inline HermitianMatrix psd_sqrt(const HermitianMatrix& a, double tol_scale = 1e-10) {
    EvdResult r = evd(a);
    const double tol = tol_scale * std::max(std::abs(r.eigenvalues.front()), 1e-300);
    for (double& w : r.eigenvalues) {
        if (w < -tol) throw ContractViolation("psd_sqrt: matrix is not PSD");
        w = std::sqrt(std::max(w, 0.0));
    }
    return HermitianMatrix::unchecked(r.reconstruct());
}

}  // namespace mcisac
