#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcisac {

using cxd = std::complex<double>;
using CVector = std::vector<cxd>;

/// Thrown when an argument violates a documented precondition.
struct ContractViolation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Thrown when an iterative routine cannot reach its declared accuracy.
struct SolverFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense row-major complex matrix. Sized for antenna-count problems
/// (dimensions in the single digits), so no blocking or pivoting games.
class ComplexMatrix {
public:
    ComplexMatrix() : rows_(0), cols_(0) {}
    ComplexMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), a_(rows * cols, cxd(0.0, 0.0)) {}

    static ComplexMatrix identity(std::size_t n) {
        ComplexMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    cxd& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    const cxd& operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    bool is_finite() const {
        for (const cxd& v : a_)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        return true;
    }

    ComplexMatrix adjoint() const {
        ComplexMatrix m(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) m(j, i) = std::conj((*this)(i, j));
        return m;
    }

    cxd trace() const {
        cxd t = 0.0;
        for (std::size_t i = 0; i < rows_ && i < cols_; ++i) t += (*this)(i, i);
        return t;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (const cxd& v : a_) s += std::norm(v);
        return std::sqrt(s);
    }

    double max_abs() const {
        double m = 0.0;
        for (const cxd& v : a_) m = std::max(m, std::abs(v));
        return m;
    }

    CVector col(std::size_t j) const {
        CVector v(rows_);
        for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
        return v;
    }

    ComplexMatrix& operator+=(const ComplexMatrix& o) {
        require_same_shape(o, "operator+=");
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
        return *this;
    }
    ComplexMatrix& operator-=(const ComplexMatrix& o) {
        require_same_shape(o, "operator-=");
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
        return *this;
    }
    ComplexMatrix& operator*=(cxd s) {
        for (cxd& v : a_) v *= s;
        return *this;
    }

    friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
    friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
    friend ComplexMatrix operator*(cxd s, ComplexMatrix a) { return a *= s; }

    friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
        if (a.cols_ != b.rows_)
            throw ContractViolation("matrix product: inner dimensions disagree");
        ComplexMatrix c(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const cxd aik = a(i, k);
                if (aik == cxd(0.0, 0.0)) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

private:
    void require_same_shape(const ComplexMatrix& o, const char* what) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw ContractViolation(std::string(what) + ": shape mismatch");
    }

    std::size_t rows_, cols_;
    std::vector<cxd> a_;
};

inline cxd vdot(const CVector& x, const CVector& y) {
    if (x.size() != y.size()) throw ContractViolation("vdot: length mismatch");
    cxd s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::conj(x[i]) * y[i];
    return s;
}

inline double norm2sq(const CVector& x) {
    double s = 0.0;
    for (const cxd& v : x) s += std::norm(v);
    return s;
}

inline CVector matvec(const ComplexMatrix& a, const CVector& x) {
    if (a.cols() != x.size()) throw ContractViolation("matvec: length mismatch");
    CVector y(a.rows(), cxd(0.0, 0.0));
    for (std::size_t i = 0; i < a.rows(); ++i) {
        cxd s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

/// x y^H outer product.
inline ComplexMatrix outer(const CVector& x, const CVector& y) {
    ComplexMatrix m(x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j) m(i, j) = x[i] * std::conj(y[j]);
    return m;
}

}  // namespace mcisac
