#pragma once

/**
 * matrix.hpp — dense complex matrices at desk scale.
 *
 * CMat is a small row-major matrix of std::complex<double>. Everything the
 * toolkit realizes numerically (basis matrices, amplified elements, Kronecker
 * blocks) passes through this type; dimensions stay well under 10^2, so the
 * representation favours clarity over cleverness.
 *
 * Index conventions fixed here and relied on everywhere else:
 *   - kron(A, B) has entries (A ⊗ B)[(i,k),(j,l)] = A(i,j)·B(k,l) with the
 *     row index i*B.rows()+k (left factor outer, right factor inner);
 *   - direct_sum(A, B) is the block diagonal [A 0; 0 B];
 *   - sandwich(a, x, b) is the rectangular compression a·x·b.
 */

#include <algorithm>
#include <cmath>
#include <vector>

#include "opspace/common.hpp"

namespace opspace {

class CMat {
  public:
    CMat() = default;
    CMat(int rows, int cols)
        : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols) {
        if (rows < 0 || cols < 0) throw invalid_input("CMat: negative dimension");
    }

    static CMat identity(int n) {
        CMat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    /// Matrix unit E_ij of shape rows x cols.
    static CMat unit(int rows, int cols, int i, int j) {
        CMat m(rows, cols);
        m(i, j) = 1.0;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    cplx& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
    const cplx& operator()(int i, int j) const {
        return a_[static_cast<size_t>(i) * cols_ + j];
    }

    std::vector<cplx>& data() { return a_; }
    const std::vector<cplx>& data() const { return a_; }

    CMat& operator+=(const CMat& o) {
        check_same_shape(o, "operator+=");
        for (size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
        return *this;
    }
    CMat& operator-=(const CMat& o) {
        check_same_shape(o, "operator-=");
        for (size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
        return *this;
    }
    CMat& operator*=(cplx s) {
        for (auto& v : a_) v *= s;
        return *this;
    }

    friend CMat operator+(CMat a, const CMat& b) { return a += b; }
    friend CMat operator-(CMat a, const CMat& b) { return a -= b; }
    friend CMat operator*(cplx s, CMat a) { return a *= s; }
    friend CMat operator*(CMat a, cplx s) { return a *= s; }

    friend CMat operator*(const CMat& a, const CMat& b) {
        if (a.cols_ != b.rows_)
            throw shape_error("CMat multiply: inner dimensions disagree");
        CMat c(a.rows_, b.cols_);
        for (int i = 0; i < a.rows_; ++i)
            for (int k = 0; k < a.cols_; ++k) {
                const cplx aik = a(i, k);
                if (aik == cplx{}) continue;
                for (int j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

  private:
    void check_same_shape(const CMat& o, const char* op) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw shape_error(std::string("CMat ") + op + ": shape mismatch");
    }

    int rows_ = 0, cols_ = 0;
    std::vector<cplx> a_;
};

// ====================================================================
// Elementwise helpers
// ====================================================================

inline CMat adjoint(const CMat& a) {
    CMat r(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) r(j, i) = std::conj(a(i, j));
    return r;
}

inline CMat transpose(const CMat& a) {
    CMat r(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) r(j, i) = a(i, j);
    return r;
}

inline CMat conjugate(const CMat& a) {
    CMat r = a;
    for (auto& v : r.data()) v = std::conj(v);
    return r;
}

inline double frobenius_norm(const CMat& a) {
    double s = 0;
    for (const auto& v : a.data()) s += std::norm(v);
    return std::sqrt(s);
}

/// Frobenius inner product <A, B> = Tr(A^* B), antilinear in the first slot.
inline cplx frobenius_inner(const CMat& a, const CMat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw shape_error("frobenius_inner: shape mismatch");
    cplx s = 0;
    for (size_t i = 0; i < a.data().size(); ++i)
        s += std::conj(a.data()[i]) * b.data()[i];
    return s;
}

inline double max_abs(const CMat& a) {
    double m = 0;
    for (const auto& v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

inline cplx trace(const CMat& a) {
    cplx s = 0;
    const int n = std::min(a.rows(), a.cols());
    for (int i = 0; i < n; ++i) s += a(i, i);
    return s;
}

// ====================================================================
// Structural operations
// ====================================================================

/// Kronecker product, (i,k),(j,l) convention (left factor indexes blocks).
inline CMat kron(const CMat& a, const CMat& b) {
    CMat r(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) {
            const cplx aij = a(i, j);
            if (aij == cplx{}) continue;
            for (int k = 0; k < b.rows(); ++k)
                for (int l = 0; l < b.cols(); ++l)
                    r(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
        }
    return r;
}

/// Block diagonal sum diag(a, b).
inline CMat direct_sum(const CMat& a, const CMat& b) {
    CMat r(a.rows() + b.rows(), a.cols() + b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) r(i, j) = a(i, j);
    for (int i = 0; i < b.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j) r(a.rows() + i, a.cols() + j) = b(i, j);
    return r;
}

/// Rectangular compression a·x·b (shapes must chain).
inline CMat sandwich(const CMat& a, const CMat& x, const CMat& b) {
    if (a.cols() != x.rows() || x.cols() != b.rows())
        throw shape_error("sandwich: factor shapes do not chain");
    return a * x * b;
}

/// Column-major flattening of a matrix into a rows*cols column vector.
inline CMat vec(const CMat& a) {
    CMat v(a.rows() * a.cols(), 1);
    for (int j = 0; j < a.cols(); ++j)
        for (int i = 0; i < a.rows(); ++i) v(j * a.rows() + i, 0) = a(i, j);
    return v;
}

/// Inverse of vec for a known shape.
inline CMat unvec(const CMat& v, int rows, int cols) {
    if (v.cols() != 1 || v.rows() != rows * cols)
        throw shape_error("unvec: length does not match shape");
    CMat a(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) a(i, j) = v(j * rows + i, 0);
    return a;
}

} // namespace opspace
